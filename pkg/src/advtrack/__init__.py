"""Black-box first-frame attacks on single-object trackers.

The library is organised around a small data model (videos, boxes, deltas),
tracking-quality metrics, a hard-label tracker abstraction with exact query
accounting, and the three attack stages: heavy perturbation generation,
RL-driven key-patch selection, and sign-based magnitude compression.
"""

from advtrack.video import BBox, Video, apply_delta, linf_distance, load_video, ssim
from advtrack.metrics import (
    EvalParams,
    TrackResult,
    accuracy,
    ar_score,
    iou,
    ope_curves,
    overlap_flag,
    robustness,
    tp_score,
)

__all__ = [
    "BBox",
    "Video",
    "apply_delta",
    "linf_distance",
    "load_video",
    "ssim",
    "EvalParams",
    "TrackResult",
    "accuracy",
    "ar_score",
    "iou",
    "ope_curves",
    "overlap_flag",
    "robustness",
    "tp_score",
]

__version__ = "0.1.0"
