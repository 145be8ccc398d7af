"""Tracking-quality and attack-quality measures.

Two discounted whole-video scores drive every attack decision:

* accuracy ``A``: mean of per-frame IoU, discounted per interval, counting
  only frames with positive overlap;
* robustness ``R``: discounted count of frames with positive overlap
  (despite the name, it counts successes).

On top of those sit two trade-off scores: ``tp_score`` (lower = stronger
attack, used to rank heavy perturbations) and ``ar_score`` (compared against
a threshold ``kappa`` to decide whether a perturbation still counts as
adversarial).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from advtrack.video import BBox


class MetricError(Exception):
    pass


class EmptySequenceError(MetricError):
    pass


class ZeroBaselineError(MetricError):
    pass


#: Stand-in for an unbounded ratio (zero denominator with nonzero numerator).
RATIO_SENTINEL = 1e9


@dataclass(frozen=True)
class EvalParams:
    """Discount factors, interval length and the two trade-off weights."""

    gamma_a: float = 0.9
    gamma_r: float = 0.9
    interval: int = 30
    iota: float = 0.4
    gamma: float = 0.4

    def __post_init__(self):
        if not (0.0 < self.gamma_a <= 1.0 and 0.0 < self.gamma_r <= 1.0):
            raise MetricError("discount factors must lie in (0, 1]")
        if not (0.0 <= self.iota <= 1.0 and 0.0 <= self.gamma <= 1.0):
            raise MetricError("trade-off factors must lie in [0, 1]")
        if self.interval < 1:
            raise MetricError("interval must be >= 1")


@dataclass(frozen=True)
class TrackResult:
    """Per-frame predicted boxes and peak confidence scores."""

    boxes: tuple[BBox, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.boxes) != len(self.scores):
            raise MetricError("boxes/scores length mismatch")
        if not all(np.isfinite(s) for s in self.scores):
            raise MetricError("scores must be finite")

    def __len__(self) -> int:
        return len(self.boxes)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 when the union has zero area."""
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    ix2 = min(a.x + a.w, b.x + b.w)
    iy2 = min(a.y + a.h, b.y + b.h)
    inter = max(0.0, ix2 - ix) * max(0.0, iy2 - iy)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return float(inter / union)


def overlap_flag(iou_value: float) -> int:
    """1 for any positive overlap, 0 otherwise."""
    return 1 if iou_value > 0.0 else 0


def _weights(n: int, gamma: float, interval: int) -> np.ndarray:
    return gamma ** (np.arange(n) // interval)


def accuracy(ious, params: EvalParams) -> float:
    """Discounted mean IoU over all frames (0-based frame indexing)."""
    v = np.asarray(ious, dtype=np.float64)
    if v.size == 0:
        raise EmptySequenceError("accuracy of an empty sequence")
    ro = (v > 0.0).astype(np.float64)
    w = _weights(v.size, params.gamma_a, params.interval)
    return float(np.sum(w * v * ro) / v.size)


def robustness(ious, params: EvalParams) -> float:
    """Discounted count of frames with positive overlap."""
    v = np.asarray(ious, dtype=np.float64)
    if v.size == 0:
        raise EmptySequenceError("robustness of an empty sequence")
    ro = (v > 0.0).astype(np.float64)
    w = _weights(v.size, params.gamma_r, params.interval)
    return float(np.sum(w * ro))


def tp_score(a_clean: float, r_clean: float, a_adv: float, r_adv: float,
             iota: float) -> float:
    """Heavy-perturbation trade-off; equals 1 at the unperturbed baseline.

    Lower values mean a stronger attack. The +1 smoothing on the robustness
    ratio keeps the score finite when the target is fully lost.
    """
    if a_clean <= 0.0:
        raise ZeroBaselineError("clean accuracy is zero")
    return float(iota * (a_adv / a_clean)
                 + (1.0 - iota) * ((r_clean + 1.0) / (r_adv + 1.0)))


def safe_ratio(num: float, den: float) -> float:
    """num/den with 0/0 -> 1 and x/0 -> RATIO_SENTINEL for x > 0."""
    if den > 0.0:
        return float(num / den)
    if num == 0.0:
        return 1.0
    return RATIO_SENTINEL


def ar_score(a_base: float, r_base: float, a_test: float, r_test: float,
             gamma: float) -> float:
    """Boundary trade-off: gamma * A_test/A_base + (1-gamma) * R_base/R_test.

    Zero test robustness means the target was never re-acquired; the score
    degenerates to RATIO_SENTINEL so any threshold comparison still orders
    correctly.
    """
    if a_base <= 0.0:
        raise ZeroBaselineError("baseline accuracy is zero")
    if r_test <= 0.0:
        return RATIO_SENTINEL
    return float(gamma * (a_test / a_base) + (1.0 - gamma) * (r_base / r_test))


def kappa_threshold(gamma: float, tau1: float, tau2: float) -> float:
    """AR threshold derived from the terminal ratio bounds."""
    return (gamma * (tau1 * tau2 - 1.0) + 1.0) / tau2


@dataclass(frozen=True)
class OpeCurves:
    success_curve: tuple[float, ...]
    success_auc: float
    precision_at_20: float


def ious_vs_reference(result: TrackResult, reference) -> np.ndarray:
    if len(result) != len(reference):
        raise MetricError(
            f"result length {len(result)} vs reference {len(reference)}")
    return np.array([iou(p, g) for p, g in zip(result.boxes, reference)])


def track_scores(result: TrackResult, reference, params: EvalParams
                 ) -> tuple[float, float]:
    """(accuracy, robustness) of a track against reference boxes."""
    v = ious_vs_reference(result, reference)
    return accuracy(v, params), robustness(v, params)


def ope_curves(result: TrackResult, gt) -> OpeCurves:
    """One-pass-evaluation success curve (101 thresholds) and precision.

    success_curve[t] is the fraction of frames with IoU strictly above
    t/100; the AUC is the curve mean. Precision is the fraction of frames
    whose predicted center lies within 20 px of the ground-truth center.
    """
    v = ious_vs_reference(result, gt)
    thresholds = np.arange(101) / 100.0
    curve = tuple(float(np.mean(v > t)) for t in thresholds)
    auc = float(np.mean(curve))
    dists = []
    for p, g in zip(result.boxes, gt):
        pc = p.center
        gc = g.center
        dists.append(np.hypot(pc[0] - gc[0], pc[1] - gc[1]))
    precision = float(np.mean(np.asarray(dists) <= 20.0))
    return OpeCurves(success_curve=curve, success_auc=auc,
                     precision_at_20=precision)
