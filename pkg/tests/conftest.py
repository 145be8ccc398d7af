import numpy as np
import pytest

from advtrack.metrics import TrackResult
from advtrack.trackers import Tracker
from advtrack.video import BBox, Video


def flat_video(n_frames=5, h=48, w=48, value=90, box=(4, 4, 10, 10),
               interval=30):
    """Flat-background video with a static bright square and exact boxes."""
    frames = np.full((n_frames, h, w, 3), value, dtype=np.uint8)
    x, y, bw, bh = box
    frames[:, y:y + bh, x:x + bw] = 200
    boxes = tuple(BBox(x, y, bw, bh) for _ in range(n_frames))
    return Video(frames=frames, gt_boxes=boxes, interval=interval)


class GhostTracker(Tracker):
    """Returns the ground-truth boxes no matter what the frames contain."""

    name = "ghost"
    parallel = True

    def __init__(self, reference=None):
        super().__init__()
        self.reference = reference

    def _track(self, video, init_box):
        boxes = self.reference if self.reference is not None else video.gt_boxes
        if boxes is None:
            boxes = tuple(init_box for _ in range(video.n_frames))
        return TrackResult(boxes=tuple(boxes),
                           scores=tuple(1.0 for _ in boxes))


class ScriptedTracker(Tracker):
    """Delegates to a callable (video, init_box) -> TrackResult."""

    name = "scripted"
    parallel = True

    def __init__(self, fn):
        super().__init__()
        self._fn = fn

    def _track(self, video, init_box):
        return self._fn(video, init_box)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
