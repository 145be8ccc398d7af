import numpy as np
import pytest

from advtrack.corpus import generate_synthetic_video
from advtrack.metrics import ious_vs_reference
from advtrack.trackers import (
    NccConfig,
    NccTracker,
    OutOfBoundsError,
    TemplateTooLargeError,
    ncc_locate,
)
from advtrack.video import BBox, Video, apply_delta, with_frame0
from tests.conftest import flat_video


def brute_force_zncc(template, frame, prev_box, radius):
    """Oracle: plain loops over every offset within the radius."""
    th, tw = template.shape[:2]
    fh, fw = frame.shape[:2]
    t = template.astype(np.float64)
    t0 = t - t.mean()
    tn = np.sqrt((t0 ** 2).sum())
    px = int(np.floor(prev_box.x + 0.5))
    py = int(np.floor(prev_box.y + 0.5))
    px = min(max(px, 0), fw - tw)
    py = min(max(py, 0), fh - th)
    best = None
    for y in range(max(0, py - radius), min(fh - th, py + radius) + 1):
        for x in range(max(0, px - radius), min(fw - tw, px + radius) + 1):
            win = frame[y:y + th, x:x + tw].astype(np.float64)
            w0 = win - win.mean()
            den = np.sqrt((w0 ** 2).sum()) * tn
            c = 0.0 if den == 0 else float((w0 * t0).sum() / den)
            if best is None or c > best[0] + 1e-12:
                best = (c, x, y)
    return BBox(best[1], best[2], tw, th), best[0]


def _patch(size=8):
    g = np.arange(size * size * 3, dtype=np.uint8).reshape(size, size, 3)
    return 128 + (g % 64)


def _square_frame(h, w, x, y, size=8, bg=64):
    f = np.full((h, w, 3), bg, dtype=np.uint8)
    f[y:y + size, x:x + size] = _patch(size)
    return f


class TestNccLocate:
    def test_exact_copy_at_prev_position(self):
        f = _square_frame(40, 40, 12, 14)
        template = f[14:22, 12:20]
        box, score = ncc_locate(template, f, BBox(12, 14, 8, 8), 5)
        assert (box.x, box.y) == (12, 14)
        assert score == pytest.approx(1.0, abs=1e-12)

    def test_zero_variance_template(self):
        f = _square_frame(40, 40, 10, 10)
        template = np.full((8, 8, 3), 77, dtype=np.uint8)
        box, score = ncc_locate(template, f, BBox(10, 10, 8, 8), 5)
        assert (box.x, box.y, score) == (10, 10, 0.0)

    def test_offset_within_radius(self):
        f = _square_frame(40, 40, 14, 10)
        template = f[10:18, 14:22]
        # previous box sits 2 px left of the true position
        box, score = ncc_locate(template, f, BBox(12, 10, 8, 8), 3)
        assert (box.x, box.y) == (14, 10)
        assert score == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_brute_force(self, seed):
        r = np.random.default_rng(seed)
        frame = r.integers(0, 256, size=(32, 36, 3), dtype=np.uint8)
        ty, tx = int(r.integers(0, 25)), int(r.integers(0, 29))
        template = frame[ty:ty + 7, tx:tx + 7].copy()
        prev = BBox(int(r.integers(0, 29)), int(r.integers(0, 25)), 7, 7)
        got_box, got_score = ncc_locate(template, frame, prev, 4)
        exp_box, exp_score = brute_force_zncc(template, frame, prev, 4)
        assert (got_box.x, got_box.y) == (exp_box.x, exp_box.y)
        assert got_score == pytest.approx(exp_score, abs=1e-9)

    def test_tie_breaks_to_first_row_major(self):
        # two identical copies: the smaller offset in row-major order wins
        f = np.full((30, 30, 3), 50, dtype=np.uint8)
        patch = np.arange(48, dtype=np.uint8).reshape(4, 4, 3)
        f[5:9, 5:9] = patch
        f[5:9, 15:19] = patch
        box, score = ncc_locate(patch, f, BBox(10, 5, 4, 4), 10)
        assert (box.x, box.y) == (5, 5)

    def test_template_larger_than_frame(self):
        with pytest.raises(TemplateTooLargeError):
            ncc_locate(np.zeros((10, 10, 3), dtype=np.uint8),
                       np.zeros((5, 5, 3), dtype=np.uint8), BBox(0, 0, 10, 10), 2)


class TestTrack:
    def test_single_frame_video(self):
        v = flat_video(1)
        t = NccTracker()
        res = t.track(v, v.gt_boxes[0])
        assert len(res) == 1
        assert res.boxes[0] == v.gt_boxes[0]
        assert res.scores[0] == 1.0
        assert t.query_count == 1

    def test_identical_frames_stay_put(self):
        v = flat_video(3)
        t = NccTracker()
        res = t.track(v, v.gt_boxes[0])
        for b in res.boxes:
            assert (b.x, b.y) == (v.gt_boxes[0].x, v.gt_boxes[0].y)

    def test_translated_square(self):
        f0 = _square_frame(48, 48, 10, 10)
        f1 = _square_frame(48, 48, 13, 14)
        v = Video(frames=np.stack([f0, f1]))
        t = NccTracker(NccConfig(search_radius=6))
        res = t.track(v, BBox(10, 10, 8, 8))
        assert (res.boxes[1].x, res.boxes[1].y) == (13, 14)
        assert res.scores[1] == pytest.approx(1.0, abs=1e-12)

    def test_init_box_out_of_bounds(self):
        v = flat_video(2)
        t = NccTracker()
        with pytest.raises(OutOfBoundsError):
            t.track(v, BBox(45, 45, 10, 10))
        with pytest.raises(OutOfBoundsError):
            t.track(v, BBox(0, 0, 0, 0))

    def test_determinism(self):
        v = generate_synthetic_video(3, 8)
        t = NccTracker(NccConfig(search_radius=8))
        r1 = t.track(v, v.gt_boxes[0])
        r2 = t.track(v, v.gt_boxes[0])
        assert r1 == r2

    def test_query_count_increments(self):
        v = flat_video(2)
        t = NccTracker()
        for i in range(4):
            t.track(v, v.gt_boxes[0])
        assert t.query_count == 4

    def test_template_corruption_degrades_tracking(self):
        """eps=64 uniform noise on the template region lowers mean IoU."""
        deltas = []
        for seed in range(20):
            v = generate_synthetic_video(seed, 25)
            t = NccTracker(NccConfig(search_radius=16))
            clean = ious_vs_reference(t.track(v, v.gt_boxes[0]),
                                      v.gt_boxes).mean()
            r = np.random.default_rng(seed + 999)
            delta = np.zeros(v.frame0.shape)
            b = v.gt_boxes[0]
            delta[int(b.y):int(b.y + b.h), int(b.x):int(b.x + b.w)] = \
                r.uniform(-64, 64, (int(b.h), int(b.w), 3))
            adv = with_frame0(v, apply_delta(v.frame0, delta))
            noisy = ious_vs_reference(t.track(adv, v.gt_boxes[0]),
                                      v.gt_boxes).mean()
            deltas.append(clean - noisy)
        assert np.mean(deltas) > 0.0
        assert sum(d > 0 for d in deltas) >= 10
