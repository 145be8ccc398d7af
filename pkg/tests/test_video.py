import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advtrack.video import (
    AnnotationMismatchError,
    BBox,
    FrameTooSmallError,
    MissingDirectoryError,
    ShapeMismatchError,
    Video,
    apply_delta,
    linf_distance,
    load_frame,
    load_video,
    ssim,
    with_frame0,
    write_frame,
    write_video,
)


def _write_frames(tmp_path, shapes, gt_lines=None):
    d = tmp_path / "vid"
    d.mkdir()
    rng = np.random.default_rng(0)
    for i, (h, w) in enumerate(shapes):
        arr = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        write_frame(arr, str(d / f"{i:08d}.png"))
    ann = None
    if gt_lines is not None:
        ann = d / "groundtruth.txt"
        ann.write_text("\n".join(gt_lines) + "\n")
    return str(d), str(ann) if ann else None


class TestLoadVideo:
    def test_frames_and_annotations(self, tmp_path):
        d, ann = _write_frames(tmp_path, [(64, 64)] * 3,
                               ["1,2,10,12", "2,3,10,12", "3,4,10,12"])
        v = load_video(d, ann)
        assert v.n_frames == 3
        assert v.gt_boxes is not None and len(v.gt_boxes) == 3
        assert v.gt_boxes[0] == BBox(1, 2, 10, 12)

    def test_mixed_frame_sizes(self, tmp_path):
        d, _ = _write_frames(tmp_path, [(64, 64), (32, 64), (64, 64)])
        with pytest.raises(ShapeMismatchError):
            load_video(d)

    def test_annotation_count_mismatch(self, tmp_path):
        d, ann = _write_frames(tmp_path, [(64, 64)] * 3,
                               ["1,2,3,4", "5,6,7,8"])
        with pytest.raises(AnnotationMismatchError):
            load_video(d, ann)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(MissingDirectoryError):
            load_video(str(tmp_path / "nope"))

    def test_png_round_trip_is_lossless(self, tmp_path):
        rng = np.random.default_rng(7)
        arr = rng.integers(0, 256, size=(33, 41, 3), dtype=np.uint8)
        p = str(tmp_path / "f.png")
        write_frame(arr, p)
        assert np.array_equal(load_frame(p), arr)

    def test_video_round_trip(self, tmp_path):
        from tests.conftest import flat_video

        v = flat_video(3)
        write_video(v, str(tmp_path / "v"))
        again = load_video(str(tmp_path / "v"),
                           str(tmp_path / "v" / "groundtruth.txt"))
        assert np.array_equal(again.frames, v.frames)
        assert again.gt_boxes == v.gt_boxes


class TestApplyDelta:
    def test_zero_delta_is_identity(self, rng):
        f = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        assert np.array_equal(apply_delta(f, np.zeros((8, 8, 3))), f)

    def test_clamps_at_255(self):
        f = np.full((2, 2, 3), 250, dtype=np.uint8)
        out = apply_delta(f, np.full((2, 2, 3), 10.0))
        assert np.all(out == 255)

    def test_rounds_after_clamp(self):
        f = np.full((1, 1, 3), 100, dtype=np.uint8)
        out = apply_delta(f, np.full((1, 1, 3), -3.6))
        assert np.all(out == 96)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            apply_delta(np.zeros((2, 2, 3), dtype=np.uint8), np.zeros((2, 3, 3)))

    def test_never_leaves_byte_range(self, rng):
        f = rng.integers(0, 256, size=(6, 6, 3), dtype=np.uint8)
        out = apply_delta(f, rng.normal(0, 300, size=(6, 6, 3)))
        assert out.dtype == np.uint8


class TestLinfDistance:
    def test_identical(self, rng):
        f = rng.integers(0, 256, size=(5, 5, 3), dtype=np.uint8)
        assert linf_distance(f, f) == 0.0

    def test_single_pixel(self):
        a = np.zeros((3, 3, 3), dtype=np.uint8)
        b = a.copy()
        b[1, 1, 0] = 7
        assert linf_distance(a, b) == 7.0

    def test_max_of_absolute_offsets(self):
        a = np.full((2, 2, 3), 100, dtype=np.uint8)
        b = a.copy()
        b[0, 0, 0] = 95   # -5
        b[1, 1, 2] = 103  # +3
        assert linf_distance(a, b) == 5.0

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_metric_properties(self, seed):
        r = np.random.default_rng(seed)
        a, b, c = (r.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
                   for _ in range(3))
        dab = linf_distance(a, b)
        assert dab == linf_distance(b, a)
        assert linf_distance(a, a) == 0.0
        assert dab <= linf_distance(a, c) + linf_distance(c, b) + 1e-12


class TestSsim:
    def test_identical_images(self, rng):
        f = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
        assert ssim(f, f) == pytest.approx(1.0, abs=1e-12)

    def test_constant_images(self):
        f = np.full((16, 16, 3), 128, dtype=np.uint8)
        assert ssim(f, f.copy()) == pytest.approx(1.0, abs=1e-12)

    def test_noise_monotonicity(self):
        r = np.random.default_rng(42)
        base = r.integers(40, 216, size=(48, 48, 3)).astype(np.uint8)
        noisy = lambda s: apply_delta(base, r.uniform(-s, s, base.shape))
        low = ssim(base, noisy(5))
        high = ssim(base, noisy(20))
        assert high < low < 1.0

    def test_symmetry(self, rng):
        a = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        b = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-9

    def test_window_too_large(self):
        f = np.zeros((8, 8, 3), dtype=np.uint8)
        with pytest.raises(FrameTooSmallError):
            ssim(f, f)

    def test_range(self, rng):
        a = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
        b = 255 - a
        assert -1.0 <= ssim(a, b) <= 1.0


class TestVideoModel:
    def test_gt_length_checked(self):
        frames = np.zeros((2, 4, 4, 3), dtype=np.uint8)
        with pytest.raises(AnnotationMismatchError):
            Video(frames=frames, gt_boxes=(BBox(0, 0, 1, 1),))

    def test_frames_become_read_only(self):
        frames = np.zeros((1, 4, 4, 3), dtype=np.uint8)
        v = Video(frames=frames)
        with pytest.raises(ValueError):
            v.frames[0, 0, 0, 0] = 1

    def test_with_frame0_shares_tail(self):
        from tests.conftest import flat_video

        v = flat_video(4)
        new0 = np.zeros((48, 48, 3), dtype=np.uint8)
        v2 = with_frame0(v, new0)
        assert np.array_equal(v2.frames[0], new0)
        assert np.array_equal(v2.frames[1:], v.frames[1:])

    def test_negative_box_rejected(self):
        with pytest.raises(Exception):
            BBox(0, 0, -1, 5)
