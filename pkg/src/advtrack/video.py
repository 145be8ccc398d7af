"""Video/frame/box data model, PNG I/O and frame-level distance measures.

Frames are ``(H, W, 3)`` uint8 arrays.  Perturbations ("deltas") are
real-valued arrays of the same shape; they only become pixels through
:func:`apply_delta`, which clamps and quantizes.  Everything here is a plain
value: construct once, share freely.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter


class VideoError(Exception):
    """Base for data-model violations."""


class MissingDirectoryError(VideoError):
    pass


class ShapeMismatchError(VideoError):
    pass


class AnnotationMismatchError(VideoError):
    pass


class FrameTooSmallError(VideoError):
    pass


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle in pixel units: top-left corner plus size.

    Zero-area boxes are legal and act as the "target lost" sentinel.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise VideoError(f"negative box size: {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        # A degenerate box's center is its origin.
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class Video:
    """Equal-shaped uint8 RGB frames plus optional per-frame ground truth.

    ``interval`` is the frame count per discount interval used by the
    discounted accuracy/robustness measures.
    """

    frames: np.ndarray
    gt_boxes: tuple[BBox, ...] | None = None
    interval: int = 30
    video_id: str = ""

    def __post_init__(self):
        f = self.frames
        if f.ndim != 4 or f.shape[-1] != 3:
            raise ShapeMismatchError(f"frames must be (N, H, W, 3), got {f.shape}")
        if f.dtype != np.uint8:
            raise ShapeMismatchError(f"frames must be uint8, got {f.dtype}")
        if f.shape[0] < 1:
            raise VideoError("video needs at least one frame")
        if self.gt_boxes is not None and len(self.gt_boxes) != f.shape[0]:
            raise AnnotationMismatchError(
                f"{len(self.gt_boxes)} boxes for {f.shape[0]} frames"
            )
        if self.interval < 1:
            raise VideoError("interval must be >= 1")
        f.setflags(write=False)

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        return int(self.frames.shape[2])

    @property
    def frame0(self) -> np.ndarray:
        return self.frames[0]


_FRAME_RE = re.compile(r"^(\d+)\.(png|PNG)$")


def load_frame(path: str) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_frame(frame: np.ndarray, path: str) -> None:
    Image.fromarray(frame, mode="RGB").save(path, format="PNG")


def load_video(directory: str, annotation_file: str | None = None,
               interval: int = 30) -> Video:
    """Load zero-padded, index-named PNG frames plus an optional box file.

    The annotation file carries one ``x,y,w,h`` line per frame.
    """
    if not os.path.isdir(directory):
        raise MissingDirectoryError(directory)
    entries = []
    for name in os.listdir(directory):
        m = _FRAME_RE.match(name)
        if m:
            entries.append((int(m.group(1)), name))
    if not entries:
        raise MissingDirectoryError(f"no indexed frames in {directory}")
    entries.sort()
    frames = []
    for _, name in entries:
        frames.append(load_frame(os.path.join(directory, name)))
    shape = frames[0].shape
    for i, fr in enumerate(frames):
        if fr.shape != shape:
            raise ShapeMismatchError(
                f"frame {i} has shape {fr.shape}, expected {shape}")
    gt = None
    if annotation_file is not None:
        gt = tuple(parse_annotations(annotation_file))
        if len(gt) != len(frames):
            raise AnnotationMismatchError(
                f"{len(gt)} annotation lines for {len(frames)} frames")
    return Video(frames=np.stack(frames), gt_boxes=gt, interval=interval,
                 video_id=os.path.basename(os.path.normpath(directory)))


def parse_annotations(path: str) -> list[BBox]:
    boxes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = [float(p) for p in re.split(r"[,\s]+", line)]
            if len(parts) != 4:
                raise AnnotationMismatchError(f"bad annotation line: {line!r}")
            boxes.append(BBox(*parts))
    return boxes


def write_video(video: Video, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for i in range(video.n_frames):
        write_frame(video.frames[i], os.path.join(directory, f"{i:08d}.png"))
    if video.gt_boxes is not None:
        with open(os.path.join(directory, "groundtruth.txt"), "w") as fh:
            for b in video.gt_boxes:
                fh.write(f"{_fmt(b.x)},{_fmt(b.y)},{_fmt(b.w)},{_fmt(b.h)}\n")


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


def with_frame0(video: Video, frame0: np.ndarray) -> Video:
    """New video sharing every frame except a replaced first one."""
    if frame0.shape != video.frames.shape[1:]:
        raise ShapeMismatchError("replacement frame shape differs")
    frames = np.concatenate([frame0[None].astype(np.uint8), video.frames[1:]])
    return Video(frames=frames, gt_boxes=video.gt_boxes,
                 interval=video.interval, video_id=video.video_id)


def apply_delta(frame: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Add a real-valued delta to a frame: clamp to [0, 255], then quantize.

    Trackers only ever see the quantized result; the attack keeps the
    real-valued delta as its internal state.
    """
    if frame.shape != delta.shape:
        raise ShapeMismatchError(f"{frame.shape} vs {delta.shape}")
    out = np.clip(frame.astype(np.float64) + delta, 0.0, 255.0)
    return np.rint(out).astype(np.uint8)


def linf_distance(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{a.shape} vs {b.shape}")
    return float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))))


def linf_norm(delta: np.ndarray) -> float:
    if delta.size == 0:
        return 0.0
    return float(np.max(np.abs(delta)))


# Standard reference SSIM constants: 11x11 Gaussian window (sigma 1.5),
# stabilizers scaled for 8-bit dynamic range.
_SSIM_SIGMA = 1.5
_SSIM_RADIUS = 5
_SSIM_C1 = (0.01 * 255.0) ** 2
_SSIM_C2 = (0.03 * 255.0) ** 2


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local structural similarity over 11x11 Gaussian windows.

    Computed per channel, averaged across channels; window borders are
    excluded from the mean. Result lies in [-1, 1], with 1 for identical
    frames.
    """
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{a.shape} vs {b.shape}")
    h, w = a.shape[:2]
    win = 2 * _SSIM_RADIUS + 1
    if h < win or w < win:
        raise FrameTooSmallError(f"frame {h}x{w} smaller than {win}x{win} window")
    af = a.astype(np.float64)
    bf = b.astype(np.float64)
    if af.ndim == 2:
        af = af[..., None]
        bf = bf[..., None]
    vals = []
    for c in range(af.shape[2]):
        vals.append(_ssim_channel(af[..., c], bf[..., c]))
    return float(np.mean(vals))


def _ssim_channel(x: np.ndarray, y: np.ndarray) -> float:
    blur = lambda im: gaussian_filter(im, _SSIM_SIGMA, truncate=3.5, mode="reflect")
    mx = blur(x)
    my = blur(y)
    mxx = blur(x * x)
    myy = blur(y * y)
    mxy = blur(x * y)
    vx = mxx - mx * mx
    vy = myy - my * my
    cxy = mxy - mx * my
    num = (2.0 * mx * my + _SSIM_C1) * (2.0 * cxy + _SSIM_C2)
    den = (mx * mx + my * my + _SSIM_C1) * (vx + vy + _SSIM_C2)
    smap = num / den
    r = _SSIM_RADIUS
    return float(np.mean(smap[r:-r, r:-r]))
