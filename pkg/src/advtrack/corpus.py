"""Seeded synthetic tracking corpus for desk-scale verification.

Each video shows a textured patch leading a convoy of near-copies that
move together over a smooth background with a few static look-alike
distractors. A template matcher locks onto the clean head patch exactly
(the pasted pixels repeat bit for bit). Under first-frame corruption the
failure ladder is graded: mild noise slips the correlation lock one
convoy step back (a persistent overlapping offset, low IoU, no lost
frames), heavier noise slips further down the convoy, and drastic noise
hands the race to static distractors or background (lost frames). Both
attack flavours are reachable and the ladder gives the query-based
optimizers a usable gradient.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.ndimage import gaussian_filter

from advtrack.video import BBox, Video, write_video


class CorpusError(Exception):
    pass


def _rng(seed, *key) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([int(seed)] + [int(k) for k in key]))


def _smooth_texture(rng, shape, sigma, scale, base):
    noise = rng.standard_normal(shape)
    tex = gaussian_filter(noise, sigma=(sigma, sigma, 0), mode="wrap")
    tex = tex / max(tex.std(), 1e-9) * scale + base
    return np.clip(tex, 0, 255).astype(np.uint8)


# Companion placement: grazing diagonal offsets. Each twin's box overlaps
# the head box by only a corner sliver, so the head occludes almost none
# of it; a slipped lock tracks the twin with low but nonzero IoU.
COMPANION_OFFSETS = ((12, 12), (-12, -12), (12, -9), (-12, 9),
                     (9, -12), (-9, 12))


def generate_synthetic_video(seed: int, n_frames: int, size=(96, 96),
                             motion: str = "linear", target_size: int = 16,
                             start=None, velocity=None,
                             companion_offsets=COMPANION_OFFSETS,
                             companion_noise: float = 1.0,
                             n_distractors: int = 4,
                             n_hot_distractors: int = 2,
                             target_contrast: float = 7.0,
                             target_smoothness: float = 1.2,
                             distractor_noise: float = 10.0,
                             hot_distractor_noise: float = 1.5,
                             background_contrast: float = 3.5,
                             interval: int = 30) -> Video:
    """Deterministic convoy video with exact head-patch ground truth.

    ``motion`` is ``linear`` (constant velocity, reflecting at borders) or
    ``random-walk`` (seeded per-frame steps). ``start`` and ``velocity``
    override the seeded defaults; box positions are integer pixels. Static
    distractors never intersect the convoy's swept region, so the clean
    rendered appearance of the head repeats exactly in every frame.
    """
    if n_frames < 1:
        raise CorpusError("need at least one frame")
    h, w = size
    ts = target_size
    if ts > h or ts > w:
        raise CorpusError(f"target {ts}px does not fit a {h}x{w} frame")
    rng = _rng(seed, 0xC0)

    target = _smooth_texture(rng, (ts, ts, 3), sigma=target_smoothness,
                             scale=target_contrast, base=128.0)
    companions = [
        np.clip(target.astype(np.float64)
                + rng.normal(0.0, companion_noise, size=target.shape),
                0, 255).astype(np.uint8)
        for _ in companion_offsets
    ]
    background = _smooth_texture(rng, (h, w, 3), sigma=3.0,
                                 scale=background_contrast, base=100.0)

    off_x = [o[0] for o in companion_offsets] + [0]
    off_y = [o[1] for o in companion_offsets] + [0]
    pad_l, pad_r = -min(off_x), max(off_x)
    pad_t, pad_b = -min(off_y), max(off_y)
    train_w = ts + pad_l + pad_r
    train_h = ts + pad_t + pad_b
    if train_w > w or train_h > h:
        raise CorpusError("convoy does not fit the frame")

    if start is None:
        start = (pad_l + int(rng.integers(0, w - train_w + 1)),
                 pad_t + int(rng.integers(0, h - train_h + 1)))
    if velocity is None:
        choices = [-3, -2, -1, 1, 2, 3]
        velocity = (int(rng.choice(choices)), int(rng.choice(choices)))

    positions = _positions(rng, motion, start, velocity, n_frames,
                           (w - ts - pad_r, h - ts - pad_b),
                           lower=(pad_l, pad_t))

    # Swept region of the convoy, for distractor rejection sampling.
    xs = [p[0] for p in positions]
    ys = [p[1] for p in positions]
    sweep = (min(xs) - pad_l, min(ys) - pad_t,
             max(xs) + ts + pad_r, max(ys) + ts + pad_b)

    def _overlaps_sweep(dx, dy):
        return (dx + ts > sweep[0] and dx < sweep[2]
                and dy + ts > sweep[1] and dy < sweep[3])

    placed = 0
    for _ in range(50 * n_distractors):
        if placed >= n_distractors:
            break
        dx = int(rng.integers(0, w - ts + 1))
        dy = int(rng.integers(0, h - ts + 1))
        if _overlaps_sweep(dx, dy):
            continue
        patch = np.clip(target.astype(np.float64)
                        + rng.normal(0.0, distractor_noise, size=target.shape),
                        0, 255).astype(np.uint8)
        background[dy:dy + ts, dx:dx + ts] = patch
        placed += 1
    # Hot distractors hug the early path segment so they enter the search
    # window in the first frames: the corpus' genuine lose-the-target
    # failure mode under heavy corruption costs most of the video.
    exs = xs[:min(10, len(xs))]
    eys = ys[:min(10, len(ys))]
    early = (min(exs) - pad_l, min(eys) - pad_t,
             max(exs) + ts + pad_r, max(eys) + ts + pad_b)
    placed = 0
    for _ in range(200 * n_hot_distractors):
        if placed >= n_hot_distractors:
            break
        dx = int(rng.integers(max(0, early[0] - ts - 3),
                              min(w - ts, early[2] + 3) + 1))
        dy = int(rng.integers(max(0, early[1] - ts - 3),
                              min(h - ts, early[3] + 3) + 1))
        if _overlaps_sweep(dx, dy):
            continue
        patch = np.clip(target.astype(np.float64)
                        + rng.normal(0.0, hot_distractor_noise,
                                     size=target.shape),
                        0, 255).astype(np.uint8)
        background[dy:dy + ts, dx:dx + ts] = patch
        placed += 1

    frames = np.empty((n_frames, h, w, 3), dtype=np.uint8)
    boxes = []
    for i, (x, y) in enumerate(positions):
        frame = background.copy()
        # paint companions first so the head patch stays fully visible
        for patch, (ox, oy) in zip(companions, companion_offsets):
            cx, cy = x + ox, y + oy
            frame[cy:cy + ts, cx:cx + ts] = patch
        frame[y:y + ts, x:x + ts] = target
        frames[i] = frame
        boxes.append(BBox(x, y, ts, ts))
    return Video(frames=frames, gt_boxes=tuple(boxes), interval=interval,
                 video_id=f"synthetic-{seed:05d}")


def _positions(rng, motion, start, velocity, n_frames, limits, lower=(0, 0)):
    xmax, ymax = limits
    xmin, ymin = lower
    x, y = start
    if not (xmin <= x <= xmax and ymin <= y <= ymax):
        raise CorpusError(f"start {start} outside valid region")
    out = [(int(x), int(y))]
    vx, vy = velocity
    for _ in range(n_frames - 1):
        if motion == "linear":
            x, vx = _reflect(x + vx, vx, xmin, xmax)
            y, vy = _reflect(y + vy, vy, ymin, ymax)
        elif motion == "random-walk":
            x = int(np.clip(x + rng.integers(-3, 4), xmin, xmax))
            y = int(np.clip(y + rng.integers(-3, 4), ymin, ymax))
        else:
            raise CorpusError(f"unknown motion {motion!r}")
        out.append((int(x), int(y)))
    return out


def _reflect(pos, vel, lo, hi):
    if pos < lo:
        return 2 * lo - pos, -vel
    if pos > hi:
        return 2 * hi - pos, -vel
    return pos, vel


def generate_corpus(seed: int, n_videos: int, n_frames: int, **kwargs
                    ) -> list[Video]:
    videos = []
    for i in range(n_videos):
        v = generate_synthetic_video(seed=seed * 1000 + i, n_frames=n_frames,
                                     **kwargs)
        videos.append(Video(frames=v.frames, gt_boxes=v.gt_boxes,
                            interval=v.interval, video_id=f"video-{i:03d}"))
    return videos


def write_corpus(videos, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for v in videos:
        write_video(v, os.path.join(directory, v.video_id))


def load_corpus(directory: str, interval: int = 30):
    from advtrack.video import load_video

    names = sorted(
        d for d in os.listdir(directory)
        if os.path.isdir(os.path.join(directory, d)))
    videos = []
    for name in names:
        vdir = os.path.join(directory, name)
        ann = os.path.join(vdir, "groundtruth.txt")
        videos.append(load_video(vdir, ann if os.path.exists(ann) else None,
                                 interval=interval))
    return videos
