"""Hard-label tracker backends with exact query accounting.

A "query" is one whole-video evaluation: the backend receives every frame
plus the frame-0 box and returns per-frame boxes and confidence scores. The
built-in reference backend is a fixed-template zero-normalized
cross-correlation tracker; a remote backend speaks a newline-delimited JSON
protocol so external trackers can be attacked unchanged.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import socket
import threading
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from advtrack.metrics import TrackResult
from advtrack.video import BBox, Video, write_frame


class TrackerError(Exception):
    pass


class OutOfBoundsError(TrackerError):
    pass


class TemplateTooLargeError(TrackerError):
    pass


class ProtocolError(TrackerError):
    pass


def _iround(v: float) -> int:
    # floor(v + 0.5): identical rounding on every implementation of the
    # reference tracker, regardless of the host language's round().
    return int(math.floor(v + 0.5))


class Tracker:
    """Base backend: validates inputs, counts queries, delegates tracking."""

    name = "tracker"
    parallel = False

    def __init__(self):
        self._lock = threading.Lock()
        self._queries = 0

    @property
    def query_count(self) -> int:
        with self._lock:
            return self._queries

    def track(self, video: Video, init_box: BBox) -> TrackResult:
        x, y, w, h = init_box.as_tuple()
        if w < 1 or h < 1:
            raise OutOfBoundsError("init box must have positive size")
        if x < 0 or y < 0 or x + w > video.width or y + h > video.height:
            raise OutOfBoundsError(
                f"init box {init_box.as_tuple()} outside "
                f"{video.width}x{video.height} frame")
        with self._lock:
            self._queries += 1
        return self._track(video, init_box)

    def _track(self, video: Video, init_box: BBox) -> TrackResult:
        raise NotImplementedError


@dataclass(frozen=True)
class NccConfig:
    search_radius: int = 32

    def __post_init__(self):
        if self.search_radius < 1:
            raise TrackerError("search radius must be >= 1")


def ncc_locate(template: np.ndarray, frame: np.ndarray, prev_box: BBox,
               radius: int) -> tuple[BBox, float]:
    """Best ZNCC match of the template within ``radius`` of the previous box.

    All integer placements whose offset from the previous top-left is at
    most ``radius`` (clamped into the frame) are scored; ties go to the
    smallest offset in row-major scan order. A constant template correlates
    with nothing: score 0, box unchanged.
    """
    th, tw = template.shape[:2]
    fh, fw = frame.shape[:2]
    if th > fh or tw > fw:
        raise TemplateTooLargeError(f"template {th}x{tw} in frame {fh}x{fw}")
    t = template.astype(np.float64)
    t0 = t - t.mean()
    tnorm = float(np.sqrt(np.sum(t0 * t0)))
    px = min(max(_iround(prev_box.x), 0), fw - tw)
    py = min(max(_iround(prev_box.y), 0), fh - th)
    if tnorm == 0.0:
        return BBox(px, py, tw, th), 0.0
    x_lo = min(max(px - radius, 0), fw - tw)
    x_hi = max(min(px + radius, fw - tw), x_lo)
    y_lo = min(max(py - radius, 0), fh - th)
    y_hi = max(min(py + radius, fh - th), y_lo)
    region = frame[y_lo:y_hi + th, x_lo:x_hi + tw].astype(np.float64)
    wins = sliding_window_view(region, (th, tw), axis=(0, 1))
    wmean = wins.mean(axis=(2, 3, 4), keepdims=True)
    w0 = wins - wmean
    num = np.einsum("yxcij,ijc->yx", w0, t0, optimize=True)
    wnorm = np.sqrt(np.einsum("yxcij,yxcij->yx", w0, w0, optimize=True))
    den = wnorm * tnorm
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(den > 0.0, num / den, 0.0)
    flat = int(np.argmax(corr))
    by, bx = divmod(flat, corr.shape[1])
    return BBox(x_lo + bx, y_lo + by, tw, th), float(corr[by, bx])


class NccTracker(Tracker):
    """Fixed-template ZNCC tracker; the frame-0 crop is never updated.

    Deliberately simple: the entire model lives in the initial frame, which
    is exactly the surface a first-frame attack manipulates.
    """

    name = "reference-ncc"
    parallel = True

    def __init__(self, config: NccConfig | None = None):
        super().__init__()
        self.config = config or NccConfig()

    def _track(self, video: Video, init_box: BBox) -> TrackResult:
        ix = _iround(init_box.x)
        iy = _iround(init_box.y)
        tw = _iround(init_box.w)
        th = _iround(init_box.h)
        template = video.frames[0][iy:iy + th, ix:ix + tw]
        boxes = [init_box]
        scores = [1.0]
        prev = BBox(ix, iy, tw, th)
        for i in range(1, video.n_frames):
            prev, score = ncc_locate(template, video.frames[i], prev,
                                     self.config.search_radius)
            boxes.append(prev)
            scores.append(score)
        return TrackResult(boxes=tuple(boxes), scores=tuple(scores))


class RemoteTracker(Tracker):
    """Client for a tracker served over the newline-delimited JSON protocol.

    Frames travel by shared filesystem: before each query the current video
    is written as ``%08d.png`` into a scratch directory (unchanged trailing
    frames are written once and reused). Any protocol violation aborts the
    whole attack run; partial results would corrupt query accounting.
    """

    def __init__(self, address: str, workdir: str, timeout: float = 60.0):
        super().__init__()
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise ProtocolError(f"bad address {address!r}, want HOST:PORT")
        self._frames_dir = os.path.join(os.path.abspath(workdir), "frames")
        os.makedirs(self._frames_dir, exist_ok=True)
        self._tail_key = None
        self._sock = socket.create_connection((host, int(port)), timeout=timeout)
        self._fh = self._sock.makefile("rwb")
        hello = self._request({"cmd": "hello"})
        if hello.get("proto") != 1:
            raise ProtocolError(f"unsupported protocol reply: {hello}")
        self.name = str(hello.get("name", "remote"))
        self.parallel = bool(hello.get("parallel", False))

    def close(self):
        try:
            self._request({"cmd": "shutdown"})
        except (OSError, ProtocolError):
            pass
        try:
            self._sock.close()
        except OSError:
            pass

    def _request(self, payload: dict) -> dict:
        try:
            self._fh.write(json.dumps(payload).encode() + b"\n")
            self._fh.flush()
            line = self._fh.readline()
        except OSError as exc:
            raise ProtocolError(f"transport failure: {exc}") from exc
        if not line:
            raise ProtocolError("connection closed by tracker")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad reply line: {line!r}") from exc
        if "error" in reply:
            raise ProtocolError(f"tracker error: {reply['error']}")
        return reply

    def _write_frames(self, video: Video) -> None:
        tail = video.frames[1:]
        key = (video.n_frames, hashlib.sha1(tail.tobytes()).hexdigest())
        if key != self._tail_key:
            for i in range(1, video.n_frames):
                write_frame(video.frames[i],
                            os.path.join(self._frames_dir, f"{i:08d}.png"))
            self._tail_key = key
        write_frame(video.frames[0], os.path.join(self._frames_dir, "00000000.png"))

    def _track(self, video: Video, init_box: BBox) -> TrackResult:
        self._write_frames(video)
        reply = self._request({
            "cmd": "track",
            "frames_dir": self._frames_dir,
            "num_frames": video.n_frames,
            "init_box": list(init_box.as_tuple()),
        })
        boxes = reply.get("boxes")
        scores = reply.get("scores")
        if (not isinstance(boxes, list) or not isinstance(scores, list)
                or len(boxes) != video.n_frames or len(scores) != video.n_frames):
            raise ProtocolError(f"malformed track reply: {reply}")
        return TrackResult(
            boxes=tuple(BBox(*[float(v) for v in b]) for b in boxes),
            scores=tuple(float(s) for s in scores),
        )
