"""Stage (c): compressing perturbation magnitude along a direction.

For a unit direction, g is the smallest magnitude that is still
adversarial; it is found by bracketing plus bisection, and the direction
descends along a sign-compared Gaussian gradient estimate. Here the
"tracker" is a scripted stub whose decision boundary sits at exactly 37
intensity units, so the numbers are easy to follow.
"""

import numpy as np

from advtrack.metrics import EvalParams, TrackResult, track_scores
from advtrack.signattack import SignOptConfig, binary_search_g, sign_opt_run
from advtrack.trackers import Tracker
from advtrack.video import BBox, Video

# plain step-function boundary for the bracket search
calls = []

def predicate(unit_phi, lam):
    calls.append(lam)
    return lam >= 37.0, None

g, queries, _ = binary_search_g(predicate, np.ones((4, 4, 3)), hint=5.0,
                                lambda_max=192.0, tolerance=0.5)
print(f"scripted boundary at 37.0 -> g = {g:.3f} in {queries} queries")
print(f"probe magnitudes: {[round(c, 2) for c in calls]}")

# full descent against a hard-label stub tracker: it loses the target from
# frame 1 on whenever the frame-0 corruption magnitude reaches 37
frames = np.full((6, 40, 40, 3), 90, dtype=np.uint8)
frames[:, 2:10, 2:10] = 200
gt = tuple(BBox(2, 2, 8, 8) for _ in range(6))
video = Video(frames=frames, gt_boxes=gt)


class ThresholdTracker(Tracker):
    name = "threshold-stub"

    def _track(self, v, init_box):
        mag = np.abs(v.frames[0].astype(np.float64)
                     - video.frames[0].astype(np.float64)).max()
        if mag >= 37.0:
            boxes = (gt[0],) + tuple(BBox(0, 0, 0, 0) for _ in range(5))
        else:
            boxes = gt
        return TrackResult(boxes=boxes, scores=(1.0,) * 6)


tracker = ThresholdTracker()
clean = track_scores(TrackResult(boxes=gt, scores=(1.0,) * 6), gt,
                     EvalParams())
cfg = SignOptConfig(probes=4, iterations=5, bs_tolerance=0.5)
res = sign_opt_run(tracker, video, np.full((40, 40, 3), 55.0), cfg,
                   EvalParams(), clean, gt, epsilon=64.0,
                   rng=np.random.default_rng(0))
print(f"\ndescent: g per iteration  {[round(g, 2) for g in res.trace.g_values]}")
print(f"         best-so-far      {[round(g, 2) for g in res.trace.best_g]}")
print(f"final |delta|_inf = {res.g_best:.2f} "
      f"(queries: {res.trace.queries_search} search + "
      f"{res.trace.queries_probe} probe + {res.trace.queries_verify} verify)")
