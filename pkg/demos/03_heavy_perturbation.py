"""Stage (a): the momentum walk that manufactures heavy candidates.

Each outer iteration probes a handful of random directions around the
running adversarial frame, keeps whichever lowers the trade-off, and steps
by epsilon/k along the sign of the momentum direction. Watch the recorded
trade-off fall as the walk finds a drift state.
"""

import numpy as np

from advtrack.corpus import generate_synthetic_video
from advtrack.generators import MomentumConfig, momentum_generate
from advtrack.metrics import EvalParams
from advtrack.trackers import NccConfig, NccTracker

video = generate_synthetic_video(seed=3, n_frames=30)
tracker = NccTracker(NccConfig(search_radius=16))
cfg = MomentumConfig(epsilon=64.0, candidates=6, iterations=24)

candidates = momentum_generate(tracker, video, cfg,
                               np.random.default_rng(0), EvalParams())

print(f"queries spent: {candidates.queries_spent} "
      f"(1 baseline + iterations x {cfg.candidates} probes)")
print(f"candidates kept: {len(candidates.entries)}")
print("\niter  |delta|_inf  best trade-off so far")
for c in candidates.entries:
    print(f"{c.order:4d}  {c.linf:10.2f}  {c.tp:.4f}")

best = min(candidates.entries, key=lambda c: c.tp)
print(f"\nbest candidate: iteration {best.order}, trade-off {best.tp:.4f}, "
      f"|delta|_inf {best.linf:.1f}")
