"""Stage (b): zeroing unimportant patches of a heavy perturbation.

The perturbation is split into a P x P grid; a greedy policy removes one
cell per step. Removals that keep the attack intact earn the trade-off
reward; a removal that lets tracking recover past the ratio bounds ends
the episode and the previous mask wins.
"""

import numpy as np

from advtrack.corpus import generate_synthetic_video
from advtrack.generators import MomentumConfig, momentum_generate
from advtrack.metrics import EvalParams, track_scores
from advtrack.patchsel import TerminalParams, select_mask
from advtrack.policynet import fresh_policy
from advtrack.trackers import NccConfig, NccTracker
from advtrack.video import apply_delta, linf_norm, with_frame0

ev = EvalParams()
video = generate_synthetic_video(seed=3, n_frames=30)
tracker = NccTracker(NccConfig(search_radius=16))

pool = momentum_generate(tracker, video, MomentumConfig(epsilon=64, candidates=6, iterations=24),
                         np.random.default_rng(0), ev)
cand = min(pool.entries, key=lambda c: c.tp)

# exact baseline of the unmasked perturbation
res = tracker.track(with_frame0(video, apply_delta(video.frame0, cand.delta)),
                    video.gt_boxes[0])
baseline = track_scores(res, video.gt_boxes, ev)
print(f"candidate: trade-off {cand.tp:.3f}, baseline A={baseline[0]:.3f} "
      f"R={baseline[1]:.1f}")

net = fresh_policy(grid_size=4, seed=0)
state, trace, queries = select_mask(tracker, video, cand.delta, net,
                                    TerminalParams(), ev, baseline,
                                    video.gt_boxes)
print(f"\ngreedy episode: {len(trace)} steps, {queries} queries")
for step in trace:
    print(f"  action {step['action']:2d}  reward {step['reward']:6.3f}"
          f"  terminal {step['terminal']}")
print(f"\nfinal mask keeps {state.mask.live_cells}/16 cells")
print(f"masked |delta|_inf: {linf_norm(state.delta * state.mask.upsample(96, 96)[..., None]):.1f}")
print("mask grid (1 = kept):")
print(state.mask.cells)
