"""Spectral-residual saliency and the donor-texture candidate channel.

Saliency marks the visually informative regions of a donor frame; a
texture candidate imports the donor-vs-victim pixel difference only where
the donor is salient, clamped into the epsilon ball.
"""

import numpy as np

from advtrack.corpus import generate_corpus
from advtrack.generators import MomentumConfig, texture_candidates
from advtrack.saliency import spectral_residual_saliency
from advtrack.video import linf_norm

videos = generate_corpus(seed=11, n_videos=4, n_frames=8)
victim, donors = videos[0], videos[1:]

for v in videos:
    s = spectral_residual_saliency(v.frame0)
    ys, xs = np.nonzero(s.mask)
    where = f"rows {ys.min()}-{ys.max()}, cols {xs.min()}-{xs.max()}" if len(ys) else "-"
    print(f"{v.video_id}: salient fraction {s.mask.mean():.3f}  ({where})")

print("\nimpulse sanity check:")
imp = np.zeros((64, 64, 3), dtype=np.uint8)
imp[20, 31] = 255
s = spectral_residual_saliency(imp)
print(f"  mask covers the impulse: {bool(s.mask[20, 31])}")

cands = texture_candidates(victim, donors, MomentumConfig(epsilon=64.0),
                           np.random.default_rng(1), count=3)
print("\ntexture candidates (unscored until the pipeline ranks them):")
for c in cands.entries:
    nz = float(np.mean(np.any(c.delta != 0, axis=2)))
    print(f"  donor #{c.order}: |delta|_inf {linf_norm(c.delta):5.1f}, "
          f"support {100 * nz:.1f}% of pixels")
