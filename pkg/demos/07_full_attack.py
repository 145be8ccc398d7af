"""The whole pipeline on two corpus videos, with a readable report dump.

Clean baseline -> heavy candidates -> rank -> per-candidate patch
selection and (when the masked form is still boundary-adversarial) sign
compression -> final ranking by (trade-off, L-inf).
"""

from advtrack.config import build_config
from advtrack.corpus import generate_corpus
from advtrack.pipeline import run_corpus
from advtrack.trackers import NccConfig, NccTracker

config = build_config({
    "iterations": 24, "candidates": 6, "pool_size": 12, "n_candidates": 6,
    "grid_size": 4, "probes": 3, "attack_iterations": 2, "bs_tolerance": 8.0,
    "finetune_episodes": 1, "search_radius": 16, "seed": 2026,
})

videos = generate_corpus(seed=101, n_videos=2, n_frames=30)
reports = run_corpus(videos, config,
                     tracker=NccTracker(NccConfig(search_radius=16)))

for r in reports:
    print(f"=== {r.video_id} ===")
    print(f"  attack failed: {r.attack_failed}")
    print(f"  clean: A={r.clean.accuracy:.3f} R={r.clean.robustness:.1f} "
          f"AUC={r.clean.success_auc:.3f} P20={r.clean.precision_at_20:.3f}")
    print(f"  adv:   A={r.adversarial.accuracy:.3f} "
          f"R={r.adversarial.robustness:.1f} "
          f"AUC={r.adversarial.success_auc:.3f} "
          f"P20={r.adversarial.precision_at_20:.3f}")
    print(f"  trade-off {r.tp_final:.3f}, |delta|_inf {r.linf_final:.1f}, "
          f"ssim {r.ssim_final:.4f}")
    print(f"  queries: {r.queries}")
    print(f"  candidates: {len(r.traces['candidates'])} processed, "
          f"momentum trade-off trace {[round(t, 3) for t in r.traces['momentum_tp'][-5:]]}")
