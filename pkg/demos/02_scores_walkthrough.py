"""The scalar measures that drive every attack decision, by hand.

Two discounted whole-video scores (accuracy A, robustness R) feed two
trade-offs: TP ranks heavy perturbations (lower = stronger attack) and AR
is compared against the kappa threshold to decide whether a perturbation
still counts as adversarial.
"""

from advtrack.metrics import (
    EvalParams,
    accuracy,
    ar_score,
    iou,
    kappa_threshold,
    robustness,
    tp_score,
)
from advtrack.video import BBox

p = EvalParams()  # gamma_a = gamma_r = 0.9, interval 30, iota = gamma = 0.4

print("IoU of (0,0,10,10) vs (5,5,10,10):", iou(BBox(0, 0, 10, 10), BBox(5, 5, 10, 10)))
print("      (intersection 25 over union 175)")

ious = [1.0, 0.8, 0.0, 0.5]
print(f"\nious = {ious}")
print(f"A = {accuracy(ious, p):.4f}   (discounted mean over overlapping frames)")
print(f"R = {robustness(ious, p):.4f}   (discounted count of overlapping frames)")

print("\ntrade-off TP (lower = stronger attack):")
print(f"  unperturbed baseline:      {tp_score(0.8, 10, 0.8, 10, p.iota):.3f}")
print(f"  accuracy halved, R intact: {tp_score(0.8, 10, 0.4, 10, p.iota):.3f}")
print(f"  target fully lost:         {tp_score(0.8, 10, 0.02, 1, p.iota):.3f}"
      "   <- losing frames RAISES the score")

kappa = kappa_threshold(p.gamma, 1.5, 0.4)
print(f"\nkappa threshold at defaults: {kappa:.2f}")
print("boundary trade-off AR vs clean baseline (A=1.0, R=30):")
for name, a, r in [("clean", 1.0, 30.0), ("drift", 0.2, 30.0),
                   ("collapse", 0.05, 4.0)]:
    print(f"  {name:9s} AR = {ar_score(1.0, 30.0, a, r, p.gamma):8.3f}"
          f"   adversarial: {ar_score(1.0, 30.0, a, r, p.gamma) >= kappa}")
