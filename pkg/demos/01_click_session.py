"""Walk through one interactive session, click by click.

A synthetic scene stands in for a real photo, and the oracle backend stands
in for a trained model, so the whole local pipeline (target crop -> coarse
mask -> focus crop -> refinement -> merge) runs without any weights. Each
simulated click lands at the center of the current worst error region.
"""
import numpy as np

from clickcrop import OracleBackend, Session, iou
from clickcrop.harness import simulate_next_click
from clickcrop.synthetic import random_scene

image, gt = random_scene(np.random.default_rng(6), kind="polygon")
print(f"scene: {image.shape[1]}x{image.shape[0]}, object {int(gt.sum())} px")

session = Session(image, backend=OracleBackend(gt), series="s2")
for k in range(1, 6):
    score = iou(session.mask, gt)
    if score >= 0.999:
        print(f"converged after {k - 1} clicks")
        break
    click = simulate_next_click(session.mask, gt)
    result = session.add_click(click.x, click.y, click.is_positive)
    polarity = "positive" if click.is_positive else "negative"
    print(
        f"click {k}: {polarity} at ({click.x}, {click.y})  "
        f"IOU {iou(session.mask, gt):.4f}  "
        f"target crop {result.target_spec.box.area / (gt.size):.2%} of image, "
        f"focus crop {result.focus_spec.box.area / (gt.size):.2%}"
    )

print("\naudit trail (one JSON record per click):")
for rec in session.audit:
    print(f"  #{rec['ordinal']} {rec['polarity']:8s} segment {rec['timings_ms']['segment']:.1f} ms, "
          f"refine {rec['timings_ms']['refine']:.1f} ms")
