"""Visualize the two-crop geometry for one click.

Saves a PNG showing the target crop (the segmentor's view, grown from the
previous mask and the click) and the focus crop (the refiner's zoom-in on the
changed region), over the image and mask.
"""
from pathlib import Path

import numpy as np

from clickcrop import Click, OracleBackend, Session
from clickcrop.synthetic import random_scene

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

image, gt = random_scene(np.random.default_rng(17), kind="blob")

# start from an imperfect mask (a hole) so both crops have something to do:
# the target crop hugs the object, the focus crop zooms into the hole
ys, xs = np.nonzero(gt)
cy, cx = int(ys.mean()), int(xs.mean())
holey = gt.copy()
holey[cy - 6 : cy + 6, cx - 6 : cx + 6] = False

session = Session(image, initial_mask=holey, backend=OracleBackend(gt))
result = session.add_click(cx, cy, True)

print("target crop:", result.target_spec.to_json())
print("focus crop: ", result.focus_spec.to_json())
print("fallback used:", result.used_fallback)

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Rectangle

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(image)
    ax.imshow(np.where(session.mask, 1.0, np.nan), alpha=0.4, cmap="spring")
    for spec, color, label in (
        (result.target_spec, "yellow", "target crop"),
        (result.focus_spec, "red", "focus crop"),
    ):
        b = spec.box
        ax.add_patch(Rectangle((b.x0, b.y0), b.width, b.height, fill=False, color=color, lw=2, label=label))
    ax.legend(loc="lower right")
    ax.set_axis_off()
    path = OUT / "crop_geometry.png"
    fig.savefig(path, bbox_inches="tight", dpi=110)
    print(f"wrote {path}")
except ImportError:
    print("matplotlib not installed; skipped the figure")
