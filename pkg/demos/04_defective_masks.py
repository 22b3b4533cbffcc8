"""Generate benchmark-style defective initial masks for one scene.

Each mask starts perfect, then loses/gains whole superpixels (boundary flips,
external false positives, internal holes at 65/25/10 percent) until its IOU
falls into [0.75, 0.85). Same seed, same mask, byte for byte.
"""
from pathlib import Path

import numpy as np

from clickcrop import DefectConfig, iou, simulate_defective_mask
from clickcrop.synthetic import random_scene

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

image, gt = random_scene(np.random.default_rng(23), kind="blob")
cfg = DefectConfig()
cache = {}  # superpixels are deterministic per (image, cluster count); share them

masks = []
for seed in range(4):
    mask, info = simulate_defective_mask(image, gt, cfg, rng=np.random.default_rng(seed), slic_cache=cache)
    masks.append(mask)
    print(
        f"seed {seed}: IOU {info['iou']:.4f} after {info['attempts']} attempts, "
        f"defects {info['defect_types']}"
    )
    assert 0.75 <= iou(mask, gt) < 0.85

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 5, figsize=(16, 4))
    axes[0].imshow(gt, cmap="gray")
    axes[0].set_title("ground truth")
    for i, (ax, m) in enumerate(zip(axes[1:], masks)):
        ax.imshow(m, cmap="gray")
        ax.set_title(f"seed {i}: IOU {iou(m, gt):.3f}")
    for ax in axes:
        ax.set_axis_off()
    path = OUT / "defective_masks.png"
    fig.savefig(path, bbox_inches="tight", dpi=100)
    print(f"wrote {path}")
except ImportError:
    print("matplotlib not installed; skipped the figure")
