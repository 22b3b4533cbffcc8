"""Crop geometry: target/focus crop selection, crop-resize, RoIAlign, and exact paste-back.

Boxes are kept in continuous coordinates until extraction; extraction widens
to the enclosing integer box (floor min edge, ceil max edge) so mask pixels
are never cropped away.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .raster import BBox, Click, bbox_of, component_containing, connected_components, resize, xor_diff

TARGET_EXPAND_RATIO = 1.4
FOCUS_EXPAND_RATIO = 1.4
FALLBACK_WINDOW_FRACTION = 0.3
MIN_BOX_SIDE = 16.0


@dataclass(frozen=True)
class ModelSeries:
    """Input resolutions for one deployment tier of the two-stage model."""

    name: str
    segmentor_input: int
    refiner_input: int


SERIES = {
    "s1": ModelSeries("s1", segmentor_input=128, refiner_input=256),
    "s2": ModelSeries("s2", segmentor_input=256, refiner_input=256),
}


def get_series(name: str) -> ModelSeries:
    key = name.lower()
    if key not in SERIES:
        raise ValueError(f"unknown series {name!r}; expected one of {sorted(SERIES)}")
    return SERIES[key]


@dataclass(frozen=True)
class CropSpec:
    """Source rectangle plus target resolution; carries exact paste-back geometry."""

    box: BBox
    out_w: int
    out_h: int
    ratio: float = 1.0

    def to_json(self) -> dict:
        return {"box": self.box.to_json(), "out": [self.out_w, self.out_h], "ratio": self.ratio}


def expand_box(box: BBox, ratio: float, bounds: BBox) -> BBox:
    """Scale width/height about the center by `ratio`, then clamp to bounds."""
    if ratio < 1.0:
        raise ValueError(f"expand ratio must be >= 1, got {ratio}")
    cx, cy = box.center
    hw = 0.5 * box.width * ratio
    hh = 0.5 * box.height * ratio
    return BBox(cx - hw, cy - hh, cx + hw, cy + hh).clamp(bounds)


def _pad_to_min_side(box: BBox, bounds: BBox, min_side: float = MIN_BOX_SIDE) -> BBox:
    cx, cy = box.center
    hw = max(box.width, min(min_side, bounds.width)) / 2.0
    hh = max(box.height, min(min_side, bounds.height)) / 2.0
    return BBox(cx - hw, cy - hh, cx + hw, cy + hh).clamp(bounds)


def target_crop(
    prev_mask: np.ndarray,
    click: Click,
    series: ModelSeries,
    ratio: float = TARGET_EXPAND_RATIO,
    first_click: bool = False,
) -> CropSpec:
    """Crop for the coarse segmentor: box of (previous mask + new click), expanded.

    The very first click of a from-scratch session sees the entire image.
    """
    h, w = prev_mask.shape
    bounds = BBox.full(w, h)
    mask_box = bbox_of(prev_mask)
    if mask_box is None and first_click:
        box = bounds
    else:
        click_box = BBox(float(click.x), float(click.y), float(click.x + 1), float(click.y + 1))
        if mask_box is None:
            box = click_box
        else:
            box = BBox(
                min(mask_box.x0, click_box.x0),
                min(mask_box.y0, click_box.y0),
                max(mask_box.x1, click_box.x1),
                max(mask_box.y1, click_box.y1),
            )
        box = expand_box(box, ratio, bounds)
        box = _pad_to_min_side(box, bounds)
    return CropSpec(box, series.segmentor_input, series.segmentor_input, ratio)


def focus_crop(
    coarse_pred: np.ndarray,
    prev_mask: np.ndarray,
    click: Click,
    series: ModelSeries,
    ratio: float = FOCUS_EXPAND_RATIO,
) -> CropSpec | None:
    """Crop for the refiner: the changed region the click points at.

    Returns None when the click does not hit any changed component (empty
    difference, or a click on pixels the coarse pass left untouched); callers
    fall back to `fallback_crop`.
    """
    diff = xor_diff(coarse_pred, prev_mask)
    labels, n = connected_components(diff, connectivity=8)
    if n == 0:
        return None
    comp = component_containing(labels, click.x, click.y)
    if comp is None:
        return None
    h, w = prev_mask.shape
    bounds = BBox.full(w, h)
    box = bbox_of(labels == comp)
    assert box is not None
    box = expand_box(box, ratio, bounds)
    box = _pad_to_min_side(box, bounds)
    return CropSpec(box, series.refiner_input, series.refiner_input, ratio)


def fallback_crop(click: Click, image_size: tuple[int, int], series: ModelSeries) -> CropSpec:
    """Click-centered square window used when no changed component contains the click."""
    w, h = image_size
    side = FALLBACK_WINDOW_FRACTION * max(w, h)
    side = max(side, min(MIN_BOX_SIDE, float(min(w, h))))
    half = side / 2.0
    box = BBox(click.x + 0.5 - half, click.y + 0.5 - half, click.x + 0.5 + half, click.y + 0.5 + half)
    box = box.clamp(BBox.full(w, h))
    return CropSpec(box, series.refiner_input, series.refiner_input, 1.0)


def crop_resize(src: np.ndarray, spec: CropSpec, mode: str | None = None) -> np.ndarray:
    """Extract the spec's box and resize it to the spec's output resolution."""
    x0, y0, x1, y1 = _clipped_pixel_box(spec.box, src.shape[1], src.shape[0])
    patch = src[y0:y1, x0:x1]
    return resize(patch, (spec.out_w, spec.out_h), mode=mode)


def _clipped_pixel_box(box: BBox, w: int, h: int) -> tuple[int, int, int, int]:
    x0, y0, x1, y1 = box.pixel_box()
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(w, max(x1, x0 + 1)), min(h, max(y1, y0 + 1))
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"box {box} collapses to empty after clipping to {w}x{h}")
    return x0, y0, x1, y1


def paste_into(local: np.ndarray, spec: CropSpec, dest: np.ndarray) -> BBox:
    """Resize `local` back to the spec's box and write it there; returns the written region.

    Pixels outside the box are left untouched. Masks travel by nearest
    interpolation, scalar maps by bilinear.
    """
    if local.shape[:2] != (spec.out_h, spec.out_w):
        raise ValueError(f"local tensor {local.shape} does not match spec output ({spec.out_w}, {spec.out_h})")
    x0, y0, x1, y1 = _clipped_pixel_box(spec.box, dest.shape[1], dest.shape[0])
    block = resize(local, (x1 - x0, y1 - y0))
    if dest.dtype == bool and block.dtype != bool:
        block = block >= 0.5
    dest[y0:y1, x0:x1] = block.astype(dest.dtype, copy=False)
    return BBox(float(x0), float(y0), float(x1), float(y1))


def paste_back(local: np.ndarray, spec: CropSpec, global_size: tuple[int, int], fill: float = 0.0) -> tuple[np.ndarray, BBox]:
    """Place a local prediction on a fresh full-size canvas; returns (canvas, written region)."""
    w, h = global_size
    if local.dtype == bool:
        canvas = np.full((h, w), bool(fill), dtype=bool)
    else:
        canvas = np.full((h, w), fill, dtype=np.float64)
    region = paste_into(local, spec, canvas)
    return canvas, region


def roi_align(feature: np.ndarray, box: BBox, out_size: tuple[int, int]) -> np.ndarray:
    """Sample a box out of a feature map by bilinear interpolation at bin centers.

    `feature` is HxW or CxHxW in feature coordinates; one sample per output
    bin, taken at the bin center, clamped at the feature border.
    """
    single = feature.ndim == 2
    stack = feature[None] if single else feature
    _, fh, fw = stack.shape
    ow, oh = int(out_size[0]), int(out_size[1])
    xs = box.x0 + (np.arange(ow, dtype=np.float64) + 0.5) * (box.width / ow) - 0.5
    ys = box.y0 + (np.arange(oh, dtype=np.float64) + 0.5) * (box.height / oh) - 0.5
    xs = np.clip(xs, 0.0, fw - 1.0)
    ys = np.clip(ys, 0.0, fh - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    tx = xs - x0
    ty = ys - y0
    x1 = np.minimum(x0 + 1, fw - 1)
    y1 = np.minimum(y0 + 1, fh - 1)

    a = stack.astype(np.float64, copy=False)
    top = a[:, y0[:, None], x0[None, :]] * (1 - tx) + a[:, y0[:, None], x1[None, :]] * tx
    bot = a[:, y1[:, None], x0[None, :]] * (1 - tx) + a[:, y1[:, None], x1[None, :]] * tx
    out = top * (1 - ty[:, None]) + bot * ty[:, None]
    return out[0] if single else out


def timed(fn, *args, **kwargs):
    """Run fn and return (result, elapsed milliseconds)."""
    t0 = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, (time.perf_counter() - t0) * 1000.0


def crop_area_stats(audit: list[dict]) -> dict[str, float]:
    """Mean crop-box area relative to the image, for target and focus crops."""
    target = [rec["target_ratio"] for rec in audit if rec.get("target_ratio") is not None]
    focus = [rec["focus_ratio"] for rec in audit if rec.get("focus_ratio") is not None]
    if not target:
        raise ValueError("no clicks recorded")
    return {
        "target_mean": float(np.mean(target)),
        "focus_mean": float(np.mean(focus)) if focus else 0.0,
    }
