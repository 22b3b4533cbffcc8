"""Interactive session state machine.

Each click runs the full local pipeline: target crop -> coarse segmentation ->
focus crop -> refinement -> merge. Under progressive merge only the changed
component the user pointed at is written back, so everything else in the mask
stays bit-identical."""
from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import Backend, SegmentorInput, fuse
from .crops import (
    CropSpec,
    ModelSeries,
    crop_resize,
    fallback_crop,
    focus_crop,
    get_series,
    paste_into,
    roi_align,
    target_crop,
)
from .raster import (
    BBox,
    Click,
    as_mask,
    bbox_of,
    component_containing,
    connected_components,
    stamp_disk,
    xor_diff,
)

CLICK_DISK_RADIUS = 2
PROGRESSIVE_AFTER_CLICKS = 10
HISTORY_DEPTH = 32


@dataclass
class ClickResult:
    click: Click
    updated_region: BBox | None
    target_spec: CropSpec
    focus_spec: CropSpec
    used_fallback: bool
    progressive: bool
    timings_ms: dict = field(default_factory=dict)


def merge_masks(
    prev: np.ndarray, new_pred: np.ndarray, click: Click, progressive: bool
) -> tuple[np.ndarray, BBox | None]:
    """Fold a fresh prediction into the previous mask.

    Non-progressive: the prediction wins wholesale (it already equals the
    previous mask outside the computed crops). Progressive: only the changed
    component containing the click is copied over; a click that landed on
    unchanged pixels updates the nearest changed component, and an empty
    difference is a no-op.
    """
    prev, new_pred = as_mask(prev), as_mask(new_pred)
    if prev.shape != new_pred.shape:
        raise ValueError(f"dimension mismatch: {prev.shape} vs {new_pred.shape}")
    diff = xor_diff(prev, new_pred)
    if not progressive:
        return new_pred.copy(), bbox_of(diff)
    labels, n = connected_components(diff, connectivity=8)
    if n == 0:
        return prev.copy(), None
    comp = component_containing(labels, click.x, click.y)
    if comp is None:
        ys, xs = np.nonzero(diff)
        d2 = (xs - click.x) ** 2 + (ys - click.y) ** 2
        nearest = int(np.argmin(d2))
        comp = int(labels[ys[nearest], xs[nearest]])
    region = labels == comp
    merged = prev.copy()
    merged[region] = new_pred[region]
    return merged, bbox_of(region)


class Session:
    """One image, one evolving mask, one click history."""

    def __init__(
        self,
        image: np.ndarray,
        initial_mask: np.ndarray | None = None,
        series: ModelSeries | str = "s2",
        backend: Backend | None = None,
        history_depth: int = HISTORY_DEPTH,
    ):
        image = np.asarray(image)
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValueError(f"image must be HxWx3, got shape {image.shape}")
        if image.dtype == np.uint8:
            image = image.astype(np.float32) / 255.0
        self.image = image.astype(np.float32, copy=False)
        self.height, self.width = image.shape[:2]
        self.series = get_series(series) if isinstance(series, str) else series
        if backend is None:
            raise ValueError("a backend is required")
        self.backend = backend

        if initial_mask is not None:
            initial_mask = as_mask(initial_mask)
            if initial_mask.shape != (self.height, self.width):
                raise ValueError(
                    f"initial mask {initial_mask.shape} does not match image {(self.height, self.width)}"
                )
            self._mask = initial_mask.copy()
            self.had_initial_mask = True
        else:
            self._mask = np.zeros((self.height, self.width), dtype=bool)
            self.had_initial_mask = False

        self.clicks: list[Click] = []
        self.audit: list[dict] = []
        self._history: deque = deque(maxlen=history_depth)

    @property
    def mask(self) -> np.ndarray:
        return self._mask.copy()

    @property
    def progressive_active(self) -> bool:
        return self.had_initial_mask or len(self.clicks) > PROGRESSIVE_AFTER_CLICKS

    def _click_maps(self, extra: Click) -> tuple[np.ndarray, np.ndarray]:
        pos = np.zeros((self.height, self.width), dtype=np.float32)
        neg = np.zeros((self.height, self.width), dtype=np.float32)
        for c in [*self.clicks, extra]:
            if c.is_positive:
                pos = stamp_disk(pos, c.x, c.y, radius=CLICK_DISK_RADIUS, value=1.0)
            else:
                neg = stamp_disk(neg, c.x, c.y, radius=CLICK_DISK_RADIUS, value=1.0)
        return pos, neg

    def add_click(self, x: int, y: int, positive: bool) -> ClickResult:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"click ({x}, {y}) outside image {self.width}x{self.height}")
        t_start = time.perf_counter()
        click = Click(bool(positive), int(x), int(y), ordinal=len(self.clicks) + 1)
        prev = self._mask
        progressive = self.had_initial_mask or (len(self.clicks) + 1) > PROGRESSIVE_AFTER_CLICKS

        pos_map, neg_map = self._click_maps(click)
        tspec = target_crop(prev, click, self.series, first_click=len(self.clicks) == 0)

        seg_in = SegmentorInput(
            image=crop_resize(self.image, tspec).astype(np.float32),
            prev_mask=crop_resize(prev, tspec).astype(np.float32),
            pos_clicks=crop_resize(pos_map, tspec, mode="nearest"),
            neg_clicks=crop_resize(neg_map, tspec, mode="nearest"),
            crop=tspec,
        )
        t0 = time.perf_counter()
        coarse = self.backend.segment(seg_in)
        t_segment = (time.perf_counter() - t0) * 1000.0

        new_pred = prev.copy()
        paste_into(coarse.logits >= 0.0, tspec, new_pred)

        fspec = focus_crop(new_pred, prev, click, self.series)
        used_fallback = fspec is None
        if fspec is None:
            fspec = fallback_crop(click, (self.width, self.height), self.series)

        # sample the coarse outputs over the same integer box the refiner crop uses
        fx0, fy0, fx1, fy1 = fspec.box.pixel_box()
        fx0, fy0 = max(0, fx0), max(0, fy0)
        fx1, fy1 = min(self.width, fx1), min(self.height, fy1)
        roi_box = self._to_crop_frame(BBox(fx0, fy0, fx1, fy1), tspec)
        roi_logits = roi_align(coarse.logits, roi_box, (fspec.out_w, fspec.out_h))
        fh, fw = coarse.feature.shape[1:]
        feat_box = BBox(
            roi_box.x0 * fw / tspec.out_w,
            roi_box.y0 * fh / tspec.out_h,
            roi_box.x1 * fw / tspec.out_w,
            roi_box.y1 * fh / tspec.out_h,
        )
        roi_feature = roi_align(coarse.feature, feat_box, (max(1, fspec.out_w // 4), max(1, fspec.out_h // 4)))

        t0 = time.perf_counter()
        refined = self.backend.refine(
            crop_resize(self.image, fspec).astype(np.float32),
            (crop_resize(pos_map, fspec, mode="nearest"), crop_resize(neg_map, fspec, mode="nearest")),
            roi_feature,
            roi_logits,
            crop=fspec,
        )
        t_refine = (time.perf_counter() - t0) * 1000.0

        fused = fuse(refined.boundary, refined.detail, roi_logits)
        paste_into(fused >= 0.0, fspec, new_pred)

        merged, updated = merge_masks(prev, new_pred, click, progressive)

        self._history.append((prev, len(self.clicks)))
        self.clicks.append(click)
        self._mask = merged

        image_area = float(self.width * self.height)
        timings = {
            "segment": t_segment,
            "refine": t_refine,
            "total": (time.perf_counter() - t_start) * 1000.0,
        }
        self.audit.append(
            {
                "ordinal": click.ordinal,
                "x": click.x,
                "y": click.y,
                "polarity": "positive" if click.is_positive else "negative",
                "target_crop": tspec.to_json(),
                "focus_crop": fspec.to_json(),
                "fallback": used_fallback,
                "progressive": progressive,
                "updated_region": updated.to_json() if updated is not None else None,
                "target_ratio": tspec.box.area / image_area,
                "focus_ratio": fspec.box.area / image_area,
                "timings_ms": timings,
                "undone": False,
            }
        )
        return ClickResult(click, updated, tspec, fspec, used_fallback, progressive, timings)

    @staticmethod
    def _to_crop_frame(box: BBox, spec: CropSpec) -> BBox:
        """Map a global-frame box into a crop's output pixel frame."""
        x0, y0, x1, y1 = spec.box.pixel_box()
        sx = spec.out_w / (x1 - x0)
        sy = spec.out_h / (y1 - y0)
        return BBox((box.x0 - x0) * sx, (box.y0 - y0) * sy, (box.x1 - x0) * sx, (box.y1 - y0) * sy)

    def undo(self) -> None:
        if not self._history:
            raise IndexError("nothing to undo")
        mask, n_clicks = self._history.pop()
        self._mask = mask
        del self.clicks[n_clicks:]
        for rec in reversed(self.audit):
            if rec["undone"]:
                continue
            if rec["ordinal"] > n_clicks:
                rec["undone"] = True
            else:
                break

    def set_mask(self, mask: np.ndarray) -> None:
        """Adopt an externally produced mask (brush/lasso/other tools)."""
        mask = as_mask(mask)
        if mask.shape != (self.height, self.width):
            raise ValueError(f"mask {mask.shape} does not match image {(self.height, self.width)}")
        self._history.append((self._mask, len(self.clicks)))
        self._mask = mask.copy()
        self.had_initial_mask = True

    def write_audit_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as f:
            for rec in self.audit:
                f.write(json.dumps(rec) + "\n")


def new_session(
    image: np.ndarray,
    initial_mask: np.ndarray | None,
    series: ModelSeries | str,
    backend: Backend,
) -> Session:
    return Session(image, initial_mask=initial_mask, series=series, backend=backend)
