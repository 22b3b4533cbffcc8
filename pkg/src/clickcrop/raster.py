"""Pure raster primitives: IOU, morphology, labeling, distance transform, resizing.

Masks are 2D bool arrays, scalar maps are 2D float arrays, label maps are 2D
int32 arrays (0 = background). All functions return new arrays and never
mutate their inputs, so they are safe to call from any number of threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class Click:
    """One user click: polarity, pixel position, and its index in the session."""

    is_positive: bool
    x: int
    y: int
    ordinal: int = 0


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in continuous pixel coordinates, half-open on the max edge."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains_point(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1

    def clamp(self, bounds: "BBox") -> "BBox":
        return BBox(
            max(self.x0, bounds.x0),
            max(self.y0, bounds.y0),
            min(self.x1, bounds.x1),
            min(self.y1, bounds.y1),
        )

    def pixel_box(self) -> tuple[int, int, int, int]:
        """Integerize for extraction: floor the min edge, ceil the max edge.

        Never crops away pixels that the continuous box touches.
        """
        return (
            int(np.floor(self.x0)),
            int(np.floor(self.y0)),
            int(np.ceil(self.x1)),
            int(np.ceil(self.y1)),
        )

    def to_json(self) -> list[float]:
        return [float(self.x0), float(self.y0), float(self.x1), float(self.y1)]

    @staticmethod
    def full(width: int, height: int) -> "BBox":
        return BBox(0.0, 0.0, float(width), float(height))


def as_mask(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"mask must be 2D, got shape {a.shape}")
    return a.astype(bool, copy=False)


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two masks. Two empty masks score 1.0."""
    a, b = as_mask(a), as_mask(b)
    _check_same_shape(a, b)
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(a & b))
    return inter / union


def xor_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pixel-wise difference mask: true exactly where the two masks disagree."""
    a, b = as_mask(a), as_mask(b)
    _check_same_shape(a, b)
    return a ^ b


_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def connected_components(m: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label connected regions of a mask.

    Labels are renumbered 1..K in first-touch row-major order so downstream
    tie-breaks (largest component, etc.) are deterministic.
    """
    m = as_mask(m)
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    struct = _STRUCT_4 if connectivity == 4 else _STRUCT_8
    labels, n = ndimage.label(m, structure=struct)
    if n > 1:
        labels = _relabel_scan_order(labels)
    return labels.astype(np.int32, copy=False), int(n)


def _relabel_scan_order(labels: np.ndarray) -> np.ndarray:
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids != 0
    ids, first = ids[keep], first[keep]
    order = np.argsort(first, kind="stable")
    remap = np.zeros(int(labels.max()) + 1, dtype=labels.dtype)
    remap[ids[order]] = np.arange(1, len(ids) + 1, dtype=labels.dtype)
    return remap[labels]


def component_containing(labels: np.ndarray, x: int, y: int) -> int | None:
    """Label at (x, y), or None if the pixel is background."""
    h, w = labels.shape
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"point ({x}, {y}) outside {w}x{h} label map")
    v = int(labels[y, x])
    return v if v > 0 else None


def largest_component(labels: np.ndarray) -> int | None:
    """Id of the component with the most pixels; ties go to the smaller id."""
    n = int(labels.max())
    if n == 0:
        return None
    counts = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return int(np.argmax(counts)) + 1


def disk_element(radius: int) -> np.ndarray:
    """Disk structuring element: offsets whose center distance is <= radius."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (xx * xx + yy * yy) <= radius * radius


def erode(m: np.ndarray, radius: int) -> np.ndarray:
    """Morphological erosion with a Euclidean disk; pixels beyond the border count as false."""
    m = as_mask(m)
    return ndimage.binary_erosion(m, structure=disk_element(radius), border_value=0)


def dilate(m: np.ndarray, radius: int) -> np.ndarray:
    """Morphological dilation with a Euclidean disk."""
    m = as_mask(m)
    return ndimage.binary_dilation(m, structure=disk_element(radius), border_value=0)


def distance_transform(m: np.ndarray) -> np.ndarray:
    """Per-pixel Euclidean distance to the nearest false pixel.

    The image border is treated as false (one virtual ring of background), so
    an all-true mask still has finite, interior-peaked distances.
    """
    m = as_mask(m)
    padded = np.pad(m, 1, mode="constant", constant_values=False)
    d = ndimage.distance_transform_edt(padded)
    return d[1:-1, 1:-1]


def stamp_disk(scalar_map: np.ndarray, x: int, y: int, radius: int = 2, value: float = 1.0) -> np.ndarray:
    """Copy of the map with all pixels within `radius` of (x, y) set to `value`."""
    out = np.array(scalar_map, dtype=np.float32, copy=True)
    h, w = out.shape
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"point ({x}, {y}) outside {w}x{h} map")
    r = int(np.ceil(radius))
    x0, x1 = max(0, x - r), min(w, x + r + 1)
    y0, y1 = max(0, y - r), min(h, y + r + 1)
    yy, xx = np.mgrid[y0:y1, x0:x1]
    hit = (xx - x) ** 2 + (yy - y) ** 2 <= radius * radius
    out[y0:y1, x0:x1][hit] = value
    return out


def _resample_indices(src: int, dst: int) -> np.ndarray:
    # Center-aligned mapping (align_corners=False): nearest source index per output index.
    o = np.arange(dst, dtype=np.float64)
    idx = np.floor((o + 0.5) * (src / dst)).astype(np.int64)
    return np.clip(idx, 0, src - 1)


def _bilinear_axes(src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    o = np.arange(dst, dtype=np.float64)
    coord = (o + 0.5) * (src / dst) - 0.5
    lo = np.floor(coord).astype(np.int64)
    t = coord - lo
    lo0 = np.clip(lo, 0, src - 1)
    lo1 = np.clip(lo + 1, 0, src - 1)
    return lo0, lo1, t


def resize(arr: np.ndarray, size: tuple[int, int], mode: str | None = None) -> np.ndarray:
    """Resize a mask, scalar map, or HxWxC image to (width, height).

    Bool arrays use nearest; float arrays use bilinear unless `mode` overrides.
    Uses the align_corners=False convention (output pixel centers map to
    source pixel centers), clamped at borders.
    """
    w, h = int(size[0]), int(size[1])
    if w < 1 or h < 1:
        raise ValueError(f"target size must be >= 1, got {size}")
    arr = np.asarray(arr)
    if mode is None:
        mode = "nearest" if arr.dtype == bool else "bilinear"
    if arr.dtype == bool and mode != "nearest":
        raise ValueError("masks must be resized with nearest")
    src_h, src_w = arr.shape[:2]
    if (src_w, src_h) == (w, h):
        return arr.copy()

    if mode == "nearest":
        iy = _resample_indices(src_h, h)
        ix = _resample_indices(src_w, w)
        return arr[np.ix_(iy, ix)]
    if mode != "bilinear":
        raise ValueError(f"unknown resize mode {mode!r}")

    y0, y1, ty = _bilinear_axes(src_h, h)
    x0, x1, tx = _bilinear_axes(src_w, w)
    a = arr.astype(np.float64, copy=False)
    if a.ndim == 3:
        wx, wy = tx[None, :, None], ty[:, None, None]
    else:
        wx, wy = tx[None, :], ty[:, None]
    top = a[np.ix_(y0, x0)] * (1 - wx) + a[np.ix_(y0, x1)] * wx
    bot = a[np.ix_(y1, x0)] * (1 - wx) + a[np.ix_(y1, x1)] * wx
    out = top * (1 - wy) + bot * wy
    return out.astype(arr.dtype if np.issubdtype(arr.dtype, np.floating) else np.float64)


def bbox_of(mask: np.ndarray) -> BBox | None:
    """Tight external box of the true pixels (half-open), or None if empty."""
    mask = as_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return BBox(float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1))
