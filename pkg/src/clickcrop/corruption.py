"""Defective-initial-mask generation: SLIC superpixels plus controlled defect injection.

Starting from a perfect mask, whole superpixels are flipped (boundary errors),
added (external false positives), or carved out (internal holes) until the
mask's IOU against ground truth lands inside a target band. Every returned
mask differs from ground truth by a union of whole superpixels, drawn with a
fixed error-type distribution, fully reproducible from one seed.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as graph_components

from .harness import load_dataset, sample_rng
from .maskio import save_mask_png
from .raster import as_mask, dilate, erode, iou

log = logging.getLogger(__name__)

ERROR_TYPES = ("boundary", "external", "internal")


@dataclass(frozen=True)
class SlicConfig:
    pixel_count: int
    compactness: float = 10.0
    iterations: int = 10

    def __post_init__(self):
        if self.pixel_count < 2:
            raise ValueError("pixel_count must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class DefectConfig:
    error_probs: tuple[float, float, float] = (0.65, 0.25, 0.10)
    min_iou: float = 0.75
    max_iou: float = 0.85
    max_attempts: int = 50
    seed: int = 0
    superpixel_counts: tuple[int, ...] = (50, 100, 200, 300, 500, 700)
    band_radius: int = 3

    def __post_init__(self):
        if abs(sum(self.error_probs) - 1.0) > 1e-9:
            raise ValueError(f"error probabilities must sum to 1, got {self.error_probs}")
        if not 0.0 < self.min_iou < self.max_iou <= 1.0:
            raise ValueError(f"need 0 < min_iou < max_iou <= 1, got [{self.min_iou}, {self.max_iou}]")


def rgb_to_lab(image: np.ndarray) -> np.ndarray:
    """sRGB (uint8 or [0,1] float) to CIELAB under D65."""
    rgb = np.asarray(image, dtype=np.float64)
    if rgb.max() > 1.0:
        rgb = rgb / 255.0
    lin = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    m = np.array(
        [
            [0.4124564, 0.3575761, 0.1804375],
            [0.2126729, 0.7151522, 0.0721750],
            [0.0193339, 0.1191920, 0.9503041],
        ]
    )
    xyz = lin @ m.T
    xyz /= np.array([0.95047, 1.0, 1.08883])
    delta = 6.0 / 29.0
    f = np.where(xyz > delta**3, np.cbrt(xyz), xyz / (3 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def slic(image: np.ndarray, cfg: SlicConfig) -> np.ndarray:
    """SLIC superpixels: local k-means over (lab, xy) with grid-seeded centers.

    Distance is d_lab + (compactness / S) * d_xy with S = sqrt(N / K); each
    pixel competes among the centers of its 3x3 grid-cell neighborhood. After
    clustering, stray fragments are merged into their largest adjacent
    cluster so every final cluster is 4-connected. Labels run 1..K' with K'
    close to the requested count.
    """
    image = np.asarray(image)
    h, w = image.shape[:2]
    n = h * w
    k = cfg.pixel_count
    if n < k:
        raise ValueError(f"image has {n} pixels, fewer than {k} requested superpixels")
    lab = rgb_to_lab(image).astype(np.float32)
    s = np.sqrt(n / k)
    # grid dims: the floor/ceil combination whose product best matches k
    xs_opts = sorted({max(1, int(np.floor(w / s))), max(1, int(np.ceil(w / s)))})
    ys_opts = sorted({max(1, int(np.floor(h / s))), max(1, int(np.ceil(h / s)))})
    # ties prefer more columns, so degenerate grids still seed across the width
    nx, ny = min(
        ((cx, cy) for cx in xs_opts for cy in ys_opts),
        key=lambda g: (abs(g[0] * g[1] - k), -g[0], g[1]),
    )

    cx = (np.arange(nx) + 0.5) * (w / nx)
    cy = (np.arange(ny) + 0.5) * (h / ny)
    centers = np.empty((ny, nx, 5), dtype=np.float32)
    ix = np.clip(np.round(cx - 0.5).astype(int), 0, w - 1)
    iy = np.clip(np.round(cy - 0.5).astype(int), 0, h - 1)
    centers[..., :3] = lab[np.ix_(iy, ix)]
    centers[..., 3] = cx[None, :]
    centers[..., 4] = cy[:, None]

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
    cell_x = np.clip((xx * nx / w).astype(int), 0, nx - 1)
    cell_y = np.clip((yy * ny / h).astype(int), 0, ny - 1)
    weight = cfg.compactness / s

    weight = np.float32(weight)
    labels = np.zeros((h, w), dtype=np.int32)
    for _ in range(cfg.iterations):
        best = np.full((h, w), np.inf, dtype=np.float32)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                gy = np.clip(cell_y + dy, 0, ny - 1)
                gx = np.clip(cell_x + dx, 0, nx - 1)
                cand = centers[gy, gx]
                d_lab = np.sqrt(((lab - cand[..., :3]) ** 2).sum(axis=-1))
                d_xy = np.sqrt((xx - cand[..., 3]) ** 2 + (yy - cand[..., 4]) ** 2)
                d = d_lab + weight * d_xy
                better = d < best
                best[better] = d[better]
                labels[better] = (gy[better] * nx + gx[better] + 1).astype(np.int32)
        flat = labels.ravel() - 1
        count = np.bincount(flat, minlength=nx * ny).astype(np.float64)
        nonempty = count > 0
        for ch, values in enumerate((lab[..., 0], lab[..., 1], lab[..., 2], xx, yy)):
            sums = np.bincount(flat, weights=values.ravel(), minlength=nx * ny)
            centers.reshape(-1, 5)[nonempty, ch] = sums[nonempty] / count[nonempty]

    return _enforce_connectivity(labels)


def _grid_components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected components of equal-label regions, renumbered in scan order from 1."""
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    right = labels[:, :-1] == labels[:, 1:]
    down = labels[:-1, :] == labels[1:, :]
    rows = np.concatenate([idx[:, :-1][right], idx[:-1, :][down]])
    cols = np.concatenate([idx[:, 1:][right], idx[1:, :][down]])
    graph = coo_matrix((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(h * w, h * w))
    n, comp = graph_components(graph, directed=False)
    comp = comp.reshape(h, w)
    # renumber by first touch so all downstream tie-breaks are deterministic
    flat = comp.ravel()
    ids, first = np.unique(flat, return_index=True)
    remap = np.empty(n, dtype=np.int32)
    remap[ids[np.argsort(first, kind="stable")]] = np.arange(1, n + 1, dtype=np.int32)
    return remap[comp], n


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    comps, n_comp = _grid_components(labels)
    flat_comp = comps.ravel()
    sizes = np.bincount(flat_comp, minlength=n_comp + 1)
    first_pix = np.unique(flat_comp, return_index=True)[1]
    comp_label = np.zeros(n_comp + 1, dtype=np.int64)
    comp_label[flat_comp[first_pix]] = labels.ravel()[first_pix]

    # keeper = largest fragment of each cluster (ties: earlier in scan order)
    keeper: dict[int, int] = {}
    for cid in range(1, n_comp + 1):
        lbl = int(comp_label[cid])
        if lbl not in keeper or sizes[cid] > sizes[keeper[lbl]]:
            keeper[lbl] = cid
    keeper_ids = set(keeper.values())

    # component adjacency from grid edges
    h, w = labels.shape
    adj: dict[int, set[int]] = {cid: set() for cid in range(1, n_comp + 1)}
    for a, b in ((comps[:, :-1], comps[:, 1:]), (comps[:-1, :], comps[1:, :])):
        differ = a != b
        pairs = np.unique(np.stack([a[differ], b[differ]], axis=1), axis=0)
        for u, v in pairs:
            adj[int(u)].add(int(v))
            adj[int(v)].add(int(u))

    order = np.argsort(flat_comp, kind="stable")
    starts = np.searchsorted(flat_comp[order], np.arange(1, n_comp + 2))
    comp_pixels = {cid: order[starts[cid - 1] : starts[cid]] for cid in range(1, n_comp + 1)}

    out = labels.astype(np.int64).copy()
    out_flat = out.ravel()
    cluster_size = np.bincount(out_flat, minlength=int(out.max()) + 1)
    assigned = {cid: int(comp_label[cid]) for cid in keeper_ids}
    pending = sorted(set(range(1, n_comp + 1)) - keeper_ids)
    while pending:
        still = []
        progressed = False
        for cid in pending:
            settled = [n for n in adj[cid] if n in assigned]
            if not settled:
                still.append(cid)
                continue
            # orphan joins the adjacent cluster with the most pixels
            target = min(settled, key=lambda n: (-cluster_size[assigned[n]], assigned[n]))
            target_label = assigned[target]
            old_label = int(comp_label[cid])
            out_flat[comp_pixels[cid]] = target_label
            cluster_size[target_label] += sizes[cid]
            cluster_size[old_label] -= sizes[cid]
            assigned[cid] = target_label
            progressed = True
        if not progressed:
            raise RuntimeError("orphan superpixel fragments could not be attached")
        pending = still

    # compact labels to 1..K' in scan order
    ids, first = np.unique(out_flat, return_index=True)
    remap = np.zeros(int(out_flat.max()) + 1, dtype=np.int32)
    remap[ids[np.argsort(first, kind="stable")]] = np.arange(1, len(ids) + 1, dtype=np.int32)
    return remap[out_flat].reshape(labels.shape)


def boundary_band(gt: np.ndarray, radius: int) -> np.ndarray:
    """Ring around the mask boundary: dilation minus erosion."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    gt = as_mask(gt)
    return dilate(gt, radius) & ~erode(gt, radius)


def _eligible_ids(error_type: str, superpixels: np.ndarray, sim: np.ndarray, gt: np.ndarray, band: np.ndarray) -> np.ndarray:
    k = int(superpixels.max())
    total = np.bincount(superpixels.ravel(), minlength=k + 1)
    in_gt = np.bincount(superpixels[gt].ravel(), minlength=k + 1)
    in_sim = np.bincount(superpixels[sim].ravel(), minlength=k + 1)
    if error_type == "boundary":
        hits = np.unique(superpixels[band])
        return hits[hits > 0]
    if error_type == "external":
        region = sim | gt
        touch = ndimage.binary_dilation(region, structure=np.ones((3, 3), bool))
        near = np.zeros(k + 1, dtype=bool)
        near[np.unique(superpixels[touch])] = True
        ids = np.flatnonzero((in_gt == 0) & near & (in_sim < total))
        return ids[ids > 0]
    if error_type == "internal":
        ids = np.flatnonzero((in_gt == total) & (total > 0) & (in_sim > 0))
        return ids[ids > 0]
    raise ValueError(f"unknown error type {error_type!r}")


def draw_error_type(rng: np.random.Generator, probs=(0.65, 0.25, 0.10)) -> str:
    return ERROR_TYPES[int(rng.choice(len(ERROR_TYPES), p=np.asarray(probs, dtype=np.float64)))]


def apply_defect(
    error_type: str,
    superpixels: np.ndarray,
    sim: np.ndarray,
    gt: np.ndarray,
    rng: np.random.Generator,
    band_radius: int = 3,
) -> tuple[np.ndarray, str]:
    """Flip/add/remove one random eligible superpixel; returns (mask, type used).

    If the drawn type has no eligible superpixel, another type is drawn from
    the remaining ones (logged); failing all three raises.
    """
    sim, gt = as_mask(sim), as_mask(gt)
    if superpixels.shape != sim.shape or sim.shape != gt.shape:
        raise ValueError("superpixels, sim, and gt must share dimensions")
    band = boundary_band(gt, band_radius)
    etype = error_type
    remaining = [t for t in ERROR_TYPES if t != etype]
    while True:
        ids = _eligible_ids(etype, superpixels, sim, gt, band)
        if len(ids) > 0:
            break
        if not remaining:
            raise RuntimeError("no eligible superpixel for any defect type")
        log.info("no eligible superpixel for %r defect; resampling type", etype)
        etype = remaining[int(rng.integers(len(remaining)))] if len(remaining) > 1 else remaining[0]
        remaining = [t for t in remaining if t != etype]
    pick = int(rng.choice(ids))
    region = superpixels == pick
    out = sim.copy()
    if etype == "boundary":
        out[region] = ~sim[region]
    elif etype == "external":
        out[region] = True
    else:
        out[region] = False
    return out, etype


def simulate_defective_mask(
    image: np.ndarray,
    gt: np.ndarray,
    dcfg: DefectConfig,
    rng: np.random.Generator | None = None,
    slic_cache: dict | None = None,
) -> tuple[np.ndarray, dict]:
    """Accumulate superpixel defects until IOU lands in [min_iou, max_iou).

    Overshooting below the band resets to the clean mask and tries again;
    the attempt budget bounds the whole loop.
    """
    gt = as_mask(gt)
    if int(np.count_nonzero(gt)) < 300:
        raise ValueError("ground-truth mask under 300 pixels; too small to corrupt")
    if rng is None:
        rng = np.random.default_rng(dcfg.seed)
    cache = slic_cache if slic_cache is not None else {}

    sim = gt.copy()
    applied: list[str] = []
    for attempt in range(1, dcfg.max_attempts + 1):
        etype = draw_error_type(rng, dcfg.error_probs)
        k = int(dcfg.superpixel_counts[int(rng.integers(len(dcfg.superpixel_counts)))])
        if k not in cache:
            cache[k] = slic(image, SlicConfig(pixel_count=k))
        sim, used = apply_defect(etype, cache[k], sim, gt, rng, band_radius=dcfg.band_radius)
        applied.append(used)
        v = iou(sim, gt)
        if dcfg.min_iou <= v < dcfg.max_iou:
            return sim, {"iou": v, "defect_types": applied, "attempts": attempt}
        if v < dcfg.min_iou:
            sim = gt.copy()
            applied = []
    raise RuntimeError(f"no mask inside the IOU band after {dcfg.max_attempts} attempts")


def build_benchmark(dataset_root: str | Path, out_root: str | Path, dcfg: DefectConfig) -> dict:
    """Write defective initial masks plus a manifest for every usable dataset sample."""
    out_root = Path(out_root)
    mask_dir = out_root / "init_masks"
    mask_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "seed": dcfg.seed,
        "min_iou": dcfg.min_iou,
        "max_iou": dcfg.max_iou,
        "error_probs": list(dcfg.error_probs),
        "samples": [],
    }
    for sample in load_dataset(dataset_root):
        entry: dict = {"id": sample.sample_id}
        try:
            mask, info = simulate_defective_mask(
                sample.image, sample.gt, dcfg, rng=sample_rng(dcfg.seed, sample.sample_id)
            )
            path = mask_dir / f"{sample.sample_id}.png"
            save_mask_png(path, mask)
            entry.update(
                iou=info["iou"],
                defect_types=info["defect_types"],
                attempts=info["attempts"],
                path=str(path.relative_to(out_root)),
            )
        except (RuntimeError, ValueError, OSError) as e:
            entry["error"] = str(e)
            log.warning("benchmark sample %s failed: %s", sample.sample_id, e)
        manifest["samples"].append(entry)
    (out_root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
