"""Synthetic scenes: colored shapes on textured backgrounds.

Gives the pipeline, the corruption generator, and the demos something
realistic to chew on without shipping any dataset: each scene is one
foreground object (ellipse, polygon, wavy blob, or thin sliver) with a color
distinct from the background, plus mild noise so superpixels have structure.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .harness import Sample
from .maskio import save_mask_png

KINDS = ("blob", "polygon", "wavy", "thin", "serrated")
MIN_OBJECT_PIXELS = 1000


def _polygon_mask(w: int, h: int, points: np.ndarray) -> np.ndarray:
    img = Image.new("L", (w, h), 0)
    ImageDraw.Draw(img).polygon([(float(x), float(y)) for x, y in points], fill=255)
    return np.asarray(img) >= 128


def _ellipse_mask(w: int, h: int, cx: float, cy: float, a: float, b: float, theta: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _shape_mask(kind: str, w: int, h: int, rng: np.random.Generator) -> np.ndarray:
    cx = w * rng.uniform(0.35, 0.65)
    cy = h * rng.uniform(0.35, 0.65)
    m = min(w, h)
    if kind == "blob":
        a = m * rng.uniform(0.10, 0.22)
        b = a * rng.uniform(0.6, 1.0)
        return _ellipse_mask(w, h, cx, cy, a, b, rng.uniform(0, np.pi))
    if kind == "thin":
        a = m * rng.uniform(0.28, 0.38)
        b = max(4.0, a * rng.uniform(0.06, 0.12))
        return _ellipse_mask(w, h, cx, cy, a, b, rng.uniform(0, np.pi))
    if kind == "polygon":
        n_pts = int(rng.integers(5, 10))
        angles = np.sort(rng.uniform(0, 2 * np.pi, n_pts))
        radii = m * rng.uniform(0.12, 0.26, n_pts)
        pts = np.stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)], axis=1)
        return _polygon_mask(w, h, pts)
    if kind in ("wavy", "serrated"):
        # serrated = boundary teeth a few pixels wide, detail that survives
        # only at full resolution; wavy = a handful of broad lobes
        if kind == "wavy":
            base, amp = m * rng.uniform(0.36, 0.42), rng.uniform(0.06, 0.10)
            waves = int(rng.integers(7, 11))
        else:
            base, amp = m * rng.uniform(0.235, 0.25), rng.uniform(0.128, 0.138)
            waves = int(rng.integers(205, 236))
        phase = rng.uniform(0, 2 * np.pi)
        theta = np.linspace(0, 2 * np.pi, max(1440, 8 * waves), endpoint=False)
        r = base * (1.0 + amp * np.sin(waves * theta + phase))
        pts = np.stack([w * 0.5 + r * np.cos(theta), h * 0.5 + r * np.sin(theta)], axis=1)
        return _polygon_mask(w, h, pts)
    raise ValueError(f"unknown scene kind {kind!r}")


def _paint(w: int, h: int, gt: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    bg0 = rng.uniform(40, 215, size=3)
    bg1 = rng.uniform(40, 215, size=3)
    fg = rng.uniform(30, 225, size=3)
    while np.linalg.norm(fg - 0.5 * (bg0 + bg1)) < 90:
        fg = rng.uniform(30, 225, size=3)
    rx = (np.arange(w) / max(1, w - 1))[None, :, None]
    ry = (np.arange(h) / max(1, h - 1))[:, None, None]
    t = 0.5 * (rx + ry)
    img = bg0 * (1 - t) + bg1 * t
    img[gt] = fg
    img += rng.normal(0.0, 5.0, size=img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


def random_scene(
    rng: np.random.Generator,
    kind: str | None = None,
    size_range: tuple[int, int] = (224, 288),
    min_pixels: int = MIN_OBJECT_PIXELS,
) -> tuple[np.ndarray, np.ndarray]:
    """One (image, ground-truth mask) pair with an object of >= min_pixels."""
    w = int(rng.integers(size_range[0], size_range[1] + 1))
    h = int(rng.integers(size_range[0], size_range[1] + 1))
    if kind is None:
        kind = KINDS[int(rng.integers(len(KINDS)))]
    for _ in range(64):
        gt = _shape_mask(kind, w, h, rng)
        if int(np.count_nonzero(gt)) >= min_pixels:
            return _paint(w, h, gt, rng), gt
    raise RuntimeError(f"could not draw a {kind} object with >= {min_pixels} pixels")


def scene_set(
    n: int,
    seed: int = 0,
    kinds: tuple[str, ...] | None = None,
    size_range: tuple[int, int] = (224, 288),
    min_pixels: int = MIN_OBJECT_PIXELS,
) -> list[Sample]:
    """Deterministic list of synthetic samples; scene i depends only on (seed, i)."""
    samples = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        kind = kinds[i % len(kinds)] if kinds else None
        image, gt = random_scene(rng, kind=kind, size_range=size_range, min_pixels=min_pixels)
        samples.append(Sample(f"scene_{i:04d}", image, gt))
    return samples


def benchmark_scenes(n: int = 50, seed: int = 2024) -> list[Sample]:
    """The standard synthetic corpus: mostly compact objects at modest sizes,
    plus a serrated minority whose fine teeth defy reduced-resolution passes."""
    n_serrated = max(1, n // 5)
    samples = []
    for i in range(n - n_serrated):
        rng = np.random.default_rng([seed, i])
        kind = ("blob", "polygon", "thin", "wavy")[i % 4]
        image, gt = random_scene(rng, kind=kind, size_range=(224, 288))
        samples.append(Sample(f"scene_{i:04d}", image, gt))
    for j in range(n_serrated):
        i = n - n_serrated + j
        rng = np.random.default_rng([seed, i])
        image, gt = random_scene(rng, kind="serrated", size_range=(512, 512))
        samples.append(Sample(f"scene_{i:04d}", image, gt))
    return samples


def write_dataset(root: str | Path, samples: list[Sample]) -> None:
    """Lay samples out in the paired-directory dataset format."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    for s in samples:
        Image.fromarray(s.image).save(root / "images" / f"{s.sample_id}.png")
        save_mask_png(root / "masks" / f"{s.sample_id}.png", s.gt)
