"""Automated evaluation: simulated clicks at error-region centers, NoC/NoF metrics.

The simulated annotator always clicks the interior center (distance-transform
argmax) of the largest connected error region, positive on missing foreground
and negative on spurious foreground, until the target IOU is reached or the
click budget runs out.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .backends import Backend, create_backend
from .crops import ModelSeries, get_series
from .maskio import load_image_rgb, load_mask_png
from .raster import Click, as_mask, connected_components, distance_transform, iou, largest_component, xor_diff
from .session import Session

log = logging.getLogger(__name__)

MIN_GT_PIXELS = 300

MODE_FROM_SCRATCH = "from_scratch"
MODE_FROM_INITIAL = "from_initial_mask"


@dataclass(frozen=True)
class EvalConfig:
    target_ious: tuple[float, ...] = (0.85, 0.90, 0.95)
    max_clicks: int = 20
    mode: str = MODE_FROM_SCRATCH
    seed: int = 0

    def __post_init__(self):
        if not self.target_ious or not all(0.0 < t <= 1.0 for t in self.target_ious):
            raise ValueError(f"target IOUs must lie in (0, 1], got {self.target_ious}")
        if self.max_clicks < 1:
            raise ValueError("max_clicks must be >= 1")
        if self.mode not in (MODE_FROM_SCRATCH, MODE_FROM_INITIAL):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class SampleRecord:
    sample_id: str
    initial_iou: float
    iou_trace: list[float] = field(default_factory=list)
    clicks_to_target: dict[float, int] = field(default_factory=dict)
    failed: dict[float, bool] = field(default_factory=dict)
    target_ratio_mean: float | None = None
    focus_ratio_mean: float | None = None
    error: str | None = None

    @property
    def final_iou(self) -> float:
        return self.iou_trace[-1] if self.iou_trace else self.initial_iou

    def to_json(self) -> dict:
        return {
            "id": self.sample_id,
            "initial_iou": self.initial_iou,
            "iou_trace": self.iou_trace,
            "clicks_to_target": {f"{t:.2f}": n for t, n in self.clicks_to_target.items()},
            "failed": {f"{t:.2f}": bool(v) for t, v in self.failed.items()},
            "target_ratio_mean": self.target_ratio_mean,
            "focus_ratio_mean": self.focus_ratio_mean,
            "error": self.error,
        }


def simulate_next_click(pred: np.ndarray, gt: np.ndarray) -> Click:
    """Click at the interior center of the largest error region.

    Positive when the region is missing foreground, negative when it is
    spurious foreground. Ties (equal region sizes, equal distances) resolve
    in row-major scan order, so the simulator is fully deterministic.
    """
    pred, gt = as_mask(pred), as_mask(gt)
    error = xor_diff(pred, gt)
    if not error.any():
        raise ValueError("prediction equals ground truth; no error region to click")
    labels, _ = connected_components(error, connectivity=8)
    comp = largest_component(labels)
    region = labels == comp
    dist = distance_transform(region)
    flat = int(np.argmax(dist))
    y, x = divmod(flat, region.shape[1])
    return Click(is_positive=bool(gt[y, x]), x=int(x), y=int(y))


def run_sample(
    image: np.ndarray,
    gt: np.ndarray,
    initial_mask: np.ndarray | None,
    backend: Backend,
    series: ModelSeries | str,
    cfg: EvalConfig,
    sample_id: str = "sample",
) -> SampleRecord:
    """Drive one interactive session with simulated clicks and record the IOU trace."""
    gt = as_mask(gt)
    if not gt.any():
        raise ValueError(f"{sample_id}: ground truth mask is empty")
    if initial_mask is not None and cfg.mode == MODE_FROM_SCRATCH:
        initial_mask = None

    targets = sorted(cfg.target_ious)
    session = Session(image, initial_mask=initial_mask, series=series, backend=backend)
    record = SampleRecord(sample_id=sample_id, initial_iou=iou(session.mask, gt))

    # Thresholds already satisfied by the starting mask cost zero clicks.
    for t in targets:
        if record.initial_iou >= t:
            record.clicks_to_target[t] = 0

    try:
        for k in range(1, cfg.max_clicks + 1):
            if len(record.clicks_to_target) == len(targets):
                break
            current = session.mask
            if iou(current, gt) >= 1.0:
                break
            click = simulate_next_click(current, gt)
            session.add_click(click.x, click.y, click.is_positive)
            v = iou(session.mask, gt)
            record.iou_trace.append(v)
            for t in targets:
                if t not in record.clicks_to_target and v >= t:
                    record.clicks_to_target[t] = k
    except Exception as e:  # backend failures abort the sample, counted as failure
        record.error = f"{type(e).__name__}: {e}"
        log.warning("sample %s aborted: %s", sample_id, record.error)

    for t in targets:
        if t not in record.clicks_to_target:
            record.clicks_to_target[t] = cfg.max_clicks + 1
            record.failed[t] = True
        else:
            record.failed[t] = False

    if session.audit:
        ratios = [rec["target_ratio"] for rec in session.audit]
        record.target_ratio_mean = float(np.mean(ratios))
        record.focus_ratio_mean = float(np.mean([rec["focus_ratio"] for rec in session.audit]))
    return record


def aggregate(records: list[SampleRecord], cfg: EvalConfig) -> dict:
    """NoC / NoF per threshold plus mean IOU-at-k curves.

    NoC averages clicks-to-target with failures counted at the click cap;
    means use exact rational arithmetic and round to two decimals at the end.
    """
    if not records:
        raise ValueError("no sample records to aggregate")
    n = len(records)
    targets = sorted(cfg.target_ious)
    noc: dict[str, float] = {}
    nof: dict[str, int] = {}
    for t in targets:
        total = Fraction(0)
        failures = 0
        for r in records:
            if r.failed[t]:
                total += cfg.max_clicks
                failures += 1
            else:
                total += r.clicks_to_target[t]
        mean = total / n
        noc[f"{t:.2f}"] = float(Fraction(round(mean * 100), 100))
        nof[f"{t:.2f}"] = failures

    curves = []
    for k in range(1, cfg.max_clicks + 1):
        vals = []
        for r in records:
            if k <= len(r.iou_trace):
                vals.append(r.iou_trace[k - 1])
            else:
                vals.append(r.final_iou)
        curves.append(float(np.mean(vals)))

    target_ratios = [r.target_ratio_mean for r in records if r.target_ratio_mean is not None]
    focus_ratios = [r.focus_ratio_mean for r in records if r.focus_ratio_mean is not None]
    return {
        "config": {
            "target_ious": list(targets),
            "max_clicks": cfg.max_clicks,
            "mode": cfg.mode,
            "seed": cfg.seed,
        },
        "n_samples": n,
        "noc": noc,
        "nof": nof,
        "mean_iou_at_k": curves,
        "mean_initial_iou": float(np.mean([r.initial_iou for r in records])),
        "crop_area": {
            "target_mean": float(np.mean(target_ratios)) if target_ratios else None,
            "focus_mean": float(np.mean(focus_ratios)) if focus_ratios else None,
        },
        "samples": [r.to_json() for r in records],
    }


@dataclass
class Sample:
    sample_id: str
    image: np.ndarray
    gt: np.ndarray
    init_mask: np.ndarray | None = None


def load_dataset(root: str | Path, require_init: bool = False):
    """Yield samples from a paired-directory layout.

    Expects images/<id>.(png|jpg|jpeg), masks/<id>.png, and optionally
    init_masks/<id>.png. Ground-truth masks under 300 pixels are skipped.
    """
    root = Path(root)
    images_dir, masks_dir, init_dir = root / "images", root / "masks", root / "init_masks"
    if not images_dir.is_dir() or not masks_dir.is_dir():
        raise FileNotFoundError(f"dataset root {root} must contain images/ and masks/")
    for image_path in sorted(images_dir.iterdir()):
        if image_path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
            continue
        sample_id = image_path.stem
        mask_path = masks_dir / f"{sample_id}.png"
        if not mask_path.exists():
            log.warning("skipping %s: no mask file %s", sample_id, mask_path)
            continue
        try:
            image = load_image_rgb(image_path)
            gt = load_mask_png(mask_path)
        except OSError as e:
            log.warning("skipping %s: unreadable (%s)", sample_id, e)
            continue
        if image.shape[:2] != gt.shape:
            raise ValueError(f"{sample_id}: image {image.shape[:2]} vs mask {gt.shape} dimension mismatch")
        n_px = int(np.count_nonzero(gt))
        if n_px < MIN_GT_PIXELS:
            log.info("skipping %s: mask has %d pixels (< %d)", sample_id, n_px, MIN_GT_PIXELS)
            continue
        init_mask = None
        init_path = init_dir / f"{sample_id}.png"
        if init_path.exists():
            init_mask = load_mask_png(init_path)
            if init_mask.shape != gt.shape:
                raise ValueError(f"{sample_id}: init mask {init_mask.shape} vs gt {gt.shape} mismatch")
        elif require_init:
            log.warning("skipping %s: no initial mask", sample_id)
            continue
        yield Sample(sample_id, image, gt, init_mask)


def sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    """Independent, order-insensitive RNG stream for one sample."""
    import hashlib

    digest = hashlib.sha256(sample_id.encode()).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "little")])


def run_samples(
    samples,
    backend_name: str,
    series: ModelSeries | str,
    cfg: EvalConfig,
    noise_blur: int = 2,
    noise_blob_rate: float = 0.2,
    model_path=None,
    io_spec=None,
) -> tuple[dict, list[SampleRecord]]:
    """Evaluate an iterable of samples, building one backend per sample."""
    series = get_series(series) if isinstance(series, str) else series
    records = []
    for sample in sorted(samples, key=lambda s: s.sample_id):
        backend = create_backend(
            backend_name,
            gt=sample.gt,
            rng=sample_rng(cfg.seed, sample.sample_id),
            noise_blur=noise_blur,
            noise_blob_rate=noise_blob_rate,
            model_path=model_path,
            io_spec=io_spec,
        )
        init = sample.init_mask if cfg.mode == MODE_FROM_INITIAL else None
        records.append(run_sample(sample.image, sample.gt, init, backend, series, cfg, sample.sample_id))
    return aggregate(records, cfg), records


def write_report_json(path: str | Path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n")


def write_report_csv(path: str | Path, records: list[SampleRecord], cfg: EvalConfig) -> None:
    targets = sorted(cfg.target_ious)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        header = ["id", "initial_iou", "final_iou", "n_clicks"]
        for t in targets:
            header += [f"noc@{t:.2f}", f"failed@{t:.2f}"]
        header.append("error")
        writer.writerow(header)
        for r in records:
            row = [r.sample_id, f"{r.initial_iou:.4f}", f"{r.final_iou:.4f}", len(r.iou_trace)]
            for t in targets:
                row += [r.clicks_to_target[t], int(r.failed[t])]
            row.append(r.error or "")
            writer.writerow(row)
