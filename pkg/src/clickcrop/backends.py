"""Segmentor/refiner backend contracts and the test backends that exercise them.

A backend consumes fixed-resolution crops and emits logits; it never sees
global coordinates except through the optional CropSpec metadata, which the
oracle backends use to resample ground truth into the crop frame. Real
(exported) models ignore that metadata entirely.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.special import expit

from .crops import CropSpec, crop_resize
from .raster import as_mask, resize, xor_diff

ORACLE_LOGIT = 10.0
FEATURE_STRIDE = 4


@dataclass
class SegmentorInput:
    """Crop-frame tensors for the coarse segmentor; all share one resolution."""

    image: np.ndarray       # (h, w, 3) float32 in [0, 1]
    prev_mask: np.ndarray   # (h, w) float32 in {0, 1}
    pos_clicks: np.ndarray  # (h, w) float32 in {0, 1}
    neg_clicks: np.ndarray  # (h, w) float32 in {0, 1}
    crop: CropSpec | None = None

    def validate(self) -> None:
        shape = self.prev_mask.shape
        if self.image.shape[:2] != shape or self.pos_clicks.shape != shape or self.neg_clicks.shape != shape:
            raise ValueError(
                "segmentor input tensors disagree on resolution: "
                f"image {self.image.shape}, prev {self.prev_mask.shape}, "
                f"pos {self.pos_clicks.shape}, neg {self.neg_clicks.shape}"
            )


@dataclass
class CoarseOutput:
    logits: np.ndarray   # (h, w) float32
    feature: np.ndarray  # (C, h/stride, w/stride) float32


@dataclass
class RefineOutput:
    detail: np.ndarray    # (h, w) float32
    boundary: np.ndarray  # (h, w) float32


def mask_logits(mask: np.ndarray, scale: float = ORACLE_LOGIT) -> np.ndarray:
    return np.where(as_mask(mask), scale, -scale).astype(np.float32)


def prob_logits(p: np.ndarray, scale: float = ORACLE_LOGIT) -> np.ndarray:
    """Log-odds of a probability map, saturating at +-scale."""
    lo = expit(-scale)
    p = np.clip(p, lo, 1.0 - lo)
    return np.log(p / (1.0 - p)).astype(np.float32)


def fuse(boundary: np.ndarray, detail: np.ndarray, coarse: np.ndarray) -> np.ndarray:
    """Blend detail into coarse logits wherever the boundary gate opens.

    refined = sigmoid(boundary) * detail + (1 - sigmoid(boundary)) * coarse
    """
    if boundary.shape != detail.shape or boundary.shape != coarse.shape:
        raise ValueError(
            f"fusion inputs disagree: boundary {boundary.shape}, detail {detail.shape}, coarse {coarse.shape}"
        )
    gate = expit(np.asarray(boundary, dtype=np.float64))
    out = gate * np.asarray(detail, np.float64) + (1.0 - gate) * np.asarray(coarse, np.float64)
    return out.astype(np.float32)


def boundary_target(gt: np.ndarray, factor: int = 8) -> np.ndarray:
    """Pixels that do not survive a factor-x nearest down/up round trip.

    Marks the band around mask boundaries where fine detail lives; constant
    masks and block-aligned patterns produce an empty target.
    """
    gt = as_mask(gt)
    h, w = gt.shape
    dw, dh = max(1, w // factor), max(1, h // factor)
    small = resize(gt, (dw, dh), mode="nearest")
    back = resize(small, (w, h), mode="nearest")
    return xor_diff(gt, back)


def make_feature_stack(logits: np.ndarray, image: np.ndarray, pos: np.ndarray, neg: np.ndarray) -> np.ndarray:
    """Stride-4 stand-in feature pyramid so RoIAlign plumbing runs without a real network."""
    h, w = logits.shape
    fw, fh = max(1, w // FEATURE_STRIDE), max(1, h // FEATURE_STRIDE)
    gray = image.mean(axis=2) if image.ndim == 3 else image
    channels = [
        resize(np.asarray(c, np.float32), (fw, fh), mode="bilinear")
        for c in (logits, gray, pos, neg)
    ]
    return np.stack(channels).astype(np.float32)


class Backend:
    """Contract shared by all backends; subclasses implement the two stages."""

    name = "base"

    def segment(self, inp: SegmentorInput) -> CoarseOutput:
        raise NotImplementedError

    def refine(
        self,
        image_crop: np.ndarray,
        click_crops: tuple[np.ndarray, np.ndarray],
        roi_feature: np.ndarray,
        roi_logits: np.ndarray,
        crop: CropSpec | None = None,
    ) -> RefineOutput:
        raise NotImplementedError


class ConstantBackend(Backend):
    """Predicts one logit value everywhere; `fill=False` never segments anything."""

    name = "constant"

    def __init__(self, fill: bool = False):
        self.value = ORACLE_LOGIT if fill else -ORACLE_LOGIT

    def segment(self, inp: SegmentorInput) -> CoarseOutput:
        inp.validate()
        logits = np.full(inp.prev_mask.shape, self.value, dtype=np.float32)
        return CoarseOutput(logits, make_feature_stack(logits, inp.image, inp.pos_clicks, inp.neg_clicks))

    def refine(self, image_crop, click_crops, roi_feature, roi_logits, crop=None) -> RefineOutput:
        shape = roi_logits.shape
        # Closed gate: fusion falls through to the coarse logits.
        return RefineOutput(
            detail=np.full(shape, self.value, dtype=np.float32),
            boundary=np.full(shape, -ORACLE_LOGIT, dtype=np.float32),
        )


class OracleBackend(Backend):
    """Emits ground-truth-derived logits, isolating pipeline logic from any model."""

    name = "oracle"

    def __init__(self, gt: np.ndarray):
        self.gt = as_mask(gt).copy()

    def _gt_crop(self, crop: CropSpec | None, shape: tuple[int, int]) -> np.ndarray:
        if crop is None:
            raise ValueError("oracle backends need the crop geometry to resample ground truth")
        out = crop_resize(self.gt, crop)
        if out.shape != shape:
            raise ValueError(f"crop geometry {crop.to_json()} yields {out.shape}, input tensors are {shape}")
        return out

    def segment(self, inp: SegmentorInput) -> CoarseOutput:
        inp.validate()
        logits = mask_logits(self._gt_crop(inp.crop, inp.prev_mask.shape))
        return CoarseOutput(logits, make_feature_stack(logits, inp.image, inp.pos_clicks, inp.neg_clicks))

    def refine(self, image_crop, click_crops, roi_feature, roi_logits, crop=None) -> RefineOutput:
        gt_crop = self._gt_crop(crop, roi_logits.shape)
        return RefineOutput(
            detail=mask_logits(gt_crop),
            boundary=mask_logits(boundary_target(gt_crop)),
        )


class NoisyOracleBackend(OracleBackend):
    """Oracle degraded by a boundary blur and occasional spurious foreground blobs.

    Blur radius is in crop pixels; blobs only affect the coarse stage, the
    refiner stays blob-free but keeps the blurred boundary. With radius 0 and
    blob rate 0 this is exactly the oracle.
    """

    name = "noisy"

    def __init__(self, gt, blur_radius: int = 0, blob_rate: float = 0.0, rng: np.random.Generator | None = None):
        super().__init__(gt)
        if not 0.0 <= blob_rate <= 1.0:
            raise ValueError(f"blob rate must be in [0, 1], got {blob_rate}")
        self.blur_radius = int(blur_radius)
        self.blob_rate = float(blob_rate)
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def _blurred(self, gt_crop: np.ndarray) -> np.ndarray:
        p = gt_crop.astype(np.float64)
        if self.blur_radius > 0:
            p = ndimage.uniform_filter(p, size=2 * self.blur_radius + 1, mode="nearest")
        return p

    def _maybe_blob(self, p: np.ndarray) -> np.ndarray:
        if self.blob_rate <= 0.0 or self.rng.random() >= self.blob_rate:
            return p
        h, w = p.shape
        cx, cy, sx, sy = self.rng.random(4)
        rx = (0.05 + 0.08 * sx) * w
        ry = (0.05 + 0.08 * sy) * h
        yy, xx = np.mgrid[0:h, 0:w]
        blob = ((xx - cx * w) / rx) ** 2 + ((yy - cy * h) / ry) ** 2 <= 1.0
        return np.where(blob, 1.0, p)

    def segment(self, inp: SegmentorInput) -> CoarseOutput:
        inp.validate()
        p = self._maybe_blob(self._blurred(self._gt_crop(inp.crop, inp.prev_mask.shape)))
        logits = prob_logits(p)
        return CoarseOutput(logits, make_feature_stack(logits, inp.image, inp.pos_clicks, inp.neg_clicks))

    def refine(self, image_crop, click_crops, roi_feature, roi_logits, crop=None) -> RefineOutput:
        gt_crop = self._gt_crop(crop, roi_logits.shape)
        return RefineOutput(
            detail=prob_logits(self._blurred(gt_crop)),
            boundary=mask_logits(boundary_target(gt_crop)),
        )


class ExternalBackend(Backend):
    """Runs exported segmentor/refiner models through an ONNX inference session."""

    name = "external"

    def __init__(self, model_path: str | Path, io_spec: dict):
        try:
            import onnxruntime  # noqa: F401
        except ImportError as e:
            raise RuntimeError(
                "onnxruntime is required for external backends; install it or use "
                "the oracle/noisy/constant test backends"
            ) from e
        model_path = Path(model_path)
        if not model_path.exists():
            raise FileNotFoundError(f"model file not found: {model_path}")
        self.io_spec = io_spec
        self.layout = io_spec.get("layout", "NCHW")
        if self.layout != "NCHW":
            raise ValueError(f"unsupported layout {self.layout!r}; expected NCHW")
        norm = io_spec.get("normalization", {})
        self.norm_mean = np.asarray(norm.get("mean", [0.0, 0.0, 0.0]), np.float32).reshape(3, 1, 1)
        self.norm_std = np.asarray(norm.get("std", [1.0, 1.0, 1.0]), np.float32).reshape(3, 1, 1)
        self._seg = onnxruntime.InferenceSession(str(model_path), providers=["CPUExecutionProvider"])
        ref_path = io_spec.get("refiner", {}).get("path")
        if ref_path:
            ref_path = Path(ref_path)
            if not ref_path.is_absolute():
                ref_path = model_path.parent / ref_path
            if not ref_path.exists():
                raise FileNotFoundError(f"refiner model file not found: {ref_path}")
            self._ref = onnxruntime.InferenceSession(str(ref_path), providers=["CPUExecutionProvider"])
        else:
            self._ref = None
        self._dry_run()

    def _tensor_names(self, stage: str, kind: str) -> dict:
        spec = self.io_spec.get(stage, {}).get(kind)
        if not spec:
            raise ValueError(f"io_spec missing {stage}.{kind} tensor names")
        return spec

    def _dry_run(self) -> None:
        res = int(self.io_spec.get("segmentor", {}).get("input_size", 256))
        zeros = SegmentorInput(
            image=np.zeros((res, res, 3), np.float32),
            prev_mask=np.zeros((res, res), np.float32),
            pos_clicks=np.zeros((res, res), np.float32),
            neg_clicks=np.zeros((res, res), np.float32),
        )
        out = self.segment(zeros)
        if not (np.isfinite(out.logits).all() and np.isfinite(out.feature).all()):
            raise ValueError("dry run produced non-finite outputs")

    def _run(self, session, feeds: dict, out_names: list[str]) -> list[np.ndarray]:
        return session.run(out_names, feeds)

    def segment(self, inp: SegmentorInput) -> CoarseOutput:
        inp.validate()
        names = self._tensor_names("segmentor", "inputs")
        outs = self._tensor_names("segmentor", "outputs")
        chw = np.transpose(inp.image, (2, 0, 1)).astype(np.float32)
        chw = (chw - self.norm_mean) / self.norm_std
        feeds = {
            names["image"]: chw[None],
            names["prev_mask"]: inp.prev_mask[None, None].astype(np.float32),
            names["pos_clicks"]: inp.pos_clicks[None, None].astype(np.float32),
            names["neg_clicks"]: inp.neg_clicks[None, None].astype(np.float32),
        }
        logits, feature = self._run(self._seg, feeds, [outs["logits"], outs["feature"]])
        if logits.ndim != 4 or logits.shape[:2] != (1, 1):
            raise ValueError(f"segmentor logits: expected shape (1,1,h,w), got {logits.shape}")
        if feature.ndim != 4:
            raise ValueError(f"segmentor feature: expected rank 4, got shape {feature.shape}")
        return CoarseOutput(logits[0, 0].astype(np.float32), feature[0].astype(np.float32))

    def refine(self, image_crop, click_crops, roi_feature, roi_logits, crop=None) -> RefineOutput:
        if self._ref is None:
            raise ValueError("io_spec declares no refiner model")
        names = self._tensor_names("refiner", "inputs")
        outs = self._tensor_names("refiner", "outputs")
        chw = np.transpose(image_crop, (2, 0, 1)).astype(np.float32)
        chw = (chw - self.norm_mean) / self.norm_std
        feeds = {
            names["image"]: chw[None],
            names["pos_clicks"]: click_crops[0][None, None].astype(np.float32),
            names["neg_clicks"]: click_crops[1][None, None].astype(np.float32),
            names["roi_feature"]: roi_feature[None].astype(np.float32),
            names["roi_logits"]: roi_logits[None, None].astype(np.float32),
        }
        detail, boundary = self._run(self._ref, feeds, [outs["detail"], outs["boundary"]])
        if detail.ndim != 4 or boundary.ndim != 4:
            raise ValueError(
                f"refiner outputs: expected rank 4, got detail {detail.shape}, boundary {boundary.shape}"
            )
        return RefineOutput(detail[0, 0].astype(np.float32), boundary[0, 0].astype(np.float32))


def load_external_backend(model_path: str | Path, io_spec: str | Path | dict) -> ExternalBackend:
    """Load an exported model pair described by an io_spec JSON document."""
    if not isinstance(io_spec, dict):
        io_spec = json.loads(Path(io_spec).read_text())
    return ExternalBackend(model_path, io_spec)


def create_backend(
    name: str,
    gt: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    noise_blur: int = 2,
    noise_blob_rate: float = 0.2,
    model_path: str | Path | None = None,
    io_spec: str | Path | dict | None = None,
) -> Backend:
    """Instantiate a backend by name: oracle | noisy | constant | external."""
    key = name.lower()
    if key in ("oracle", "noisy") and gt is None:
        raise ValueError(f"{key} backend requires a ground-truth mask")
    if key == "oracle":
        return OracleBackend(gt)
    if key == "noisy":
        return NoisyOracleBackend(gt, blur_radius=noise_blur, blob_rate=noise_blob_rate, rng=rng)
    if key == "constant":
        return ConstantBackend(fill=False)
    if key == "external":
        if model_path is None:
            raise ValueError("external backend requires --model")
        return load_external_backend(model_path, io_spec or {})
    raise KeyError(f"unknown backend {name!r}; expected oracle, noisy, constant, or external")
