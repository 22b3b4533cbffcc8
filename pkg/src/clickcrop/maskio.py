"""Serialization: masks as {0,255} single-channel PNG, scalar maps as raw float blobs."""
from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .raster import as_mask


def encode_mask_png(mask: np.ndarray) -> bytes:
    mask = as_mask(mask)
    img = Image.fromarray(mask.astype(np.uint8) * 255, mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_mask_png(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    arr = np.asarray(img.convert("L"))
    return arr >= 128


def save_mask_png(path: str | Path, mask: np.ndarray) -> None:
    Path(path).write_bytes(encode_mask_png(mask))


def load_mask_png(path: str | Path) -> np.ndarray:
    return decode_mask_png(Path(path).read_bytes())


def load_image_rgb(path: str | Path) -> np.ndarray:
    """Decode an image file to an HxWx3 uint8 RGB array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def decode_image_rgb(data: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))


def encode_image_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


# Debug-only scalar map blob: 8-byte little-endian (w, h) header + float32 rows.

def encode_scalar_blob(scalar_map: np.ndarray) -> bytes:
    a = np.asarray(scalar_map, dtype=np.float32)
    if a.ndim != 2:
        raise ValueError(f"scalar map must be 2D, got shape {a.shape}")
    h, w = a.shape
    return struct.pack("<II", w, h) + a.astype("<f4").tobytes(order="C")


def decode_scalar_blob(data: bytes) -> np.ndarray:
    if len(data) < 8:
        raise ValueError("blob too short for (w, h) header")
    w, h = struct.unpack("<II", data[:8])
    expected = 8 + 4 * w * h
    if len(data) != expected:
        raise ValueError(f"blob length {len(data)} != expected {expected} for {w}x{h}")
    return np.frombuffer(data[8:], dtype="<f4").reshape(h, w).copy()


def save_scalar_blob(path: str | Path, scalar_map: np.ndarray) -> None:
    Path(path).write_bytes(encode_scalar_blob(scalar_map))


def load_scalar_blob(path: str | Path) -> np.ndarray:
    return decode_scalar_blob(Path(path).read_bytes())
