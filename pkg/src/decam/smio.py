"""Artifact I/O: PNG images, the raw saliency-map format, and manifests.

Raw saliency files carry a 16-byte header (8-byte magic ``DECAMSM1`` plus
height and width as little-endian uint32) followed by H*W little-endian
float32 values in row-major order.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np
from PIL import Image

from .errors import SaliencyFormatError

SM_MAGIC = b"DECAMSM1"


def load_image(path) -> np.ndarray:
    """8-bit grayscale or RGB PNG -> (H, W, C) float64 in [0, 1]."""
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            raise ValueError(
                f"unsupported image mode {img.mode!r}: expected 8-bit L or RGB"
            )
        arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def save_image(path, array: np.ndarray):
    """(H, W) or (H, W, C) floats in [0, 1] -> 8-bit PNG."""
    data = np.round(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    mode = "L" if data.ndim == 2 else "RGB"
    Image.fromarray(data, mode).save(path, format="PNG")


def write_sm_raw(path, values: np.ndarray):
    values = np.asarray(values, dtype=np.float64)
    height, width = values.shape
    with open(path, "wb") as fh:
        fh.write(SM_MAGIC)
        fh.write(struct.pack("<II", height, width))
        fh.write(values.astype("<f4").tobytes())


def read_sm_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:8] != SM_MAGIC:
        raise SaliencyFormatError(f"{path}: bad magic header")
    height, width = struct.unpack("<II", blob[8:16])
    want = 16 + 4 * height * width
    if len(blob) != want:
        raise SaliencyFormatError(
            f"{path}: size mismatch (header says {height}x{width}, "
            f"expected {want} bytes, found {len(blob)})"
        )
    values = np.frombuffer(blob[16:], dtype="<f4").astype(np.float64)
    return values.reshape(height, width)


def write_sm_png(path, values: np.ndarray):
    save_image(path, values)


def write_overlay_png(path, image: np.ndarray, values: np.ndarray):
    """Saliency alpha-blended over the input at 50%."""
    sal = values[:, :, None]
    blend = 0.5 * image + 0.5 * sal
    save_image(path, blend)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, entries: dict):
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")
