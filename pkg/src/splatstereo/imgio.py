"""Image file I/O: 8-bit PNG/JPEG and raw float32 planar dumps."""

import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError


def to_uint8(image: np.ndarray) -> np.ndarray:
    return (np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def from_uint8(data: np.ndarray) -> np.ndarray:
    return np.asarray(data, dtype=np.float64) / 255.0


def save_png(path, image: np.ndarray) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(image)).save(str(path), format="PNG")


def load_image(path) -> np.ndarray:
    """Any PIL-readable image as float RGB in [0, 1]."""
    with Image.open(str(path)) as img:
        return from_uint8(np.asarray(img.convert("RGB")))


def load_mask(path) -> np.ndarray:
    with Image.open(str(path)) as img:
        return np.asarray(img.convert("L")) > 127


def encode_jpeg(image: np.ndarray, quality: int = 90) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(image)).save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(image)).save(buf, format="PNG")
    return buf.getvalue()


def save_raw_planar(path, image: np.ndarray) -> None:
    """Channel-planar little-endian float32 dump with a JSON sidecar."""
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise InvalidInputError(f"expected HxW or HxWxC image, got shape {arr.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    planar = np.ascontiguousarray(np.transpose(arr, (2, 0, 1)), dtype="<f4")
    planar.tofile(str(path))
    meta = {"width": arr.shape[1], "height": arr.shape[0], "channels": arr.shape[2], "dtype": "float32", "layout": "planar"}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta), encoding="utf-8")


def load_raw_planar(path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
    data = np.fromfile(str(path), dtype="<f4")
    arr = data.reshape(meta["channels"], meta["height"], meta["width"])
    return np.transpose(arr, (1, 2, 0)).astype(np.float64)
