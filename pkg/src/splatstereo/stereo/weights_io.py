"""Loadable network weights: JSON manifest + raw little-endian blobs.

A weights bundle is a manifest.json next to a weights.bin. The manifest
lists tensors (name, shape, dtype) in blob order plus optional layer
descriptors; the blob is the concatenation of the tensors' little-endian
bytes. This keeps externally trained encoders importable without coupling
to any training framework.

Layer descriptors drive a small sequential executor supporting 2D
convolutions (stride 1/2, zero 'same' padding), relu/tanh/sigmoid
activations and named taps for multi-scale outputs. Convolution tensors
are named <layer>.weight with shape (out_ch, in_ch, kh, kw) and optional
<layer>.bias (out_ch,).
"""

import json
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import WeightLoadError

_DTYPES = {"float32": np.float32, "float64": np.float64}


def save_weights(path_prefix, tensors: dict, layers: list | None = None) -> tuple[Path, Path]:
    """Write manifest.json / weights.bin for a name->array mapping."""
    prefix = Path(path_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    manifest = {"tensors": [], "layers": layers or []}
    blob = bytearray()
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=np.float32)
        manifest["tensors"].append(
            {"name": name, "shape": list(arr.shape), "dtype": "float32"}
        )
        blob.extend(arr.astype("<f4").tobytes())
    manifest_path = prefix.with_suffix(".json")
    blob_path = prefix.with_suffix(".bin")
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    blob_path.write_bytes(bytes(blob))
    return manifest_path, blob_path


class WeightsBundle:
    """Parsed weights file: tensors by name plus layer descriptors."""

    def __init__(self, tensors: dict, layers: list):
        self.tensors = tensors
        self.layers = layers

    @classmethod
    def load(cls, manifest_path) -> "WeightsBundle":
        manifest_path = Path(manifest_path)
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise WeightLoadError(f"cannot read manifest {manifest_path}: {exc}") from exc
        blob_path = manifest_path.with_suffix(".bin")
        try:
            raw = blob_path.read_bytes()
        except OSError as exc:
            raise WeightLoadError(f"cannot read blob {blob_path}: {exc}") from exc

        tensors = {}
        offset = 0
        for entry in manifest.get("tensors", []):
            dtype = _DTYPES.get(entry.get("dtype", "float32"))
            if dtype is None:
                raise WeightLoadError(f"unsupported dtype {entry.get('dtype')!r}")
            shape = tuple(int(s) for s in entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            nbytes = count * np.dtype(dtype).itemsize
            if offset + nbytes > len(raw):
                raise WeightLoadError(
                    f"blob too short for tensor {entry['name']!r} "
                    f"(need {offset + nbytes} bytes, have {len(raw)})"
                )
            flat = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<"), count=count, offset=offset)
            tensors[entry["name"]] = flat.reshape(shape).astype(np.float64)
            offset += nbytes
        if offset != len(raw):
            raise WeightLoadError(f"blob has {len(raw) - offset} trailing bytes")
        return cls(tensors, manifest.get("layers", []))

    def tensor(self, name: str, expect_shape: tuple | None = None) -> np.ndarray:
        if name not in self.tensors:
            raise WeightLoadError(f"missing tensor {name!r}")
        t = self.tensors[name]
        if expect_shape is not None and tuple(t.shape) != tuple(expect_shape):
            raise WeightLoadError(
                f"tensor {name!r} has shape {tuple(t.shape)}, expected {tuple(expect_shape)}"
            )
        return t


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None, stride: int = 1) -> np.ndarray:
    """'Same'-padded 2D convolution on an HWC array (cross-correlation)."""
    out_ch, in_ch, kh, kw = weight.shape
    if x.shape[2] != in_ch:
        raise WeightLoadError(f"conv expects {in_ch} input channels, got {x.shape[2]}")
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
    windows = sliding_window_view(xp, (kh, kw), axis=(0, 1))[::stride, ::stride]
    out = np.einsum("hwcij,ocij->hwo", windows, weight, optimize=True)
    if bias is not None:
        out = out + bias
    return out


_ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
    "sigmoid": lambda x: 1.0 / (1.0 + np.exp(-x)),
    "none": lambda x: x,
}


def run_layers(bundle: WeightsBundle, x: np.ndarray, taps: tuple = ()) -> dict:
    """Run the bundle's layer stack on an HWC input.

    Returns {tap_name: array} for requested taps plus "out" for the final
    activation output.
    """
    outputs = {}
    for layer in bundle.layers:
        if layer.get("type", "conv") != "conv":
            raise WeightLoadError(f"unsupported layer type {layer.get('type')!r}")
        name = layer["name"]
        weight = bundle.tensor(f"{name}.weight")
        bias = bundle.tensors.get(f"{name}.bias")
        x = conv2d(x, weight, bias, stride=int(layer.get("stride", 1)))
        act = layer.get("activation", "none")
        if act not in _ACTIVATIONS:
            raise WeightLoadError(f"unknown activation {act!r}")
        x = _ACTIVATIONS[act](x)
        tap = layer.get("tap")
        if tap:
            outputs[tap] = x
    outputs["out"] = x
    missing = [t for t in taps if t not in outputs]
    if missing:
        raise WeightLoadError(f"weights file provides no taps {missing}")
    return outputs
