"""Binary tensor blobs and JSON model manifests.

Blob layout (all little-endian)::

    offset  size        field
    0       4           magic b"CNRM"
    4       2  u16      version (1)
    6       1  u8       dtype code: 0 = float64, 1 = float32
    7       1  u8       ndim
    8       4*ndim u32  dims
    ...     prod(dims) * itemsize   row-major payload

A manifest is a JSON document::

    {"schema": "convnorm-manifest/1",
     "layers": [
       {"name": "conv1", "kind": "conv2d", "kernel": "conv1.cnrm",
        "input": [32, 32], "stride": [1, 1], "padding": [1, 1],
        "shape": [16, 3, 3, 3]},
       {"name": "fc", "kind": "dense", "weight": "fc.cnrm"},
       {"name": "bn1", "kind": "batchnorm", "gamma": "g.cnrm", "sigma": "s.cnrm"}]}

Blob paths are relative to the manifest's directory. ``shape`` is optional;
when present it must match the blob.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import (
    BadMagic,
    BadVersion,
    BlobError,
    ConvNormError,
    ManifestParse,
    MissingBlob,
    ShapeMismatch,
    TruncatedPayload,
    UnsupportedDtype,
)
from .geometry import ConvGeometry
from .norms import Kernel4D

MAGIC = b"CNRM"
VERSION = 1
SCHEMA = "convnorm-manifest/1"

_HEADER = struct.Struct("<4sHBB")
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1}


def encode_blob(tensor) -> bytes:
    arr = np.asarray(tensor)
    code = _CODES.get(arr.dtype.newbyteorder("="))
    if code is None:
        raise UnsupportedDtype(f"cannot store dtype {arr.dtype}")
    if arr.ndim > 255:
        raise BlobError("too many dimensions")
    header = _HEADER.pack(MAGIC, VERSION, code, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()


def decode_blob(buf: bytes) -> np.ndarray:
    if len(buf) < _HEADER.size:
        raise TruncatedPayload(f"{len(buf)} bytes is shorter than the header")
    magic, version, code, ndim = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported blob version {version}")
    if code not in _DTYPES:
        raise UnsupportedDtype(f"unknown dtype code {code}")
    dims_end = _HEADER.size + 4 * ndim
    if len(buf) < dims_end:
        raise TruncatedPayload("header truncated inside the dims table")
    dims = struct.unpack_from(f"<{ndim}I", buf, _HEADER.size)
    dtype = _DTYPES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    got = len(buf) - dims_end
    if got < expected:
        raise TruncatedPayload(f"payload has {got} bytes, dims {dims} need {expected}")
    if got > expected:
        raise BlobError(f"{got - expected} trailing bytes after payload")
    arr = np.frombuffer(buf, dtype=dtype, offset=dims_end, count=expected // dtype.itemsize)
    return arr.reshape(dims).astype(dtype.newbyteorder("="))


def write_blob(path, tensor) -> None:
    Path(path).write_bytes(encode_blob(tensor))


def read_blob(path) -> np.ndarray:
    """Load a blob, keeping its stored dtype (float32 stays float32)."""
    return decode_blob(Path(path).read_bytes())


@dataclass(frozen=True)
class Conv2dLayer:
    name: str
    kernel: Kernel4D
    kind: str = "conv2d"


@dataclass(frozen=True)
class DenseLayer:
    name: str
    weight: np.ndarray
    kind: str = "dense"


@dataclass(frozen=True)
class BatchNormLayer:
    name: str
    gamma: np.ndarray
    sigma: np.ndarray
    kind: str = "batchnorm"


ModelLayer = Union[Conv2dLayer, DenseLayer, BatchNormLayer]


def _pair(entry: dict, key: str, default) -> tuple[int, int]:
    v = entry.get(key, default)
    if isinstance(v, int):
        return v, v
    if isinstance(v, list) and len(v) == 2 and all(isinstance(n, int) for n in v):
        return v[0], v[1]
    raise ManifestParse(f"{key!r} must be an int or a pair of ints, got {v!r}")


def _load(base: Path, entry: dict, key: str) -> np.ndarray:
    rel = entry.get(key)
    if not isinstance(rel, str):
        raise ManifestParse(f"layer {entry.get('name')!r}: missing blob path {key!r}")
    path = base / rel
    if not path.is_file():
        raise MissingBlob(f"layer {entry.get('name')!r}: {path} not found")
    return read_blob(path).astype(np.float64)


def _check_shape(entry: dict, arr: np.ndarray, ndim: int) -> None:
    name = entry.get("name")
    if arr.ndim != ndim:
        raise ShapeMismatch(f"layer {name!r}: expected {ndim}D blob, got shape {arr.shape}")
    declared = entry.get("shape")
    if declared is not None and tuple(declared) != arr.shape:
        raise ShapeMismatch(f"layer {name!r}: manifest says {tuple(declared)}, blob has {arr.shape}")


def _parse_layer(base: Path, n: int, entry) -> ModelLayer:
    if not isinstance(entry, dict):
        raise ManifestParse(f"layer #{n} is not an object")
    kind = entry.get("kind")
    name = entry.get("name", f"layer{n}")
    if kind == "conv2d":
        data = _load(base, entry, "kernel")
        _check_shape(entry, data, 4)
        if "input" not in entry:
            raise ManifestParse(f"layer {name!r}: conv2d needs 'input' dims")
        h_in, w_in = _pair(entry, "input", None)
        s1, s2 = _pair(entry, "stride", 1)
        p1, p2 = _pair(entry, "padding", 0)
        d_out, d_in, k1, k2 = data.shape
        try:
            geometry = ConvGeometry(d_in, d_out, h_in, w_in, k1, k2, s1, s2, p1, p2)
            return Conv2dLayer(name, Kernel4D(geometry, data))
        except ConvNormError as exc:
            raise ManifestParse(f"layer {name!r}: {exc}") from exc
    if kind == "dense":
        weight = _load(base, entry, "weight")
        _check_shape(entry, weight, 2)
        return DenseLayer(name, weight)
    if kind == "batchnorm":
        gamma = _load(base, entry, "gamma")
        sigma = _load(base, entry, "sigma")
        _check_shape(entry, gamma, 1)
        if sigma.shape != gamma.shape:
            raise ShapeMismatch(f"layer {name!r}: gamma {gamma.shape} vs sigma {sigma.shape}")
        return BatchNormLayer(name, gamma, sigma)
    raise ManifestParse(f"layer {name!r}: unknown kind {kind!r}")


def load_model(manifest_path) -> list:
    """Parse a manifest and its blobs into layers, in manifest order.

    Blob values are widened to float64.
    """
    path = Path(manifest_path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestParse(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise ManifestParse(f"{path}: expected schema {SCHEMA!r}")
    layers = doc.get("layers")
    if not isinstance(layers, list):
        raise ManifestParse(f"{path}: 'layers' must be a list")
    return [_parse_layer(path.parent, n, entry) for n, entry in enumerate(layers)]


def save_model(manifest_path, layers, dtype=np.float64) -> None:
    """Write ``layers`` as a manifest plus one blob per tensor next to it."""
    path = Path(manifest_path)
    base = path.parent
    stem = path.stem
    entries = []
    for layer in layers:
        prefix = f"{stem}.{layer.name}"
        if isinstance(layer, Conv2dLayer):
            g = layer.kernel.geometry
            write_blob(base / f"{prefix}.kernel.cnrm", layer.kernel.data.astype(dtype))
            entries.append({
                "name": layer.name,
                "kind": "conv2d",
                "kernel": f"{prefix}.kernel.cnrm",
                "input": [g.h_in, g.w_in],
                "stride": [g.s1, g.s2],
                "padding": [g.p1, g.p2],
                "shape": list(g.kernel_shape),
            })
        elif isinstance(layer, DenseLayer):
            write_blob(base / f"{prefix}.weight.cnrm", np.asarray(layer.weight).astype(dtype))
            entries.append({"name": layer.name, "kind": "dense", "weight": f"{prefix}.weight.cnrm",
                            "shape": list(np.shape(layer.weight))})
        elif isinstance(layer, BatchNormLayer):
            write_blob(base / f"{prefix}.gamma.cnrm", np.asarray(layer.gamma).astype(dtype))
            write_blob(base / f"{prefix}.sigma.cnrm", np.asarray(layer.sigma).astype(dtype))
            entries.append({"name": layer.name, "kind": "batchnorm",
                            "gamma": f"{prefix}.gamma.cnrm", "sigma": f"{prefix}.sigma.cnrm",
                            "shape": list(np.shape(layer.gamma))})
        else:
            raise TypeError(f"cannot serialize {type(layer).__name__}")
    path.write_text(json.dumps({"schema": SCHEMA, "layers": entries}, indent=2) + "\n")
