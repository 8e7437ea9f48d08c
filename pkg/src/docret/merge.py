"""Checkpoint merging: linear interpolation and SLERP over named tensors.

Container format: magic `M3DRTNSR`, an 8-byte little-endian header
length, a JSON header mapping tensor name -> {dtype, shape, offset,
length} (offsets relative to the data region), then the contiguous
little-endian float32 data region. Writers emit tensors sorted by name.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict

import numpy as np

from .errors import BadMagic, CorruptHeader, SchemaMismatch, TruncatedData, ZeroTensor

MAGIC = b"M3DRTNSR"


@dataclass
class CheckpointTensors:
    tensors: Dict[str, np.ndarray]  # name -> float32 array

    def schema(self) -> Dict[str, tuple]:
        return {name: tuple(t.shape) for name, t in self.tensors.items()}


@dataclass(frozen=True)
class MergeConfig:
    method: str = "slerp"  # "linear" | "slerp"
    alpha: float = 0.5
    parallel_threshold: float = 1e-7
    magnitude: str = "interpolate"  # "interpolate" | "keep-a"

    def __post_init__(self):
        if self.method not in ("linear", "slerp"):
            raise ValueError(f"unknown merge method {self.method!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0,1], got {self.alpha}")


def save_checkpoint(path, ckpt: CheckpointTensors) -> None:
    names = sorted(ckpt.tensors)
    header: Dict[str, dict] = {}
    offset = 0
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(ckpt.tensors[name], dtype="<f4")
        blob = arr.tobytes()
        header[name] = {
            "dtype": "f32",
            "shape": list(arr.shape),
            "offset": offset,
            "length": len(blob),
        }
        blobs.append(blob)
        offset += len(blob)
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> CheckpointTensors:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise BadMagic(f"{path}: bad magic {data[:8]!r}")
    if len(data) < 16:
        raise CorruptHeader(f"{path}: file shorter than header length field")
    (header_len,) = struct.unpack_from("<Q", data, 8)
    header_end = 16 + header_len
    if header_end > len(data):
        raise CorruptHeader(f"{path}: declared header length {header_len} past end of file")
    try:
        header = json.loads(data[16:header_end].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptHeader(f"{path}: unreadable header: {exc}") from exc
    region = data[header_end:]
    tensors: Dict[str, np.ndarray] = {}
    for name, spec in header.items():
        if spec.get("dtype") != "f32":
            raise CorruptHeader(f"{path}: unsupported dtype {spec.get('dtype')!r} for {name!r}")
        shape = tuple(int(s) for s in spec["shape"])
        offset, length = int(spec["offset"]), int(spec["length"])
        expected = int(np.prod(shape)) * 4 if shape else 4
        if length != expected:
            raise CorruptHeader(
                f"{path}: tensor {name!r} declares {length} bytes for shape {shape}"
            )
        if offset + length > len(region):
            raise TruncatedData(f"{path}: tensor {name!r} extends past end of file")
        arr = np.frombuffer(region, dtype="<f4", count=length // 4, offset=offset)
        tensors[name] = arr.reshape(shape).copy()
    return CheckpointTensors(tensors)


def _check_schemas(a: CheckpointTensors, b: CheckpointTensors) -> None:
    sa, sb = a.schema(), b.schema()
    if sa != sb:
        only_a = sorted(set(sa) - set(sb))
        only_b = sorted(set(sb) - set(sa))
        shape_diff = sorted(n for n in set(sa) & set(sb) if sa[n] != sb[n])
        raise SchemaMismatch(
            f"schemas differ: only-in-a={only_a}, only-in-b={only_b}, shape-mismatch={shape_diff}"
        )


def merge_linear(a: CheckpointTensors, b: CheckpointTensors, alpha: float) -> CheckpointTensors:
    """Elementwise alpha * a + (1 - alpha) * b; alpha=1 returns a."""
    _check_schemas(a, b)
    out = {}
    for name in a.tensors:
        ta = a.tensors[name].astype(np.float64)
        tb = b.tensors[name].astype(np.float64)
        out[name] = (alpha * ta + (1.0 - alpha) * tb).astype(np.float32)
    return CheckpointTensors(out)


def merge_slerp(
    a: CheckpointTensors,
    b: CheckpointTensors,
    alpha: float,
    parallel_threshold: float = 1e-7,
    magnitude: str = "interpolate",
) -> CheckpointTensors:
    """Per-tensor spherical interpolation on the flattened vectors.

    Directions follow the geodesic between the unit tensors; magnitudes
    are interpolated linearly (or kept from `a`). alpha=0 yields tensor a
    and alpha=1 tensor b. Near-parallel tensors fall back to linear
    interpolation (which uses the opposite alpha convention: alpha
    weights a there).
    """
    _check_schemas(a, b)
    out = {}
    for name in a.tensors:
        ta = a.tensors[name].astype(np.float64).ravel()
        tb = b.tensors[name].astype(np.float64).ravel()
        na, nb = np.linalg.norm(ta), np.linalg.norm(tb)
        if na == 0.0 or nb == 0.0:
            raise ZeroTensor(f"tensor {name!r} has zero norm")
        ua, ub = ta / na, tb / nb
        omega = np.arccos(np.clip(np.dot(ua, ub), -1.0, 1.0))
        if np.sin(omega) < parallel_threshold:
            merged = alpha * ta + (1.0 - alpha) * tb
        else:
            direction = (
                np.sin((1.0 - alpha) * omega) * ua + np.sin(alpha * omega) * ub
            ) / np.sin(omega)
            mag = na if magnitude == "keep-a" else (1.0 - alpha) * na + alpha * nb
            merged = mag * direction
        out[name] = merged.astype(np.float32).reshape(a.tensors[name].shape)
    return CheckpointTensors(out)


def merge(a: CheckpointTensors, b: CheckpointTensors, config: MergeConfig) -> CheckpointTensors:
    if config.method == "linear":
        return merge_linear(a, b, config.alpha)
    return merge_slerp(a, b, config.alpha, config.parallel_threshold, config.magnitude)
