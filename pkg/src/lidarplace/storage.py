"""On-disk formats: dense tensor files, weight checkpoints, descriptor sets.

All formats open with an 8-byte magic, then a length-prefixed JSON header
(sorted keys, so identical content serializes byte-identically), then raw
little-endian data. Every file carries the config hash of the run that
produced it.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .network import NetConfig, NetworkWeights

TENSOR_MAGIC = b"LPTENS1\n"
CKPT_MAGIC = b"LPCKPT1\n"
DESC_MAGIC = b"LPDESC1\n"
CKPT_VERSION = 1


def _write_header(f, magic: bytes, header: dict) -> None:
    f.write(magic)
    blob = json.dumps(header, sort_keys=True).encode()
    f.write(struct.pack("<I", len(blob)))
    f.write(blob)


def _read_header(f, magic: bytes, path) -> dict:
    got = f.read(len(magic))
    if got != magic:
        raise ValueError(f"{path!s}: bad magic {got!r}, expected {magic!r}")
    (n,) = struct.unpack("<I", f.read(4))
    return json.loads(f.read(n).decode())


def save_tensor(path, grid: np.ndarray, channels, config_hash: str = "") -> None:
    """Dense float32 tensor with named channels."""
    grid = np.asarray(grid)
    if len(channels) != grid.shape[0]:
        raise ValueError("one channel name per leading-axis slice required")
    header = {
        "shape": list(grid.shape),
        "channels": list(channels),
        "dtype": "<f4",
        "config": config_hash,
    }
    with open(path, "wb") as f:
        _write_header(f, TENSOR_MAGIC, header)
        f.write(np.ascontiguousarray(grid, dtype="<f4").tobytes())


def load_tensor(path):
    """Returns (float64 array, channel names, config hash)."""
    with open(path, "rb") as f:
        header = _read_header(f, TENSOR_MAGIC, path)
        shape = tuple(header["shape"])
        count = int(np.prod(shape))
        data = np.frombuffer(f.read(count * 4), dtype="<f4")
    if data.size != count:
        raise ValueError(f"{path!s}: truncated tensor payload")
    return data.astype(np.float64).reshape(shape), header["channels"], header["config"]


def save_checkpoint(path, weights: NetworkWeights) -> None:
    """Named float64 parameter list, guarded by the network config hash."""
    names = list(weights.params.keys())
    header = {
        "version": CKPT_VERSION,
        "config": weights.config.config_hash(),
        "names": names,
        "shapes": {n: list(weights.params[n].shape) for n in names},
    }
    with open(path, "wb") as f:
        _write_header(f, CKPT_MAGIC, header)
        for n in names:
            f.write(np.ascontiguousarray(weights.params[n], dtype="<f8").tobytes())


def load_checkpoint(path, cfg: NetConfig) -> NetworkWeights:
    """Load parameters; the stored config hash must match ``cfg``."""
    with open(path, "rb") as f:
        header = _read_header(f, CKPT_MAGIC, path)
        if header["version"] != CKPT_VERSION:
            raise ValueError(f"{path!s}: unsupported checkpoint version {header['version']}")
        if header["config"] != cfg.config_hash():
            raise ValueError(
                f"{path!s}: checkpoint was built for config {header['config']}, "
                f"current config hashes to {cfg.config_hash()}")
        params = {}
        for n in header["names"]:
            shape = tuple(header["shapes"][n])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(f.read(count * 8), dtype="<f8")
            if arr.size != count:
                raise ValueError(f"{path!s}: truncated parameter {n}")
            params[n] = arr.reshape(shape).copy()
    return NetworkWeights(params, cfg)


def save_descriptors(path, frame_ids, matrix: np.ndarray, config_hash: str = "") -> None:
    """Float64 descriptor rows, one per frame id."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(frame_ids):
        raise ValueError("matrix must be (len(frame_ids), dim)")
    header = {
        "config": config_hash,
        "dim": int(matrix.shape[1]),
        "frame_ids": list(frame_ids),
    }
    with open(path, "wb") as f:
        _write_header(f, DESC_MAGIC, header)
        f.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def load_descriptors(path):
    """Returns (frame_ids, (N, D) float64 matrix, config hash)."""
    with open(path, "rb") as f:
        header = _read_header(f, DESC_MAGIC, path)
        ids = header["frame_ids"]
        dim = int(header["dim"])
        data = np.frombuffer(f.read(len(ids) * dim * 8), dtype="<f8")
    if data.size != len(ids) * dim:
        raise ValueError(f"{path!s}: truncated descriptor payload")
    return ids, data.reshape(len(ids), dim).copy(), header["config"]
