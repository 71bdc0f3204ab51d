"""Versioned, checksummed binary checkpoints.

Byte layout (all integers little-endian)::

    8 bytes   magic  b"CMHRNNCK"
    uint32    format version (currently 1)
    uint32    header length L
    L bytes   UTF-8 JSON header: {"config": TierConfig.to_dict(), "meta": {...}}
    uint32    parameter count P
    P times:
        uint16    name length n, then n bytes UTF-8 name
        uint8     ndim d, then d x uint32 dims
        prod(dims) x float64 values, C order
    32 bytes  SHA-256 of every preceding byte

Parameters are written in :func:`cmhrnn.hrnn.param_shapes` order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .hrnn import TierConfig, param_shapes, validate_config

MAGIC = b"CMHRNNCK"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class ChecksumError(CheckpointError):
    pass


class VersionError(CheckpointError):
    pass


def dumps_params(cfg: TierConfig, params: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    header = json.dumps({"config": cfg.to_dict(), "meta": meta or {}}, sort_keys=True).encode()
    order = list(param_shapes(cfg))
    if set(order) != set(params):
        raise CheckpointError("parameter names do not match the configuration")
    out = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header, struct.pack("<I", len(order))]
    for name in order:
        a = np.ascontiguousarray(params[name], dtype="<f8")
        nb = name.encode()
        out.append(struct.pack("<H", len(nb)) + nb)
        out.append(struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
        out.append(a.tobytes())
    body = b"".join(out)
    return body + hashlib.sha256(body).digest()


def loads_params(blob: bytes) -> tuple[TierConfig, dict[str, np.ndarray], dict]:
    if len(blob) < len(MAGIC) + 8 + 32 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    body, digest = blob[:-32], blob[-32:]
    version, hlen = struct.unpack_from("<II", body, len(MAGIC))
    if version != FORMAT_VERSION:
        raise VersionError(f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})")
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError("checkpoint checksum mismatch (file is corrupted)")
    pos = len(MAGIC) + 8
    header = json.loads(body[pos : pos + hlen])
    pos += hlen
    cfg = validate_config(TierConfig.from_dict(header["config"]))
    (count,) = struct.unpack_from("<I", body, pos)
    pos += 4
    params = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos : pos + n].decode()
        pos += n
        (ndim,) = struct.unpack_from("<B", body, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", body, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        params[name] = np.frombuffer(body, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
        pos += 8 * size
    expected = param_shapes(cfg)
    for name, shape in expected.items():
        if name not in params or params[name].shape != shape:
            raise CheckpointError(f"parameter {name} missing or misshapen")
    return cfg, params, header.get("meta", {})


def save_params(path, cfg: TierConfig, params: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    path = Path(path)
    path.write_bytes(dumps_params(cfg, params, meta))
    return path


def load_params(path) -> tuple[TierConfig, dict[str, np.ndarray], dict]:
    return loads_params(Path(path).read_bytes())
