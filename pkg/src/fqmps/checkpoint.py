"""Versioned binary container for MPS states plus run metadata.

Layout (all integers little-endian):

    magic   8 bytes  b"FQMPS1\\n\\0"
    version u32
    meta    u64 length + UTF-8 JSON (model params, gauge, run bookkeeping)
    count   u32 number of tensors
    per tensor: u8 dtype code, u8 ndim, u64 * ndim shape, u64 byte length,
                raw C-order buffer
    crc32   u32 over everything after the magic

Round trips are bit-exact; truncation or single-byte corruption is caught
by the length and checksum checks.
"""

from __future__ import annotations

import io
import json
import os
import struct
import zlib
from dataclasses import asdict

import numpy as np

from .mpo import ModelParams
from .mps import Mps

MAGIC = b"FQMPS1\n\0"
VERSION = 1

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<c16")}
_DTYPE_CODES = {np.dtype("float64"): 0, np.dtype("complex128"): 1}


class CheckpointError(RuntimeError):
    """Unreadable, corrupt, or incompatible checkpoint file."""


def _meta_params(params: ModelParams | None) -> dict | None:
    return asdict(params) if params is not None else None


def save_state(path, state: Mps, params: ModelParams | None = None, extra: dict | None = None):
    """Serialize ``state`` (and optional metadata) to ``path`` atomically."""
    meta = {
        "center": state.center,
        "norm_log": state.norm_log,
        "n_sites": state.n_sites,
        "phys_dims": state.phys_dims,
        "model": _meta_params(params),
        "extra": extra or {},
    }
    body = io.BytesIO()
    body.write(struct.pack("<I", VERSION))
    meta_blob = json.dumps(meta, sort_keys=True).encode()
    body.write(struct.pack("<Q", len(meta_blob)))
    body.write(meta_blob)
    body.write(struct.pack("<I", len(state.tensors)))
    for t in state.tensors:
        arr = np.ascontiguousarray(t)
        if arr.dtype not in _DTYPE_CODES:
            arr = arr.astype(np.complex128)
        code = _DTYPE_CODES[arr.dtype]
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = le.tobytes()
        body.write(struct.pack("<BB", code, arr.ndim))
        body.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        body.write(struct.pack("<Q", len(raw)))
        body.write(raw)
    payload = body.getvalue()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))
    os.replace(tmp, path)


def load_state(path) -> tuple[Mps, ModelParams | None, dict]:
    """Read a checkpoint; returns ``(state, params, extra)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a state checkpoint")
    payload, tail = blob[len(MAGIC):-4], blob[-4:]
    (crc_stored,) = struct.unpack("<I", tail)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc_stored:
        raise CheckpointError(f"{path}: checksum mismatch (corrupt or truncated)")
    buf = io.BytesIO(payload)

    def take(fmt):
        size = struct.calcsize(fmt)
        raw = buf.read(size)
        if len(raw) != size:
            raise CheckpointError(f"{path}: unexpected end of file")
        return struct.unpack(fmt, raw)

    (version,) = take("<I")
    if version != VERSION:
        raise CheckpointError(
            f"{path}: format version {version} needs migration (supported: {VERSION})"
        )
    (meta_len,) = take("<Q")
    meta = json.loads(buf.read(meta_len).decode())
    (count,) = take("<I")
    tensors = []
    for _ in range(count):
        code, ndim = take("<BB")
        shape = take(f"<{ndim}Q")
        (nbytes,) = take("<Q")
        raw = buf.read(nbytes)
        if len(raw) != nbytes:
            raise CheckpointError(f"{path}: unexpected end of file")
        if code not in _DTYPES:
            raise CheckpointError(f"{path}: unknown dtype code {code}")
        arr = np.frombuffer(raw, dtype=_DTYPES[code]).reshape(shape).copy()
        tensors.append(arr)
    state = Mps(tensors, center=meta["center"], norm_log=meta["norm_log"])
    params = ModelParams(**meta["model"]) if meta.get("model") else None
    return state, params, meta.get("extra", {})


def checkpoint_info(path) -> dict:
    """Metadata of a checkpoint without materializing the tensors."""
    state, params, extra = load_state(path)
    return {
        "n_sites": state.n_sites,
        "phys_dims": state.phys_dims,
        "bond_dims": state.bond_dims,
        "center": state.center,
        "norm_log": state.norm_log,
        "model": _meta_params(params),
        "extra": extra,
    }
