"""Versioned binary container for named arrays.

Layout::

    magic      8 bytes   b"HRXCKPT\\x00"
    version    uint32 LE
    n_header   uint32 LE  length of the JSON manifest in bytes
    manifest   UTF-8 JSON {"meta": {...}, "tensors": [{name, shape, dtype, width}, ...]}
    payload    raw little-endian arrays in manifest order

Complex arrays are stored as interleaved real/imag pairs.
"""

from __future__ import annotations

import json
import os
import struct
from typing import Any, Mapping

import numpy as np

MAGIC = b"HRXCKPT\x00"
FORMAT_VERSION = 1

_KINDS = {"f": "float", "c": "complex", "i": "int", "u": "uint", "b": "bool"}


class CheckpointError(IOError):
    pass


def _le_dtype(arr: np.ndarray) -> np.dtype:
    dt = arr.dtype
    if dt.kind == "b":
        return np.dtype("u1")
    return dt.newbyteorder("<")


def save(path, tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> None:
    """Write ``tensors`` (name -> array) and a JSON-serializable ``meta`` dict."""
    entries = []
    blobs = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype.kind not in _KINDS:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for {name!r}")
        out = np.ascontiguousarray(arr, dtype=_le_dtype(arr))
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": arr.dtype.kind,
            "width": out.dtype.itemsize,
        })
        blobs.append(out.tobytes())
    manifest = json.dumps({"meta": dict(meta or {}), "tensors": entries}, sort_keys=True).encode()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(manifest)))
        fh.write(manifest)
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


def load(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """Read a container written by :func:`save`; returns ``(tensors, meta)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    version, n_header = struct.unpack("<II", raw[8:16])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    manifest = json.loads(raw[16:16 + n_header].decode())
    pos = 16 + n_header
    tensors: dict[str, np.ndarray] = {}
    for e in manifest["tensors"]:
        kind, width = e["dtype"], e["width"]
        dt = np.dtype("u1") if kind == "b" else np.dtype(f"<{kind}{width}")
        count = int(np.prod(e["shape"], dtype=np.int64))
        nbytes = count * width
        if pos + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated payload for {e['name']!r}")
        arr = np.frombuffer(raw, dtype=dt, count=count, offset=pos).reshape(e["shape"]).copy()
        if kind == "b":
            arr = arr.astype(bool)
        tensors[e["name"]] = arr.astype(arr.dtype.newbyteorder("="))
        pos += nbytes
    return tensors, manifest["meta"]
