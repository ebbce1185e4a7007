"""Flat binary checkpoint format.

Layout (little-endian): the 8-byte magic ``DAMKIT01``, then one record per
parameter: u32 name length, UTF-8 name, u32 rank, u32 per-axis dims, and the
float64 payload in row-major order. Records run to end of file.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensor import Param

MAGIC = b"DAMKIT01"


class CheckpointError(ValueError):
    """Malformed checkpoint file."""


def save_checkpoint(path, params: list[Param]) -> None:
    out = bytearray(MAGIC)
    for p in params:
        name = p.name.encode("utf-8")
        out += struct.pack("<I", len(name))
        out += name
        dims = p.data.shape
        out += struct.pack("<I", len(dims))
        for d in dims:
            out += struct.pack("<I", d)
        out += np.ascontiguousarray(p.data, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read all records into an ordered name -> float64 array mapping."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"bad magic in {path}")
    ofs = 8
    out: dict[str, np.ndarray] = {}

    def take(n: int) -> bytes:
        nonlocal ofs
        if ofs + n > len(raw):
            raise CheckpointError(f"truncated checkpoint {path}")
        chunk = raw[ofs:ofs + n]
        ofs += n
        return chunk

    while ofs < len(raw):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(take(8 * count), dtype="<f8").reshape(dims).copy()
        if name in out:
            raise CheckpointError(f"duplicate parameter {name!r} in {path}")
        out[name] = data
    return out


def load_into(params: list[Param], path) -> None:
    """Restore values into an existing parameter set; names and shapes must match."""
    stored = load_checkpoint(path)
    for p in params:
        if p.name not in stored:
            raise CheckpointError(f"checkpoint missing parameter {p.name!r}")
        arr = stored.pop(p.name)
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"shape mismatch for {p.name!r}: checkpoint {arr.shape}, model {p.data.shape}"
            )
        p.data[...] = arr
    if stored:
        raise CheckpointError(f"checkpoint has extra parameters: {sorted(stored)}")
