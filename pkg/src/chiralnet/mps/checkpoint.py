"""Binary checkpoints of a vectorized-density MPS.

Layout, all little-endian::

    8 bytes   magic b"CHNMPS01"
    uint32    N (site count)
    uint32    D_max
    uint32    canonical centre
    N x 3 x uint32   tensor shapes (D_left, 4, D_right)
    complex128 data of every tensor in C order, site by site
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ChiralNetError
from .state import VectorizedMPS

MAGIC = b"CHNMPS01"
_HEADER = struct.Struct("<8sIII")
_COMPLEX = np.dtype("<c16")


class CheckpointError(ChiralNetError, ValueError):
    pass


def save_checkpoint(path, state: VectorizedMPS, d_max: int) -> None:
    shapes = np.array([a.shape for a in state.tensors], dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, state.n_sites, d_max, state.center))
        fh.write(shapes.tobytes())
        for a in state.tensors:
            fh.write(np.ascontiguousarray(a, dtype=_COMPLEX).tobytes())


def load_checkpoint(path) -> tuple[VectorizedMPS, int]:
    """Returns ``(state, d_max)``; rejects foreign or truncated files."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:8] != MAGIC:
        raise CheckpointError("not an MPS checkpoint", path=str(path))
    _, n, d_max, center = _HEADER.unpack_from(raw)
    offset = _HEADER.size
    if len(raw) < offset + 12 * n:
        raise CheckpointError("checkpoint is truncated", path=str(path))
    shapes = np.frombuffer(raw, dtype="<u4", count=3 * n, offset=offset).reshape(n, 3)
    offset += shapes.nbytes
    tensors = []
    for shape in shapes:
        count = int(np.prod(shape))
        if offset + count * _COMPLEX.itemsize > len(raw):
            raise CheckpointError("checkpoint is truncated", path=str(path))
        data = np.frombuffer(raw, dtype=_COMPLEX, count=count, offset=offset)
        tensors.append(data.reshape(tuple(int(s) for s in shape)).astype(complex))
        offset += count * _COMPLEX.itemsize
    if offset != len(raw):
        raise CheckpointError("trailing bytes after tensor data", path=str(path))
    return VectorizedMPS(tensors, int(center)), int(d_max)
