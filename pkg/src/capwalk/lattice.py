"""Lattice-point helpers for Z^3.

Points are plain integer triples, stored in bulk as ``(n, 3)`` int64 arrays.
Coordinates must stay within ``+-COORD_BOUND`` (20 bits); the packing helpers
detect overflow so downstream hash-based membership tests stay exact.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np

from .errors import DomainError

#: Unit steps of the simple random walk, one per row (+x, -x, +y, -y, +z, -z).
UNIT_STEPS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
    dtype=np.int64,
)

#: Largest coordinate magnitude supported by the packed-key representation.
COORD_BOUND = (1 << 20) - 1

_SHIFT = 21
_OFFSET = 1 << 20


def as_points(points) -> np.ndarray:
    """Coerce input to an ``(n, 3)`` int64 array of lattice points."""
    arr = np.asarray(points)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DomainError(f"expected (n, 3) lattice points, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.allclose(arr, rounded, atol=1e-9):
            raise DomainError("lattice points must have integer coordinates")
        arr = rounded
    return arr.astype(np.int64, copy=False)


def pack(points: np.ndarray) -> np.ndarray:
    """Pack ``(n, 3)`` coordinates into unique int64 keys.

    Raises DomainError when any coordinate exceeds ``COORD_BOUND``.
    """
    pts = np.asarray(points, dtype=np.int64)
    if pts.size and np.abs(pts).max() > COORD_BOUND:
        raise DomainError(
            f"coordinate overflow: |coordinate| > {COORD_BOUND} cannot be packed"
        )
    q = pts + _OFFSET
    return (q[..., 0] << (2 * _SHIFT)) | (q[..., 1] << _SHIFT) | q[..., 2]


def unpack(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    mask = (1 << _SHIFT) - 1
    x = (keys >> (2 * _SHIFT)) & mask
    y = (keys >> _SHIFT) & mask
    z = keys & mask
    return np.stack([x, y, z], axis=-1) - _OFFSET


def norms(points: np.ndarray) -> np.ndarray:
    """Euclidean norms of each point."""
    pts = np.asarray(points, dtype=np.float64)
    return np.sqrt(np.sum(pts * pts, axis=-1))


def signed_permutations(point) -> np.ndarray:
    """All 48 images of ``point`` under coordinate permutations and sign flips."""
    x = np.asarray(point, dtype=np.int64)
    out = []
    for perm in permutations(range(3)):
        base = x[list(perm)]
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    out.append(base * np.array([sx, sy, sz], dtype=np.int64))
    return np.unique(np.array(out, dtype=np.int64), axis=0)
