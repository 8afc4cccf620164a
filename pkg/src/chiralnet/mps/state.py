"""Vectorized density matrices as open-boundary matrix product states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError

LOCAL_DIM = 4
GROUND = np.array([1, 0, 0, 0], dtype=complex)  # |g><g|
EXCITED = np.array([0, 0, 0, 1], dtype=complex)  # |e><e|


@dataclass
class VectorizedMPS:
    """Tensors ``(D_left, 4, D_right)``; ``center`` marks the non-orthonormal site."""

    tensors: list[np.ndarray]
    center: int = 0

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def bond_dimensions(self) -> list[int]:
        return [a.shape[2] for a in self.tensors[:-1]]

    @classmethod
    def product(cls, local_vectors, d_max: int) -> "VectorizedMPS":
        """Product state zero-padded to ``min(d_max, 4^k, 4^(N-k))`` on every bond."""
        if d_max < 1:
            raise ParameterError("d_max must be at least 1", d_max=d_max)
        n = len(local_vectors)
        bonds = [1] + [min(d_max, LOCAL_DIM**k, LOCAL_DIM ** (n - k)) for k in range(1, n)] + [1]
        tensors = []
        for i, vec in enumerate(local_vectors):
            a = np.zeros((bonds[i], LOCAL_DIM, bonds[i + 1]), dtype=complex)
            a[0, :, 0] = vec
            tensors.append(a)
        state = cls(tensors, center=n - 1)
        state.canonicalize(0)
        return state

    def canonicalize(self, center: int) -> None:
        """Left-orthonormalise sites before ``center`` and right-orthonormalise after it."""
        for i in range(center):
            a = self.tensors[i]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl * d, dr))
            self.tensors[i] = q.reshape(dl, d, dr)
            self.tensors[i + 1] = np.tensordot(r, self.tensors[i + 1], axes=(1, 0))
        for i in range(self.n_sites - 1, center, -1):
            a = self.tensors[i]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl, d * dr).T)
            self.tensors[i] = q.T.reshape(dl, d, dr)
            self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], r.T, axes=(2, 0))
        self.center = center

    def to_vector(self) -> np.ndarray:
        acc = self.tensors[0].reshape(-1, self.tensors[0].shape[2])
        for a in self.tensors[1:]:
            acc = (acc @ a.reshape(a.shape[0], -1)).reshape(-1, a.shape[2])
        return acc.reshape(-1)

    def copy(self) -> "VectorizedMPS":
        return VectorizedMPS([a.copy() for a in self.tensors], self.center)
