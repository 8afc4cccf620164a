"""Matrix-product form of the chain Liouvillian.

Local Liouville index ``mu = 2 * bra + ket`` so that ``kron(X, Y)`` acts with
``X`` on the bra (column) index and ``Y`` on the ket index, matching
``vec(A rho B^dag) = (B^* kron A) vec(rho)``. The generator is

    L = i (H_eff^* (x) I - I (x) H_eff) + sum_i zeta_i sigma_i^- (x) sigma_i^-

Virtual index 0 means "all terms placed", 9 means "nothing placed yet";
1-4 carry an open nearest-neighbour string and 5-8 a next-nearest one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..quantum import IDENTITY_2, NUMBER, SIGMA_MINUS, SIGMA_PLUS
from .chain import ChainModel

MPO_BOND = 10
_I4 = np.eye(4, dtype=complex)
CHANNELS = (
    np.kron(SIGMA_MINUS, IDENTITY_2),
    np.kron(SIGMA_PLUS, IDENTITY_2),
    np.kron(IDENTITY_2, SIGMA_MINUS),
    np.kron(IDENTITY_2, SIGMA_PLUS),
)
CLOSERS = (
    1j * np.kron(SIGMA_PLUS, IDENTITY_2),
    1j * np.kron(SIGMA_MINUS, IDENTITY_2),
    -1j * np.kron(IDENTITY_2, SIGMA_PLUS),
    -1j * np.kron(IDENTITY_2, SIGMA_MINUS),
)
IDENTITY_COVECTOR = np.array([1, 0, 0, 1], dtype=complex)


def onsite_block(detuning: float, drive: complex, loss: float) -> np.ndarray:
    h_eff = detuning * NUMBER + drive * SIGMA_MINUS + np.conj(drive) * SIGMA_PLUS - 0.5j * loss * NUMBER
    return (
        1j * np.kron(h_eff.conj(), IDENTITY_2)
        - 1j * np.kron(IDENTITY_2, h_eff)
        + loss * np.kron(SIGMA_MINUS, SIGMA_MINUS)
    )


def _opening_row(onsite: np.ndarray, j1: complex, j2: complex) -> list[np.ndarray]:
    weights = (np.conj(j1), j1, j1, np.conj(j1), np.conj(j2), j2, j2, np.conj(j2))
    opens = [w * CHANNELS[k % 4] for k, w in enumerate(weights)]
    return [onsite, *opens, _I4]


@dataclass
class LiouvillianMPO:
    """Site tensors of shape ``(w_left, w_right, out, in)``."""

    tensors: list[np.ndarray]

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def bond_dimensions(self) -> list[int]:
        return [w.shape[1] for w in self.tensors[:-1]]

    def to_dense(self) -> np.ndarray:
        """Full ``4^N x 4^N`` matrix in site-interleaved order (small N only)."""
        acc = self.tensors[0][0]  # (w, out, in)
        for w in self.tensors[1:]:
            acc = np.einsum("aij,abkl->bikjl", acc, w)
            s = acc.shape
            acc = acc.reshape(s[0], s[1] * s[2], s[3] * s[4])
        return acc[0]


def build_liouvillian_mpo(model: ChainModel) -> LiouvillianMPO:
    n = model.n_sites
    onsite = [onsite_block(model.detunings[i], model.drives[i], model.losses[i]) for i in range(n)]

    def j1(i):
        return model.nn[i] if i < n - 1 else 0.0

    def j2(i):
        return model.nnn[i] if i < n - 2 else 0.0

    tensors = []
    for i in range(n):
        w = np.zeros((MPO_BOND, MPO_BOND, 4, 4), dtype=complex)
        w[0, 0] = _I4
        for k in range(4):
            w[1 + k, 0] = CLOSERS[k]
            w[5 + k, 1 + k] = _I4
        for col, block in enumerate(_opening_row(onsite[i], j1(i), j2(i))):
            w[9, col] = block
        if i == 0:
            w = w[9:10]
        if i == n - 1:
            w = w[:, 0:1]
        tensors.append(w)
    return LiouvillianMPO(tensors)
