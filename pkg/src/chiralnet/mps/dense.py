"""Exact Liouvillian of a short chain, assembled from Kronecker products.

Used as an independent reference for the MPO and TDVP at N <= 6.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sparse

from ..quantum import NUMBER, SIGMA_MINUS, SIGMA_PLUS
from .chain import ChainModel


def _site_op(op, site, n):
    out = sparse.identity(1, format="csr", dtype=complex)
    for k in range(n):
        out = sparse.kron(out, sparse.csr_matrix(op) if k == site else sparse.identity(2, dtype=complex), format="csr")
    return out


def effective_hamiltonian(model: ChainModel):
    n = model.n_sites
    lower = [_site_op(SIGMA_MINUS, i, n) for i in range(n)]
    raise_ = [_site_op(SIGMA_PLUS, i, n) for i in range(n)]
    num = [_site_op(NUMBER, i, n) for i in range(n)]
    h = sparse.csr_matrix((2**n, 2**n), dtype=complex)
    for i in range(n):
        h = h + (model.detunings[i] - 0.5j * model.losses[i]) * num[i]
        h = h + model.drives[i] * lower[i] + np.conj(model.drives[i]) * raise_[i]
    for i in range(n - 1):
        h = h + model.nn[i] * raise_[i + 1] @ lower[i] + np.conj(model.nn[i]) * raise_[i] @ lower[i + 1]
    for i in range(n - 2):
        h = h + model.nnn[i] * raise_[i + 2] @ lower[i] + np.conj(model.nnn[i]) * raise_[i] @ lower[i + 2]
    return h, lower


def dense_liouvillian(model: ChainModel, interleaved: bool = True):
    """Sparse generator on column-stacked ``vec(rho)``.

    With ``interleaved`` the basis is reordered to the MPS site order
    ``(bra_0, ket_0, bra_1, ket_1, ...)``.
    """
    n = model.n_sites
    dim = 2**n
    h, lower = effective_hamiltonian(model)
    eye = sparse.identity(dim, dtype=complex, format="csr")
    gen = 1j * (sparse.kron(h.conj(), eye) - sparse.kron(eye, h))
    for i in range(n):
        if model.losses[i]:
            gen = gen + model.losses[i] * sparse.kron(lower[i], lower[i])
    if not interleaved:
        return gen.tocsr()
    perm = interleave_permutation(n)
    return gen.tocsr()[perm][:, perm]


def interleave_permutation(n: int) -> np.ndarray:
    """Native (bra_total, ket_total) index of every interleaved position."""
    native = np.arange(4**n).reshape((2,) * (2 * n))  # axes bra_0..bra_n-1, ket_0..ket_n-1
    axes = [a for k in range(n) for a in (k, n + k)]
    return native.transpose(axes).reshape(-1)


def rk4_evolve(gen, v0: np.ndarray, dt: float, n_steps: int, every: int = 1) -> np.ndarray:
    """Classical RK4 on ``dv/dt = gen v``; returns snapshots every ``every`` steps."""
    v = v0.astype(complex)
    out = [v.copy()]
    for k in range(1, n_steps + 1):
        k1 = gen @ v
        k2 = gen @ (v + 0.5 * dt * k1)
        k3 = gen @ (v + 0.5 * dt * k2)
        k4 = gen @ (v + dt * k3)
        v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if k % every == 0:
            out.append(v.copy())
    return np.array(out)


def reduced_from_vector(vec: np.ndarray, n: int, sites) -> np.ndarray:
    """Reduced state from an interleaved vectorized density matrix."""
    sites = sorted(sites)
    t = vec.reshape((2, 2) * n)  # bra_0, ket_0, ...
    for k in reversed(range(n)):
        if k not in sites:
            t = np.trace(t, axis1=2 * k, axis2=2 * k + 1)
    k = len(sites)
    order = [2 * j + 1 for j in range(k)] + [2 * j for j in range(k)]
    return t.transpose(order).reshape(2**k, 2**k)
