"""Arnoldi approximation of ``exp(dt G) v`` for non-normal generators."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.linalg import expm

from ..errors import KrylovError


def _krylov_exp(apply, v, tau, m, tol):
    """One Arnoldi solve; returns ``(result, tau_used)``.

    The basis grows until the residual estimate
    ``h_{j+1,j} |[exp(tau H_j)]_{j,0}| beta`` drops below ``tol * beta``;
    if the full subspace is not enough, ``tau`` is halved on the same basis.
    """
    beta = np.linalg.norm(v)
    basis = np.zeros((m + 1, v.size), dtype=complex)
    hess = np.zeros((m + 1, m), dtype=complex)
    basis[0] = v / beta
    for j in range(m):
        w = apply(basis[j])
        for _ in range(2):  # second pass repairs lost orthogonality
            coeffs = basis[: j + 1].conj() @ w
            w = w - coeffs @ basis[: j + 1]
            hess[: j + 1, j] += coeffs
        h_next = np.linalg.norm(w)
        small = expm(tau * hess[: j + 1, : j + 1])[:, 0]
        scale = max(1.0, np.abs(hess[: j + 1, j]).max())
        if h_next < 1e-13 * scale:  # invariant subspace: exact
            return beta * (small @ basis[: j + 1]), tau, 0.0
        residual = h_next * abs(small[-1])
        if residual <= tol:
            return beta * (small @ basis[: j + 1]), tau, residual
        hess[j + 1, j] = h_next
        basis[j + 1] = w / h_next
    while residual > tol:
        tau /= 2
        small = expm(tau * hess[:m, :m])[:, 0]
        residual = h_next * abs(small[-1])
    return beta * (small @ basis[:m]), tau, residual


def local_exponential(
    apply: Callable[[np.ndarray], np.ndarray],
    tensor: np.ndarray,
    dt: float,
    krylov_dim: int = 30,
    tol: float = 1e-10,
    max_substeps: int = 1024,
) -> np.ndarray:
    """``exp(dt G) tensor`` with ``G`` given as a matrix-free ``apply``.

    Long steps are covered by as many Krylov substeps as the residual
    estimate requires.
    """
    shape = tensor.shape
    v = tensor.reshape(-1).astype(complex)
    if dt == 0 or not np.any(v):
        return tensor.copy()
    m = min(krylov_dim, v.size)
    flat = lambda x: apply(x.reshape(shape)).reshape(-1)  # noqa: E731
    remaining = float(dt)
    for _ in range(max_substeps):
        v, used, residual = _krylov_exp(flat, v, remaining, m, tol)
        remaining -= used
        if abs(remaining) <= 1e-14 * abs(dt):
            return v.reshape(shape)
    raise KrylovError("Krylov exponential needs too many substeps", residual=float(residual), dt=dt)
