"""Expectation values and reduced states of a vectorized-density MPS.

``Tr(O rho)`` is the contraction with the covector ``O.reshape(-1)`` on each
site (``mu = 2 * bra + ket``); sites that are not measured get the identity
covector ``[1, 0, 0, 1]``.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..quantum import NUMBER, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y
from .mpo import IDENTITY_COVECTOR
from .state import VectorizedMPS

MAX_REDUCED_SITES = 4


def covector(op: np.ndarray) -> np.ndarray:
    return np.asarray(op, dtype=complex).reshape(-1)


class TraceEnvironments:
    """Partial traces from each end, reused across many local measurements."""

    def __init__(self, state: VectorizedMPS):
        self.state = state
        n = state.n_sites
        self.left = [np.ones(1, dtype=complex)]
        for a in state.tensors:
            self.left.append(self.left[-1] @ np.tensordot(IDENTITY_COVECTOR, a, axes=(0, 1)))
        self.right = [np.ones(1, dtype=complex)]
        for a in reversed(state.tensors):
            self.right.append(np.tensordot(IDENTITY_COVECTOR, a, axes=(0, 1)) @ self.right[-1])
        self.right = self.right[::-1]  # right[i] covers sites i..N-1
        self.n = n

    def trace(self) -> complex:
        return complex(self.left[-1][0])

    def expectation(self, ops: dict[int, np.ndarray]) -> complex:
        """``Tr(prod_i O_i rho)`` for operators on distinct sites."""
        sites = sorted(ops)
        lo, hi = sites[0], sites[-1]
        vec = self.left[lo]
        for i in range(lo, hi + 1):
            c = covector(ops[i]) if i in ops else IDENTITY_COVECTOR
            vec = vec @ np.tensordot(c, self.state.tensors[i], axes=(0, 1))
        return complex(vec @ self.right[hi + 1])

    def reduced(self, sites) -> np.ndarray:
        """Unnormalized reduced density matrix on ``sites`` (ascending order kept)."""
        sites = sorted(int(s) for s in sites)
        if not sites or len(sites) > MAX_REDUCED_SITES:
            raise DimensionError(f"reduced states need 1 to {MAX_REDUCED_SITES} sites", sites=sites)
        lo, hi = sites[0], sites[-1]
        acc = self.left[lo][None, :]  # (open physical, bond)
        for i in range(lo, hi + 1):
            a = self.state.tensors[i]
            if i in sites:
                acc = np.einsum("pa,asb->psb", acc, a).reshape(-1, a.shape[2])
            else:
                acc = acc @ np.tensordot(IDENTITY_COVECTOR, a, axes=(0, 1))
        vec = acc @ self.right[hi + 1]
        k = len(sites)
        # vec index is (bra_0, ket_0, bra_1, ket_1, ...); rho[ket..., bra...]
        t = vec.reshape((2, 2) * k)
        order = [2 * j + 1 for j in range(k)] + [2 * j for j in range(k)]
        return t.transpose(order).reshape(2**k, 2**k)


def populations(env: TraceEnvironments) -> np.ndarray:
    return np.array([env.expectation({i: NUMBER}).real for i in range(env.n)])


def bond_currents(env: TraceEnvironments, nn: np.ndarray) -> np.ndarray:
    """Excitation flow across each nearest-neighbour bond, positive left to right.

    From the continuity equation of ``H = J sigma_{i+1}^+ sigma_i^- + h.c.``:
    ``d<n_{i+1}>/dt |_bond = -2 Im(J^* <sigma_i^+ sigma_{i+1}^->)``.
    """
    out = np.empty(env.n - 1)
    for i in range(env.n - 1):
        corr = env.expectation({i: SIGMA_PLUS, i + 1: SIGMA_MINUS})
        out[i] = -2 * (np.conj(nn[i]) * corr).imag
    return out


def transverse_coherence(env: TraceEnvironments) -> np.ndarray:
    sx = np.array([env.expectation({i: SIGMA_X}).real for i in range(env.n)])
    sy = np.array([env.expectation({i: SIGMA_Y}).real for i in range(env.n)])
    return np.hypot(sx, sy)


def measure(state: VectorizedMPS, what: str, **kwargs):
    """Named diagnostics: trace, populations, bond_currents, coherence, reduced."""
    env = TraceEnvironments(state)
    if what == "trace":
        return env.trace()
    if what == "populations":
        return populations(env)
    if what == "bond_currents":
        return bond_currents(env, kwargs["nn"])
    if what == "coherence":
        return transverse_coherence(env)
    if what == "reduced":
        return env.reduced(kwargs["sites"])
    raise ValueError(f"unknown observable {what!r}")
