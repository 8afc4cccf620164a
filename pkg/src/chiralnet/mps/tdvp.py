"""One-site projector-splitting TDVP for ``d|rho>>/dt = L |rho>>``.

Environments use the Euclidean (Hilbert-Schmidt) inner product, so the left
block is contracted with the complex-conjugated tensors as for state
vectors. Site tensors are evolved with ``exp(+tau L_eff)`` and bond
matrices with ``exp(-tau K_eff)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .krylov import local_exponential
from .mpo import LiouvillianMPO
from .state import VectorizedMPS


@dataclass(frozen=True)
class TdvpConfig:
    dt: float = 0.1
    d_max: int = 18
    krylov_dim: int = 30
    krylov_tol: float = 1e-10

    def __post_init__(self):
        if self.dt <= 0 or self.d_max < 1:
            raise ParameterError("dt must be positive and d_max >= 1", dt=self.dt, d_max=self.d_max)


def _extend_left(env, a, w):
    """``env[a', w, a]`` grown by one site: returns ``[b', w', b]``."""
    t = np.tensordot(env, a, axes=(2, 0))  # a' w s b
    t = np.tensordot(t, w, axes=([1, 2], [0, 3]))  # a' b w' s'
    return np.tensordot(a.conj(), t, axes=([0, 1], [0, 3]))  # b' b w'


def _left(env, a, w):
    return _extend_left(env, a, w).transpose(0, 2, 1)


def _right(env, a, w):
    """``env[b', w, b]`` grown leftwards by one site: returns ``[a', w', a]``."""
    t = np.tensordot(a, env, axes=(2, 2))  # a s b' w
    t = np.tensordot(t, w, axes=([1, 3], [3, 1]))  # a b' w' s'
    t = np.tensordot(a.conj(), t, axes=([1, 2], [3, 1]))  # a' a w'
    return t.transpose(0, 2, 1)


def _apply_site(left, w, right, x):
    t = np.tensordot(left, x, axes=(2, 0))  # a' w s b
    t = np.tensordot(t, w, axes=([1, 2], [0, 3]))  # a' b w' s'
    t = np.tensordot(t, right, axes=([1, 2], [2, 1]))  # a' s' b'
    return t


def _apply_bond(left, right, c):
    t = np.tensordot(left, c, axes=(2, 0))  # a' w b
    return np.tensordot(t, right, axes=([1, 2], [1, 2]))  # a' b'


class TdvpEngine:
    """Holds environments between sweeps; the state is modified in place."""

    def __init__(self, state: VectorizedMPS, mpo: LiouvillianMPO, config: TdvpConfig):
        if state.n_sites != mpo.n_sites:
            raise ParameterError("state and MPO lengths differ", state=state.n_sites, mpo=mpo.n_sites)
        self.state, self.mpo, self.config = state, mpo, config
        n = state.n_sites
        state.canonicalize(0)
        self.left = [None] * (n + 1)
        self.right = [None] * (n + 1)
        self.left[0] = np.ones((1, 1, 1), dtype=complex)
        self.right[n] = np.ones((1, 1, 1), dtype=complex)
        for i in range(n - 1, 0, -1):
            self.right[i] = _right(self.right[i + 1], state.tensors[i], mpo.tensors[i])

    def _expm(self, apply, x, tau):
        return local_exponential(apply, x, tau, self.config.krylov_dim, self.config.krylov_tol)

    def _evolve_site(self, i, tau):
        left, w, right = self.left[i], self.mpo.tensors[i], self.right[i + 1]
        a = self.state.tensors[i]
        self.state.tensors[i] = self._expm(lambda x: _apply_site(left, w, right, x), a, tau)

    def _evolve_bond(self, left, right, c, tau):
        return self._expm(lambda x: _apply_bond(left, right, x), c, -tau)

    def step(self) -> None:
        """One symmetric sweep of length ``dt``; the centre returns to site 0."""
        dt = self.config.dt
        tensors, mpo, n = self.state.tensors, self.mpo.tensors, self.state.n_sites
        for i in range(n - 1):
            self._evolve_site(i, dt / 2)
            dl, d, dr = tensors[i].shape
            q, r = np.linalg.qr(tensors[i].reshape(dl * d, dr))
            tensors[i] = q.reshape(dl, d, dr)
            self.left[i + 1] = _left(self.left[i], tensors[i], mpo[i])
            r = self._evolve_bond(self.left[i + 1], self.right[i + 1], r, dt / 2)
            tensors[i + 1] = np.tensordot(r, tensors[i + 1], axes=(1, 0))
        self._evolve_site(n - 1, dt)
        for i in range(n - 1, 0, -1):
            dl, d, dr = tensors[i].shape
            q, r = np.linalg.qr(tensors[i].reshape(dl, d * dr).T)
            tensors[i] = q.T.reshape(dl, d, dr)
            c = r.T
            self.right[i] = _right(self.right[i + 1], tensors[i], mpo[i])
            c = self._evolve_bond(self.left[i], self.right[i], c, dt / 2)
            tensors[i - 1] = np.tensordot(tensors[i - 1], c, axes=(2, 0))
            self._evolve_site(i - 1, dt / 2)
        self.state.center = 0


def tdvp_step(state: VectorizedMPS, mpo: LiouvillianMPO, config: TdvpConfig) -> VectorizedMPS:
    """Return a new state advanced by one symmetric sweep."""
    engine = TdvpEngine(state.copy(), mpo, config)
    engine.step()
    return engine.state
