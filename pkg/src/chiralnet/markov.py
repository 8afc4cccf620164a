"""Born-Markov chiral master equation for two emitters on a waveguide.

The generator acts on column-stacked 4x4 density matrices in the basis
``|gg>, |ge>, |eg>, |ee>``::

    drho/dt = -i[H, rho] + gamma_R D[c_R] rho + gamma_L D[c_L] rho
              + sum_i gamma_loss_i D[sigma_i] rho

with ``c_R = s1 + exp(-i phi) s2``, ``c_L = s1 + exp(i phi) s2`` and the
cascaded exchange term ``H_C = (i/2)(gamma_R e^{-i phi} - gamma_L e^{i phi})
s1^dag s2 + h.c.``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, ParameterError
from .quantum import (
    BELL_SINGLET,
    NUMBER,
    SIGMA_MINUS,
    concurrence,
    devectorize,
    embed,
    state_fidelity,
    superop_sandwich,
    vectorize,
)
from .trajectory import Trajectory

S1 = embed(SIGMA_MINUS, 0, 2)
S2 = embed(SIGMA_MINUS, 1, 2)
_I4 = np.eye(4, dtype=complex)
TRACE_DRIFT_LIMIT = 1e-6
# RK4 is not positivity preserving; at ||L|| dt ~ 0.1 its states dip to -6e-7
PSD_TOL = 1e-6


def _pair(value) -> tuple[float, float]:
    if np.ndim(value) == 0:
        return float(value), float(value)
    a, b = value
    return float(a), float(b)


@dataclass(frozen=True)
class ChiralMarkovParams:
    """Emitter-only model parameters (rates and drives in the same unit).

    ``guided_weights`` scales each emitter's coupling to the guided channel;
    together with ``gamma_loss`` it lets the two emitters have different
    guided fractions while sharing the same channel.
    """

    gamma_L: float = 0.0
    gamma_R: float = 1.0
    phi: float = 0.0
    omega_1: complex = 0.0
    omega_2: complex = 0.0
    detuning: float = 0.0
    gamma_loss: tuple[float, float] = (0.0, 0.0)
    guided_weights: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "gamma_loss", _pair(self.gamma_loss))
        object.__setattr__(self, "guided_weights", _pair(self.guided_weights))
        rates = {"gamma_L": self.gamma_L, "gamma_R": self.gamma_R}
        rates.update({f"gamma_loss[{k}]": v for k, v in enumerate(self.gamma_loss)})
        rates.update({f"guided_weights[{k}]": v for k, v in enumerate(self.guided_weights)})
        bad = [name for name, v in rates.items() if not np.isfinite(v) or v < 0]
        if bad:
            raise ParameterError(f"rates must be finite and non-negative: {', '.join(bad)}", fields=bad)

    @property
    def gamma_bar(self) -> float:
        return 0.5 * (self.gamma_L + self.gamma_R)

    @property
    def gamma_tot(self) -> tuple[float, float]:
        guided = self.gamma_L + self.gamma_R
        return tuple(w * guided + loss for w, loss in zip(self.guided_weights, self.gamma_loss))

    @property
    def beta(self) -> tuple[float, float]:
        return tuple((tot - loss) / tot for tot, loss in zip(self.gamma_tot, self.gamma_loss))

    @classmethod
    def with_beta(cls, beta_1: float, beta_2: float, gamma_tot: float = 1.0, **kwargs):
        """Fully chiral channel with per-emitter guided fraction and fixed total rate."""
        for b in (beta_1, beta_2):
            if not 0 < b <= 1:
                raise ParameterError("beta must lie in (0, 1]", beta=b)
        return cls(
            gamma_L=0.0,
            gamma_R=gamma_tot,
            guided_weights=(beta_1, beta_2),
            gamma_loss=((1 - beta_1) * gamma_tot, (1 - beta_2) * gamma_tot),
            **kwargs,
        )


def flux_to_rates(phi_flux: float, gamma_tot: float) -> tuple[float, float]:
    """(gamma_L, gamma_R) of a flux-threaded coupling with total rate ``gamma_tot``."""
    if gamma_tot <= 0:
        raise ParameterError("gamma_tot must be positive", gamma_tot=gamma_tot)
    s = np.sin(2 * phi_flux)
    return 0.5 * gamma_tot * (1 - s), 0.5 * gamma_tot * (1 + s)


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    return -1j * (superop_sandwich(h, _I4) - superop_sandwich(_I4, h))


def dissipator_superop(c: np.ndarray) -> np.ndarray:
    cdc = c.conj().T @ c
    return (
        superop_sandwich(c, c.conj().T)
        - 0.5 * superop_sandwich(cdc, _I4)
        - 0.5 * superop_sandwich(_I4, cdc)
    )


def drive_hamiltonian(omega_1: complex, omega_2: complex) -> np.ndarray:
    h = omega_1 * S1 + omega_2 * S2
    return 0.5 * (h + h.conj().T)


def _static_parts(params: ChiralMarkovParams):
    w1, w2 = np.sqrt(params.guided_weights)
    phase = np.exp(1j * params.phi)
    c_r = w1 * S1 + w2 * np.conj(phase) * S2
    c_l = w1 * S1 + w2 * phase * S2
    h_c = 0.5j * w1 * w2 * (params.gamma_R * np.conj(phase) - params.gamma_L * phase) * (S1.conj().T @ S2)
    h = h_c + h_c.conj().T + params.detuning * (embed(NUMBER, 0, 2) + embed(NUMBER, 1, 2))
    gen = hamiltonian_superop(h)
    gen = gen + params.gamma_R * dissipator_superop(c_r) + params.gamma_L * dissipator_superop(c_l)
    for loss, s in zip(params.gamma_loss, (S1, S2)):
        if loss:
            gen = gen + loss * dissipator_superop(s)
    return gen


def build_liouvillian(params: ChiralMarkovParams) -> np.ndarray:
    """16x16 generator acting on column-stacked density matrices."""
    return _static_parts(params) + hamiltonian_superop(drive_hamiltonian(params.omega_1, params.omega_2))


def rk4_propagator(generator: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step of ``dv/dt = L v`` written as a matrix polynomial.

    Works on stacks of generators (leading batch axes).
    """
    hl = dt * np.asarray(generator)
    eye = np.broadcast_to(np.eye(hl.shape[-1], dtype=complex), hl.shape)
    term = eye
    out = eye.copy()
    for k in range(1, 5):
        term = term @ hl / k
        out = out + term
    return out


def _observables(states: np.ndarray) -> dict[str, np.ndarray]:
    traces = np.trace(states, axis1=-2, axis2=-1).real
    normed = states / traces[:, None, None]
    pops = np.einsum("tii->ti", normed).real
    return {
        "concurrence": concurrence(normed, psd_tol=PSD_TOL),
        "bell_fidelity": state_fidelity(normed, BELL_SINGLET),
        "rho_gg": pops[:, 0],
        "rho_ge": pops[:, 1],
        "rho_eg": pops[:, 2],
        "rho_ee": pops[:, 3],
        "trace": traces,
    }


def integrate_markov(params: ChiralMarkovParams, rho0, t_max: float, dt: float) -> Trajectory:
    """Fixed-step RK4 integration; raw states kept, metrics from renormalized copies."""
    if dt <= 0 or t_max <= 0:
        raise ParameterError("dt and t_max must be positive", dt=dt, t_max=t_max)
    rho0 = np.asarray(rho0, dtype=complex)
    n_steps = int(round(t_max / dt))
    step = rk4_propagator(build_liouvillian(params), dt)
    vecs = np.empty((n_steps + 1, 16), dtype=complex)
    vecs[0] = vectorize(rho0)
    for k in range(n_steps):
        vecs[k + 1] = step @ vecs[k]
    states = devectorize(vecs)
    drift = np.abs(np.trace(states, axis1=-2, axis2=-1) - np.trace(rho0))
    if drift.max() > TRACE_DRIFT_LIMIT:
        k = int(np.argmax(drift > TRACE_DRIFT_LIMIT))
        raise IntegrationError("trace drift exceeds limit; reduce dt", step=k, drift=float(drift[k]))
    times = dt * np.arange(n_steps + 1)
    return Trajectory(times, _observables(states), states, {"max_trace_drift": float(drift.max())})


@dataclass
class DriveSurface:
    omega_1: np.ndarray
    omega_2: np.ndarray
    max_concurrence: np.ndarray  # shape (len(omega_1), len(omega_2))
    time_of_max_concurrence: np.ndarray
    max_fidelity: np.ndarray
    time_of_max_fidelity: np.ndarray

    def argmax(self, field: str = "max_concurrence") -> tuple[float, float, float]:
        grid = getattr(self, field)
        i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
        return float(self.omega_1[i]), float(self.omega_2[j]), float(grid[i, j])


def drive_sweep(
    params: ChiralMarkovParams,
    omega_1_values,
    omega_2_values,
    rho0,
    t_max: float = 10.0,
    dt: float = 0.01,
    chunk: int = 2500,
) -> DriveSurface:
    """Max concurrence and Bell fidelity over time for a grid of real drives.

    Every grid point runs the same RK4 recursion as :func:`integrate_markov`;
    points are batched so one step is a single stacked matrix product.
    """
    o1 = np.asarray(omega_1_values, dtype=float)
    o2 = np.asarray(omega_2_values, dtype=float)
    base = _static_parts(params)
    k1 = hamiltonian_superop(drive_hamiltonian(1.0, 0.0))
    k2 = hamiltonian_superop(drive_hamiltonian(0.0, 1.0))
    grid1, grid2 = np.meshgrid(o1, o2, indexing="ij")
    flat1, flat2 = grid1.ravel(), grid2.ravel()
    n_steps = int(round(t_max / dt))
    times = dt * np.arange(n_steps + 1)
    out = {name: np.empty(flat1.size) for name in ("cmax", "tc", "fmax", "tf")}
    v0 = vectorize(np.asarray(rho0, dtype=complex))
    for start in range(0, flat1.size, chunk):
        sl = slice(start, start + chunk)
        gens = base + flat1[sl, None, None] * k1 + flat2[sl, None, None] * k2
        step = rk4_propagator(gens, dt)
        v = np.broadcast_to(v0, (gens.shape[0], 16)).copy()
        best_c = np.full(gens.shape[0], -1.0)
        best_f = np.full(gens.shape[0], -1.0)
        t_c = np.zeros(gens.shape[0])
        t_f = np.zeros(gens.shape[0])
        for k in range(n_steps + 1):
            if k:
                v = np.einsum("nij,nj->ni", step, v)
            rho = devectorize(v)
            rho = rho / np.trace(rho, axis1=-2, axis2=-1).real[:, None, None]
            c = concurrence(rho, psd_tol=PSD_TOL)
            f = state_fidelity(rho, BELL_SINGLET)
            up_c, up_f = c > best_c, f > best_f
            best_c[up_c], t_c[up_c] = c[up_c], times[k]
            best_f[up_f], t_f[up_f] = f[up_f], times[k]
        out["cmax"][sl], out["tc"][sl] = best_c, t_c
        out["fmax"][sl], out["tf"][sl] = best_f, t_f
    shape = grid1.shape
    return DriveSurface(
        o1, o2, out["cmax"].reshape(shape), out["tc"].reshape(shape),
        out["fmax"].reshape(shape), out["tf"].reshape(shape),
    )
