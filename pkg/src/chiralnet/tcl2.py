"""Second-order time-convolutionless dynamics of two driven plaquette emitters.

In the interaction picture with respect to the local drives each lowering
operator splits into Bohr components, ``sigma_i(t) = sum_v e^{ivt} S_i(v)``,
and the generator reads::

    d rho/dt = sum_{ij} sum_{v, v'} e^{i(v - v')t} Gamma_ij(t; v) [S_j(v) rho, S_i(v')^dag] + h.c.

``Gamma_ij(t; v)`` comes from :mod:`chiralnet.bath`. The Redfield variant
uses the ``t -> inf`` kernels; the secular variant additionally keeps only
terms with ``v = v'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product

import numpy as np

from .bath import (
    SIDES,
    SpinChainBathParams,
    lattice_integral_grid,
    redfield_kernel_closed_form,
)
from .errors import IntegrationError, ParameterError
from .quantum import (
    CHI_MINUS,
    CHI_PLUS,
    IDENTITY_2,
    NUMBER,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    KET_EG,
    KET_GG,
    concurrence,
    devectorize,
    projector,
    state_fidelity,
    trace_distance,
    vectorize,
)
from .trajectory import Trajectory, first_peak_index

MODES = ("tcl2", "redfield", "secular")
TRACE_DRIFT_LIMIT = 1e-6
# TCL-2 is not completely positive; eigenvalues slightly below zero are expected
TCL_PSD_TOL = 5e-3
_FREQ_DECIMALS = 12


@dataclass(frozen=True)
class DressedOperators:
    """Operators of the driven-emitter eigenbasis: ``sigma_-`` = (A + B - B^dag)/2."""

    A: np.ndarray = field(default_factory=lambda: SIGMA_X.copy())
    B: np.ndarray = field(default_factory=lambda: 0.5 * (SIGMA_Z - 1j * SIGMA_Y))

    def labelled(self) -> dict[str, np.ndarray]:
        return {
            "A": self.A,
            "B": self.B,
            "B†": self.B.conj().T,
            "σ-": SIGMA_MINUS,
            "σ+": SIGMA_PLUS,
        }


_DRESSED = DressedOperators().labelled()


def _label(op: np.ndarray) -> tuple[str, float]:
    """Symbolic name and real weight with ``op = weight * named``; ``('S', 1)`` otherwise."""
    for name, ref in _DRESSED.items():
        k = np.argmax(np.abs(ref))
        ratio = op.flat[k] / ref.flat[k]
        if abs(ratio.imag) < 1e-12 and np.allclose(op, ratio.real * ref, atol=1e-12):
            return name, float(ratio.real)
    return "S", 1.0


def local_hamiltonian(omega: complex, drive_prefactor: float = 1.0) -> np.ndarray:
    """``prefactor (Omega sigma_- + Omega^* sigma_+)``; real drives give ``Omega sigma_x``."""
    return drive_prefactor * (omega * SIGMA_MINUS + np.conj(omega) * SIGMA_PLUS)


def bohr_components(h: np.ndarray) -> dict[float, np.ndarray]:
    """``S(v) = sum_{E_a - E_b = v} P_a sigma_- P_b`` so that ``sigma_-(t) = sum e^{ivt} S(v)``."""
    energies, vecs = np.linalg.eigh(h)
    out: dict[float, np.ndarray] = {}
    for a, b in product(range(2), repeat=2):
        pa = np.outer(vecs[:, a], vecs[:, a].conj())
        pb = np.outer(vecs[:, b], vecs[:, b].conj())
        v = round(float(energies[a] - energies[b]), _FREQ_DECIMALS) + 0.0
        out[v] = out.get(v, 0) + pa @ SIGMA_MINUS @ pb
    return {v: s for v, s in sorted(out.items()) if np.abs(s).max() > 1e-14}


def _on_emitter(op: np.ndarray, emitter: int) -> np.ndarray:
    return np.kron(op, IDENTITY_2) if emitter == 0 else np.kron(IDENTITY_2, op)


@dataclass(frozen=True)
class GeneratorTerm:
    """``e^{i chi t} Gamma_pair(t; kernel_omega) [alpha rho, beta]`` (its h.c. is implied).

    ``alpha_label``/``beta_label`` name the single-emitter factors and
    ``sign * weight`` is their combined scalar prefactor, already folded
    into ``alpha`` and ``beta``.
    """

    pair: tuple[int, int]
    kernel_omega: float
    alpha: np.ndarray
    beta: np.ndarray
    chi: float
    alpha_label: str
    beta_label: str
    sign: int
    weight: float

    def signature(self) -> tuple:
        """Hashable (kernel, alpha, beta, chi) key in units of the frequency scale."""
        return (self.pair, self.kernel_omega, self.sign, self.alpha_label, self.beta_label, self.chi)


def derive_generator_terms(omega_1: complex, omega_2: complex, drive_prefactor: float = 1.0) -> list[GeneratorTerm]:
    comps = [bohr_components(local_hamiltonian(w, drive_prefactor)) for w in (omega_1, omega_2)]
    terms = []
    for i, j in product(range(2), repeat=2):
        for v, s_j in comps[j].items():
            name_a, w_a = _label(s_j)
            for v_prime, s_i in comps[i].items():
                name_b, w_b = _label(s_i.conj().T)
                terms.append(
                    GeneratorTerm(
                        pair=(i, j),
                        kernel_omega=v,
                        alpha=_on_emitter(s_j, j),
                        beta=_on_emitter(s_i.conj().T, i),
                        chi=round(v - v_prime, _FREQ_DECIMALS) + 0.0,
                        alpha_label=name_a,
                        beta_label=name_b,
                        sign=int(np.sign(w_a * w_b)),
                        weight=abs(w_a * w_b),
                    )
                )
    return terms


def secular_filter(terms: list[GeneratorTerm]) -> list[GeneratorTerm]:
    return [t for t in terms if t.chi == 0]


@dataclass(frozen=True)
class TclConfig:
    """One TCL run. ``loss`` adds local ``D[sigma_i]`` at the given rates."""

    bath: SpinChainBathParams = field(default_factory=SpinChainBathParams)
    omega_1: complex = 0.063
    omega_2: complex = 0.0
    mode: str = "tcl2"
    t_max: float = 150.0
    dt: float = 0.05
    initial_state: np.ndarray = field(default_factory=lambda: projector(KET_GG))
    drive_prefactor: float = 1.0
    loss: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}", mode=self.mode)
        if self.dt <= 0 or self.t_max <= 0:
            raise ParameterError("dt and t_max must be positive", dt=self.dt, t_max=self.t_max)
        if any(x < 0 for x in self.loss):
            raise ParameterError("loss rates must be non-negative", loss=self.loss)
        object.__setattr__(self, "initial_state", np.asarray(self.initial_state, dtype=complex))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def with_(self, **changes) -> "TclConfig":
        return replace(self, **changes)

    def system_hamiltonian(self) -> np.ndarray:
        h1 = local_hamiltonian(self.omega_1, self.drive_prefactor)
        h2 = local_hamiltonian(self.omega_2, self.drive_prefactor)
        return _on_emitter(h1, 0) + _on_emitter(h2, 1)

    def terms(self) -> list[GeneratorTerm]:
        terms = derive_generator_terms(self.omega_1, self.omega_2, self.drive_prefactor)
        return secular_filter(terms) if self.mode == "secular" else terms


@dataclass
class Perturbation:
    """Per-step disorder applied on the RK4 grid (piecewise constant over a step).

    ``position`` shifts emitter 2 by a fraction of a lattice site and rotates the
    cross kernels by ``e^{-i pi q/2}`` (mid-band wavenumber); ``detuning`` adds
    ``delta_i sigma_i^+ sigma_i^-`` to the emitter Hamiltonian.
    """

    position: np.ndarray | float = 0.0
    detuning: tuple = (0.0, 0.0)


@lru_cache(maxsize=512)
def _lattice_table(m: int, omega: float, hopping: float, n: int, spacing: float) -> np.ndarray:
    table = lattice_integral_grid(m, omega, spacing * np.arange(n + 1), hopping)
    table.setflags(write=False)
    return table


def _kernel_table(i, j, omega, params: SpinChainBathParams, n: int, spacing: float) -> np.ndarray:
    by_distance: dict[int, complex] = {}
    for a, b in product(SIDES, repeat=2):
        weight = params.coupling(i, a) * np.conj(params.coupling(j, b))
        m = abs(params.site(i, a) - params.site(j, b))
        by_distance[m] = by_distance.get(m, 0) + weight
    out = np.zeros(n + 1, dtype=complex)
    for m, weight in by_distance.items():
        if weight != 0:
            out += weight * _lattice_table(m, float(omega + params.detuning), params.hopping, n, spacing)
    return out


def _left_right(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> left X right`` on column-stacked vectors."""
    return np.kron(right.T, left)


def _commutator_superops(term: GeneratorTerm) -> tuple[np.ndarray, np.ndarray]:
    """``[a X, b]`` and its Hermitian conjugate map ``[b^dag, X a^dag]``."""
    a, b = term.alpha, term.beta
    eye = np.eye(4)
    direct = _left_right(a, b) - _left_right(b @ a, eye)
    ad, bd = a.conj().T, b.conj().T
    conj = _left_right(bd, ad) - _left_right(eye, ad @ bd)
    return direct, conj


def kernel_coefficients(config: TclConfig, terms: list[GeneratorTerm], times: np.ndarray) -> np.ndarray:
    """``e^{i chi t} Gamma(t)`` for every term on ``times`` (shape ``(len(times), len(terms))``)."""
    spacing = float(times[1] - times[0]) if len(times) > 1 else 1.0
    n = len(times) - 1
    cache: dict[tuple, np.ndarray] = {}
    out = np.empty((len(times), len(terms)), dtype=complex)
    for k, term in enumerate(terms):
        key = (term.pair, term.kernel_omega)
        if key not in cache:
            if config.mode == "tcl2":
                cache[key] = _kernel_table(*term.pair, term.kernel_omega, config.bath, n, spacing)
            else:
                value = redfield_kernel_closed_form(*term.pair, term.kernel_omega, config.bath)
                cache[key] = np.full(len(times), value)
        out[:, k] = np.exp(1j * term.chi * times) * cache[key]
    return out


@dataclass
class TclGenerator:
    """Tabulated 16x16 generators on the half-step grid.

    ``local`` holds the emitter-diagonal part (kernels with i = j plus any
    loss), ``cross`` and ``cross_conj`` the i != j part and its h.c. so
    that position disorder can rotate them independently.
    """

    times: np.ndarray
    local: np.ndarray
    cross: np.ndarray
    cross_conj: np.ndarray
    config: TclConfig

    def at(self, k: int, phase: complex = 1.0) -> np.ndarray:
        return self.local[k] + phase * self.cross[k] + np.conj(phase) * self.cross_conj[k]


def _propagator_frames(h: np.ndarray, times: np.ndarray) -> np.ndarray:
    """``U(t) = e^{-iHt}`` on a grid."""
    energies, vecs = np.linalg.eigh(h)
    phases = np.exp(-1j * np.outer(times, energies))
    return np.einsum("ij,tj,kj->tik", vecs, phases, vecs.conj())


def _dissipator(c: np.ndarray) -> np.ndarray:
    eye = np.eye(c.shape[-1])
    cdc = c.conj().T @ c
    return _left_right(c, c.conj().T) - 0.5 * _left_right(cdc, eye) - 0.5 * _left_right(eye, cdc)


def build_generator(config: TclConfig, terms: list[GeneratorTerm] | None = None) -> TclGenerator:
    terms = config.terms() if terms is None else terms
    half = 0.5 * config.dt
    times = half * np.arange(2 * config.n_steps + 1)
    coeffs = kernel_coefficients(config, terms, times)
    local = np.zeros((len(times), 16, 16), dtype=complex)
    cross = np.zeros_like(local)
    cross_conj = np.zeros_like(local)
    for k, term in enumerate(terms):
        direct, conj = _commutator_superops(term)
        into, into_conj = (local, local) if term.pair[0] == term.pair[1] else (cross, cross_conj)
        into += coeffs[:, k, None, None] * direct
        into_conj += np.conj(coeffs[:, k])[:, None, None] * conj
    if any(config.loss):
        frames = _propagator_frames(config.system_hamiltonian(), times)
        for emitter, rate in enumerate(config.loss):
            if rate:
                lowered = frames.conj().transpose(0, 2, 1) @ _on_emitter(SIGMA_MINUS, emitter) @ frames
                local += rate * np.stack([_dissipator(c) for c in lowered])
    return TclGenerator(times, local, cross, cross_conj, config)


def tcl2_rhs(t: float, rho_tilde, config: TclConfig, generator: TclGenerator | None = None) -> np.ndarray:
    """Interaction-picture derivative at a half-step grid time."""
    generator = build_generator(config) if generator is None else generator
    k = int(round(t / (0.5 * config.dt)))
    if k < 0 or k >= len(generator.times) or abs(generator.times[k] - t) > 1e-9:
        raise ParameterError("t is not on the kernel grid", t=t, spacing=0.5 * config.dt)
    return devectorize(generator.at(k) @ vectorize(rho_tilde))


def _detuning_superops(config: TclConfig, times: np.ndarray) -> list[np.ndarray]:
    frames = _propagator_frames(config.system_hamiltonian(), times)
    eye = np.eye(4)
    out = []
    for emitter in range(2):
        n_tilde = frames.conj().transpose(0, 2, 1) @ _on_emitter(NUMBER, emitter) @ frames
        out.append(-1j * np.stack([_left_right(h, eye) - _left_right(eye, h) for h in n_tilde]))
    return out


def _per_step(value, n_steps: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    return np.full(n_steps, float(arr)) if arr.ndim == 0 else arr[:n_steps]


def _observables(states: np.ndarray, psd_tol: float) -> tuple[dict, dict]:
    traces = np.trace(states, axis1=-2, axis2=-1).real
    herm = 0.5 * (states + states.conj().transpose(0, 2, 1))
    normed = herm / traces[:, None, None]
    min_eig = float(np.linalg.eigvalsh(normed).min())
    obs = {
        "concurrence": concurrence(normed, psd_tol=psd_tol),
        "chi_minus_fidelity": state_fidelity(normed, CHI_MINUS),
        "chi_plus_fidelity": state_fidelity(normed, CHI_PLUS),
        "rho_ee": normed[:, 3, 3].real,
        "rho_eg": normed[:, 2, 2].real,
        "rho_ge": normed[:, 1, 1].real,
        "trace": traces,
    }
    return obs, {"min_eigenvalue": min_eig}


def integrate_tcl(
    config: TclConfig,
    perturbation: Perturbation | None = None,
    generator: TclGenerator | None = None,
    psd_tol: float = TCL_PSD_TOL,
) -> Trajectory:
    """Fixed-step RK4 of the interaction-picture state; observables in the lab frame."""
    generator = build_generator(config) if generator is None else generator
    n = config.n_steps
    dt = config.dt
    pert = perturbation or Perturbation()
    phases = np.exp(-0.5j * math.pi * _per_step(pert.position, n))
    deltas = [_per_step(d, n) for d in pert.detuning]
    detuned = any(np.any(d != 0) for d in deltas)
    shifts = _detuning_superops(config, generator.times) if detuned else None

    def gen(k_half: int, step: int) -> np.ndarray:
        out = generator.at(k_half, phases[step])
        if detuned:
            out = out + deltas[0][step] * shifts[0][k_half] + deltas[1][step] * shifts[1][k_half]
        return out

    vecs = np.empty((n + 1, 16), dtype=complex)
    vecs[0] = vectorize(config.initial_state)
    v = vecs[0]
    for step in range(n):
        k = 2 * step
        g0, g1, g2 = gen(k, step), gen(k + 1, step), gen(k + 2, step)
        k1 = g0 @ v
        k2 = g1 @ (v + 0.5 * dt * k1)
        k3 = g1 @ (v + 0.5 * dt * k2)
        k4 = g2 @ (v + dt * k3)
        v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        vecs[step + 1] = v
    times = dt * np.arange(n + 1)
    frames = _propagator_frames(config.system_hamiltonian(), times)
    lab = frames @ devectorize(vecs) @ frames.conj().transpose(0, 2, 1)
    drift = np.abs(np.trace(lab, axis1=-2, axis2=-1) - np.trace(config.initial_state))
    if drift.max() > TRACE_DRIFT_LIMIT:
        k = int(np.argmax(drift > TRACE_DRIFT_LIMIT))
        raise IntegrationError("trace drift exceeds limit", step=k, drift=float(drift[k]))
    obs, diag = _observables(lab, psd_tol)
    diag["max_trace_drift"] = float(drift.max())
    return Trajectory(times, obs, lab, diag)


def first_peak_concurrence(traj: Trajectory) -> tuple[float, float, float]:
    """(time, concurrence, chi_minus fidelity) at the first concurrence peak."""
    k = first_peak_index(traj["concurrence"])
    return float(traj.times[k]), float(traj["concurrence"][k]), float(traj["chi_minus_fidelity"][k])


@dataclass
class OptimizationResult:
    best: dict[str, float]
    best_value: float
    grid: dict[str, np.ndarray]
    surface: np.ndarray
    history: list[tuple[dict, float]]


_OPT_KEYS = ("omega_1", "omega_2", "g_1", "g_2")


def _objective(base: TclConfig, point: dict) -> float:
    bath = base.bath.replace(g_1=point["g_1"], g_2=point["g_2"])
    cfg = base.with_(bath=bath, omega_1=point["omega_1"], omega_2=point["omega_2"])
    return first_peak_concurrence(integrate_tcl(cfg))[1]


def optimize_parameters(
    base: TclConfig,
    bounds: dict[str, tuple[float, float]],
    points_per_axis: int = 5,
    refine_steps: int = 12,
) -> OptimizationResult:
    """Coarse grid then a deterministic compass search within the box.

    ``bounds`` maps each of omega_1, omega_2, g_1, g_2 to (low, high); a
    missing key is held at the base value.
    """
    start = {"omega_1": float(np.real(base.omega_1)), "omega_2": float(np.real(base.omega_2)),
             "g_1": base.bath.g_1, "g_2": base.bath.g_2}
    box = {k: tuple(map(float, bounds.get(k, (start[k], start[k])))) for k in _OPT_KEYS}
    for k, (lo, hi) in box.items():
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ParameterError("bounds must be finite with low <= high", key=k, bounds=(lo, hi))
    grid = {k: np.unique(np.linspace(lo, hi, points_per_axis)) for k, (lo, hi) in box.items()}
    history: list[tuple[dict, float]] = []
    shape = tuple(len(grid[k]) for k in _OPT_KEYS)
    surface = np.empty(shape)
    for idx in np.ndindex(*shape):
        point = {k: float(grid[k][i]) for k, i in zip(_OPT_KEYS, idx)}
        surface[idx] = _objective(base, point)
        history.append((point, float(surface[idx])))
    best_idx = np.unravel_index(int(np.argmax(surface)), shape)
    best = {k: float(grid[k][i]) for k, i in zip(_OPT_KEYS, best_idx)}
    best_value = float(surface[best_idx])
    steps = {k: (hi - lo) / max(points_per_axis - 1, 1) / 2 for k, (lo, hi) in box.items()}
    for _ in range(refine_steps):
        improved = False
        for k in _OPT_KEYS:
            if steps[k] == 0:
                continue
            for direction in (+1, -1):
                trial = dict(best)
                trial[k] = min(max(best[k] + direction * steps[k], box[k][0]), box[k][1])
                if trial[k] == best[k]:
                    continue
                value = _objective(base, trial)
                history.append((trial, value))
                if value > best_value:
                    best, best_value, improved = trial, value, True
                    break
        if not improved:
            steps = {k: s / 2 for k, s in steps.items()}
    return OptimizationResult(best, best_value, grid, surface, history)


@dataclass
class DistanceSurface:
    omega_1: np.ndarray
    separations: np.ndarray
    max_concurrence: np.ndarray  # (len(omega_1), len(separations))
    first_peak: np.ndarray
    min_eigenvalue: np.ndarray  # TCL-2 positivity loss per cell


def distance_sweep(base: TclConfig, omega_1_values, separations) -> DistanceSurface:
    """Peak concurrence over (drive, separation) with the couplings of ``base``.

    Long delays push TCL-2 states outside the positive cone; cells are kept
    and their lowest eigenvalue reported instead of aborting the sweep.
    """
    o1 = np.asarray(omega_1_values, dtype=float)
    ds = np.asarray(separations, dtype=int)
    if np.any(ds < 1):
        raise ParameterError("separations must be >= 1", separations=ds.tolist())
    cmax = np.empty((len(o1), len(ds)))
    first = np.empty_like(cmax)
    lowest = np.empty_like(cmax)
    for a, w in enumerate(o1):
        for b, d in enumerate(ds):
            bath = base.bath.replace(coupling_points=((0, 1), (int(d), int(d) + 1)))
            traj = integrate_tcl(base.with_(bath=bath, omega_1=float(w)), psd_tol=math.inf)
            cmax[a, b] = float(traj["concurrence"].max())
            first[a, b] = float(traj["concurrence"][first_peak_index(traj["concurrence"])])
            lowest[a, b] = traj.diagnostics["min_eigenvalue"]
    return DistanceSurface(o1, ds, cmax, first, lowest)


@dataclass
class BlpWitness:
    times: np.ndarray
    distance: np.ndarray

    def revival(self, window: tuple[float, float] | None = None) -> float:
        """Integral of the positive part of ``dD/dt``, optionally inside a time window."""
        steps = np.diff(self.distance)
        mid = 0.5 * (self.times[1:] + self.times[:-1])
        if window is not None:
            steps = steps[(mid >= window[0]) & (mid <= window[1])]
        return float(np.sum(np.clip(steps, 0.0, None)))


def blp_witness(config: TclConfig, rho_a=None, rho_b=None) -> BlpWitness:
    """Trace distance between evolutions of two initial states (default |gg>, |eg>)."""
    rho_a = projector(KET_GG) if rho_a is None else rho_a
    rho_b = projector(KET_EG) if rho_b is None else rho_b
    generator = build_generator(config)
    ta = integrate_tcl(config.with_(initial_state=rho_a), generator=generator)
    tb = integrate_tcl(config.with_(initial_state=rho_b), generator=generator)
    return BlpWitness(ta.times, trace_distance(ta.states, tb.states))


def beta_loss_config(base: TclConfig, beta_1: float, beta_2: float) -> TclConfig:
    """Keep each emitter's total rate ``2 g^2/J`` fixed while a fraction leaves the chain.

    The guided coupling is scaled to ``g sqrt(beta)`` and the remainder is a
    local loss ``(1 - beta) 2 g^2/J``.
    """
    for b in (beta_1, beta_2):
        if not 0 < b <= 1:
            raise ParameterError("beta must lie in (0, 1]", beta=b)
    bath = base.bath
    total = [2 * g * g / bath.hopping for g in (bath.g_1, bath.g_2)]
    scaled = bath.replace(g_1=bath.g_1 * math.sqrt(beta_1), g_2=bath.g_2 * math.sqrt(beta_2))
    return base.with_(bath=scaled, loss=((1 - beta_1) * total[0], (1 - beta_2) * total[1]))
