"""Disorder ensembles and guided-fraction scans for the TCL and Markov engines.

Position disorder shifts the downstream plaquette by a continuous ``q``
(lattice units) and enters as a mid-band phase on the cross kernels.
Detuning disorder adds ``delta_i sigma_i^+ sigma_i^-`` to the emitter
Hamiltonian while the kernels stay at their nominal frequencies.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ChiralNetError, ParameterError
from .markov import ChiralMarkovParams, integrate_markov
from .quantum import KET_GG, concurrence, projector
from .tcl2 import Perturbation, TclConfig, beta_loss_config, build_generator, integrate_tcl
from .trajectory import Trajectory, first_peak_index

TARGETS = ("position", "detuning_1", "detuning_2", "detuning_both")
KINDS = ("quasi_static", "dynamic_ou")
PATTERNS = ("both", "upstream_only", "downstream_only")


@dataclass(frozen=True)
class DisorderSpec:
    target: str = "position"
    kind: str = "quasi_static"
    sigma: float = 0.0
    tau: float = 5.0
    realizations: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ParameterError(f"target must be one of {TARGETS}", target=self.target)
        if self.kind not in KINDS:
            raise ParameterError(f"kind must be one of {KINDS}", kind=self.kind)
        if not self.sigma >= 0:
            raise ParameterError("sigma must be non-negative", sigma=self.sigma)
        if self.kind == "dynamic_ou" and not self.tau > 0:
            raise ParameterError("tau must be positive for dynamic disorder", tau=self.tau)
        if self.realizations < 1:
            raise ParameterError("need at least one realization", realizations=self.realizations)

    @property
    def n_channels(self) -> int:
        """Independent noise sources: two for ``detuning_both``, else one."""
        return 2 if self.target == "detuning_both" else 1


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per realization, fixed by ``(seed, index)`` alone."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def sample_quasi_static(spec: DisorderSpec, rng: np.random.Generator, size=None):
    """One Gaussian offset (or ``size`` of them) held fixed over a trajectory."""
    return spec.sigma * rng.standard_normal(size)


def ou_path(spec: DisorderSpec, dt: float, t_max: float, rng: np.random.Generator) -> np.ndarray:
    """Exact OU discretization on ``t = 0, dt, ..., t_max`` from the stationary law."""
    n = int(round(t_max / dt))
    decay = math.exp(-dt / spec.tau)
    kick = spec.sigma * math.sqrt(1 - decay * decay)
    noise = rng.standard_normal(n + 1)
    path = np.empty(n + 1)
    path[0] = spec.sigma * noise[0]
    for k in range(n):
        path[k + 1] = decay * path[k] + kick * noise[k + 1]
    return path


def sample_perturbation(spec: DisorderSpec, config: TclConfig, index: int) -> Perturbation:
    rng = realization_rng(spec.seed, index)
    if spec.kind == "quasi_static":
        draws = [float(sample_quasi_static(spec, rng)) for _ in range(spec.n_channels)]
    else:
        draws = [ou_path(spec, config.dt, config.t_max, rng)[:-1] for _ in range(spec.n_channels)]
    if spec.target == "position":
        return Perturbation(position=draws[0])
    if spec.target == "detuning_1":
        return Perturbation(detuning=(draws[0], 0.0))
    if spec.target == "detuning_2":
        return Perturbation(detuning=(0.0, draws[0]))
    return Perturbation(detuning=(draws[0], draws[1]))


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean_concurrence: np.ndarray
    std_concurrence: np.ndarray
    mean_state_concurrence: np.ndarray
    realizations: int
    failures: list[dict] = field(default_factory=list)
    first_peaks: np.ndarray | None = None

    def mean_first_peak(self) -> float:
        """Mean over realizations of each trajectory's first-peak concurrence."""
        return float(np.mean(self.first_peaks))

    def first_peak_of_mean(self) -> float:
        return float(self.mean_concurrence[first_peak_index(self.mean_concurrence)])


_WORKER: dict = {}


def _init_worker(config: TclConfig) -> None:
    _WORKER["config"] = config
    _WORKER["generator"] = build_generator(config)


def _run_one(args):
    spec, index = args
    config = _WORKER["config"]
    try:
        traj = integrate_tcl(config, sample_perturbation(spec, config, index), _WORKER["generator"])
    except ChiralNetError as exc:
        return index, None, exc.to_dict()
    return index, traj, None


class _Accumulator:
    """Welford running mean and variance plus the summed state."""

    def __init__(self):
        self.count = 0
        self.mean = self.m2 = self.state_sum = None

    def add(self, series: np.ndarray, states: np.ndarray) -> None:
        self.count += 1
        if self.mean is None:
            self.mean = np.zeros_like(series)
            self.m2 = np.zeros_like(series)
            self.state_sum = np.zeros_like(states)
        delta = series - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (series - self.mean)
        self.state_sum = self.state_sum + states

    def std(self) -> np.ndarray:
        return np.sqrt(self.m2 / self.count)


def run_disorder_ensemble(config: TclConfig, spec: DisorderSpec, jobs: int = 1) -> EnsembleResult:
    """All realizations of ``spec`` on the TCL engine.

    Results are folded in realization order, so the outcome does not depend
    on ``jobs``. Failed realizations are excluded and listed.
    """
    if jobs < 1:
        raise ParameterError("jobs must be at least 1", jobs=jobs)
    tasks = [(spec, i) for i in range(spec.realizations)]
    if jobs == 1:
        _init_worker(config)
        outcomes = list(map(_run_one, tasks))
    else:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(config,)) as pool:
            outcomes = list(pool.map(_run_one, tasks))
    acc = _Accumulator()
    failures, peaks, times = [], [], None
    for index, traj, error in outcomes:
        if traj is None:
            failures.append({"realization": index, **error})
            continue
        times = traj.times
        series = traj["concurrence"]
        peaks.append(series[first_peak_index(series)])
        acc.add(series, traj.states)
    if acc.count == 0:
        raise ChiralNetError("every realization failed", failures=failures)
    averaged = acc.state_sum / acc.count
    averaged = averaged / np.trace(averaged, axis1=-2, axis2=-1).real[:, None, None]
    return EnsembleResult(
        times,
        acc.mean,
        acc.std(),
        concurrence(0.5 * (averaged + averaged.conj().transpose(0, 2, 1)), psd_tol=1.0),
        acc.count,
        failures,
        np.array(peaks),
    )


def beta_pattern(a: float, pattern: str) -> tuple[float, float]:
    if pattern not in PATTERNS:
        raise ParameterError(f"pattern must be one of {PATTERNS}", pattern=pattern)
    if not 0 < a <= 1:
        raise ParameterError("beta must lie in (0, 1]", beta=a)
    return {"both": (a, a), "upstream_only": (a, 1.0), "downstream_only": (1.0, a)}[pattern]


@dataclass
class BetaScan:
    a_values: np.ndarray
    pattern: str
    engine: str
    first_peak: np.ndarray
    plateau: np.ndarray
    trajectories: list[Trajectory]


def _plateau(series: np.ndarray) -> float:
    tail = max(1, len(series) // 10)
    return float(np.mean(series[-tail:]))


def beta_factor_scan(
    a_values,
    pattern: str = "both",
    engine: str = "tcl2",
    tcl_config: TclConfig | None = None,
    markov_params: ChiralMarkovParams | None = None,
    markov_time: tuple[float, float] = (10.0, 0.01),
) -> BetaScan:
    """First-peak and late-plateau concurrence against the guided fraction.

    The Markov engine keeps ``gamma_tot`` and drives of ``markov_params``
    (defaults: fully chiral, ``gamma_tot = 1`` at the driven optimum); the
    TCL engine keeps each emitter's ``2 g^2/J``.
    """
    a_values = np.asarray(a_values, dtype=float)
    trajs = []
    for a in a_values:
        b1, b2 = beta_pattern(float(a), pattern)
        if engine == "markov":
            base = markov_params or ChiralMarkovParams(omega_1=2.05, omega_2=0.74)
            params = ChiralMarkovParams.with_beta(
                b1, b2, gamma_tot=base.gamma_L + base.gamma_R, phi=base.phi,
                omega_1=base.omega_1, omega_2=base.omega_2, detuning=base.detuning,
            )
            trajs.append(integrate_markov(params, projector(KET_GG), *markov_time))
        elif engine in ("tcl2", "redfield", "secular"):
            base = tcl_config or TclConfig(mode=engine)
            trajs.append(integrate_tcl(beta_loss_config(base, b1, b2)))
        else:
            raise ParameterError("engine must be markov, tcl2, redfield or secular", engine=engine)
    first = np.array([t["concurrence"][first_peak_index(t["concurrence"])] for t in trajs])
    plateau = np.array([_plateau(t["concurrence"]) for t in trajs])
    return BetaScan(a_values, pattern, engine, first, plateau, trajs)
