"""Time evolution of the chain with emitter, bath and correlation diagnostics."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, TraceDriftError
from ..quantum import (
    CHI_MINUS,
    CHI_PLUS,
    SubsystemSplit,
    clipped_eigh,
    concurrence,
    mutual_information,
    state_fidelity,
    trace_distance_correlation,
)
from ..trajectory import Trajectory
from .chain import ChainModel
from .measure import TraceEnvironments, bond_currents, populations, transverse_coherence
from .mpo import build_liouvillian_mpo
from .state import EXCITED, GROUND, VectorizedMPS
from .tdvp import TdvpConfig, TdvpEngine

TRACE_DRIFT_ABORT = 0.05
INITIAL_STATES = ("gg", "eg", "ge", "ee")


def initial_product(model: ChainModel, label: str, d_max: int) -> VectorizedMPS:
    """Vacuum chain with the emitters in ``label`` (upstream emitter first)."""
    if label not in INITIAL_STATES:
        raise ParameterError(f"initial state must be one of {INITIAL_STATES}", initial=label)
    local = [GROUND] * model.n_sites
    for site, level in zip(model.emitters, label):
        if level == "e":
            local[site] = EXCITED
    return VectorizedMPS.product(local, d_max)


@dataclass(frozen=True)
class MpsRunOptions:
    """What to record besides the emitter observables.

    ``windows`` lists bath-site groups (at most two sites each) whose
    correlations with the emitter pair are tracked.
    """

    t_max: float = 40.0
    record_every: int = 1
    bath: bool = True
    windows: tuple[tuple[int, ...], ...] = ()
    drift_limit: float = TRACE_DRIFT_ABORT
    keep_state: bool = False


def _window_correlations(env: TraceEnvironments, emitters, window):
    """Correlations of the positive part of the window state, plus its lowest eigenvalue.

    Truncated bonds leave eigenvalues of order -1e-7; they are clipped and reported.
    """
    sites = sorted({*emitters, *window})
    rho = env.reduced(sites)
    rho = rho / np.trace(rho).real
    lowest = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    evals, evecs = clipped_eigh(rho, psd_tol=np.inf)
    rho = (evecs * evals) @ evecs.conj().T
    rho = rho / np.trace(rho).real
    keep = tuple(sites.index(e) for e in emitters)
    split = SubsystemSplit((2,) * len(sites), keep)
    return mutual_information(rho, split), trace_distance_correlation(rho, split), lowest


def _emitter_state(env: TraceEnvironments, emitters) -> np.ndarray:
    rho = env.reduced(emitters)
    rho = rho / np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)


def run_mps_experiment(
    model: ChainModel,
    config: TdvpConfig,
    initial: str = "gg",
    options: MpsRunOptions = MpsRunOptions(),
) -> Trajectory:
    """Evolve ``initial`` and record observables every ``record_every`` steps.

    Raises :class:`TraceDriftError` once ``|Tr rho - 1|`` passes the limit.
    """
    n_steps = int(round(options.t_max / config.dt))
    if n_steps < 1 or options.record_every < 1:
        raise ParameterError("need at least one step", t_max=options.t_max, dt=config.dt)
    state = initial_product(model, initial, config.d_max)
    engine = TdvpEngine(state, build_liouvillian_mpo(model), config)
    emitters = model.emitters
    series: dict[str, list] = {"concurrence": [], "chi_minus_fidelity": [], "chi_plus_fidelity": [], "trace": [], "trace_drift": []}
    for w in range(len(options.windows)):
        series[f"mutual_information_{w}"] = []
        series[f"trace_distance_correlation_{w}"] = []
        series[f"window_min_eigenvalue_{w}"] = []
    bath: dict[str, list] = {"populations": [], "bond_currents": [], "coherence": []}
    emitter_states, times = [], []
    started = time.perf_counter()
    for k in range(n_steps + 1):
        if k:
            engine.step()
        if k % options.record_every and k != n_steps:
            continue
        env = TraceEnvironments(engine.state)
        tr = env.trace().real
        drift = abs(tr - 1)
        if drift > options.drift_limit:
            raise TraceDriftError(
                "trace drift beyond limit; raise d_max or shorten the run",
                time=k * config.dt, drift=drift, d_max=config.d_max,
            )
        rho = _emitter_state(env, emitters)
        times.append(k * config.dt)
        emitter_states.append(rho)
        series["concurrence"].append(float(concurrence(rho, psd_tol=1.0)))
        series["chi_minus_fidelity"].append(float(state_fidelity(rho, CHI_MINUS)))
        series["chi_plus_fidelity"].append(float(state_fidelity(rho, CHI_PLUS)))
        series["trace"].append(tr)
        series["trace_drift"].append(drift)
        for w, window in enumerate(options.windows):
            mi, ctr, lowest = _window_correlations(env, emitters, window)
            series[f"mutual_information_{w}"].append(mi)
            series[f"trace_distance_correlation_{w}"].append(ctr)
            series[f"window_min_eigenvalue_{w}"].append(lowest)
        if options.bath:
            bath["populations"].append(populations(env))
            bath["bond_currents"].append(bond_currents(env, model.nn))
            bath["coherence"].append(transverse_coherence(env))
    diagnostics = {
        "max_trace_drift": float(max(series["trace_drift"])),
        "wall_seconds": time.perf_counter() - started,
        "d_max": config.d_max,
        "dt": config.dt,
        "emitters": emitters,
    }
    if options.keep_state:
        diagnostics["final_state"] = engine.state
    if options.bath:
        diagnostics.update({name: np.array(v) for name, v in bath.items()})
    return Trajectory(np.array(times), series, np.array(emitter_states), diagnostics)
