"""Dispatch validated configs to the engines and write CSV/JSON outputs."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bath import SpinChainBathParams, redfield_kernel, tcl_kernel_series
from .config import ExperimentConfig, KernelsSection, config_from_dict, config_hash, config_to_dict, merge
from .errors import ConfigError
from .markov import ChiralMarkovParams, drive_sweep, integrate_markov
from .mps import MpsRunOptions, TdvpConfig, build_chain_model, run_mps_experiment, save_checkpoint
from .quantum import BELL_SINGLET, basis_ket, projector, trace_distance
from .robustness import DisorderSpec, beta_factor_scan, run_disorder_ensemble
from .tcl2 import TclConfig, derive_generator_terms, distance_sweep, integrate_tcl, optimize_parameters
from .trajectory import Trajectory, first_peak_index

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "sweep", "disorder", "kernels", "optimize")


# ---------------------------------------------------------------- builders


def initial_density(config: ExperimentConfig) -> np.ndarray:
    if isinstance(config.initial, list):
        return projector(np.array([complex(a, b) for a, b in config.initial]))
    if config.initial == "bell":
        return projector(BELL_SINGLET)
    return projector(basis_ket(config.initial))


def markov_params(config: ExperimentConfig) -> ChiralMarkovParams:
    m = config.markov
    w1, w2 = config.drive.complex_pair()
    return ChiralMarkovParams(
        gamma_L=m.gamma_L, gamma_R=m.gamma_R, phi=m.phi, omega_1=w1, omega_2=w2,
        detuning=m.detuning, gamma_loss=m.gamma_loss, guided_weights=m.guided_weights,
    )


def bath_params(config: ExperimentConfig) -> SpinChainBathParams:
    b = config.bath
    return SpinChainBathParams.from_separation(
        b.separation, hopping=b.hopping, detuning=b.detuning,
        g_1=b.g_1, g_2=b.g_2, phi_1=b.phi_1, phi_2=b.phi_2,
    )


def tcl_config(config: ExperimentConfig) -> TclConfig:
    t_max, dt = config.time_grid()
    w1, w2 = config.drive.complex_pair()
    return TclConfig(
        bath=bath_params(config), omega_1=w1, omega_2=w2, mode=config.engine,
        t_max=t_max, dt=dt, initial_state=initial_density(config),
        drive_prefactor=config.tcl.drive_prefactor, loss=config.tcl.loss,
    )


def chain_model(config: ExperimentConfig):
    b, m = config.bath, config.mps
    return build_chain_model(
        n_sites=m.n_sites, emitters=m.emitters, hopping=b.hopping, g=(b.g_1, b.g_2),
        phi=(b.phi_1, b.phi_2), edge_loss=m.edge_loss, drives=config.drive.complex_pair(),
        detunings=(b.detuning, b.detuning),
    )


def tdvp_config(config: ExperimentConfig) -> TdvpConfig:
    _, dt = config.time_grid()
    m = config.mps
    return TdvpConfig(dt=dt, d_max=m.d_max, krylov_dim=m.krylov_dim, krylov_tol=m.krylov_tol)


def simulate(config: ExperimentConfig) -> Trajectory:
    t_max, dt = config.time_grid()
    if config.engine == "markov":
        return integrate_markov(markov_params(config), initial_density(config), t_max, dt)
    if config.engine == "mps":
        m = config.mps
        options = MpsRunOptions(
            t_max=t_max, record_every=m.record_every, bath=m.bath_observables,
            windows=tuple(tuple(w) for w in m.windows), keep_state=m.checkpoint,
        )
        return run_mps_experiment(chain_model(config), tdvp_config(config), config.initial, options)
    return integrate_tcl(tcl_config(config))


def with_initial(config: ExperimentConfig, label: str) -> ExperimentConfig:
    return config_from_dict(merge(config_to_dict(config), {"initial": label}))


# ---------------------------------------------------------------- output


def _number(x) -> str:
    return format(float(x), ".17g")


@dataclass
class OutputWriter:
    """Writes CSVs with a provenance comment block and keeps the file list."""

    directory: Path
    config_digest: str
    files: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.directory.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, columns: dict[str, np.ndarray], note: str = "") -> Path:
        path = self.directory / name
        names = list(columns)
        arrays = [np.asarray(columns[n]) for n in names]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# config_hash: {self.config_digest}\n")
            fh.write(f"# artifact: chiralnet {__version__}\n")
            if note:
                fh.write(f"# {note}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names)
            for row in zip(*arrays):
                writer.writerow([v if isinstance(v, str) else _number(v) for v in row])
        self.files.append(path.name)
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.directory / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
        self.files.append(path.name)
        return path


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _scalar_series(traj: Trajectory, wanted: list[str]) -> dict[str, np.ndarray]:
    cols = {"t": traj.times}
    for name, series in traj.observables.items():
        if wanted and name not in wanted:
            continue
        if np.iscomplexobj(series):
            cols[f"{name}_re"], cols[f"{name}_im"] = series.real, series.imag
        else:
            cols[name] = series
    return cols


def trajectory_summary(traj: Trajectory) -> dict:
    c = traj["concurrence"]
    k_peak, k_first = int(np.argmax(c)), first_peak_index(c)
    out = {
        "peak_concurrence": float(c[k_peak]),
        "peak_time": float(traj.times[k_peak]),
        "first_peak_concurrence": float(c[k_first]),
        "first_peak_time": float(traj.times[k_first]),
    }
    for name in ("bell_fidelity", "chi_minus_fidelity", "chi_plus_fidelity"):
        if name in traj.observables:
            out[f"{name}_at_first_peak"] = float(traj[name][k_first])
            out[f"max_{name}"] = float(traj[name].max())
    for key in ("max_trace_drift", "min_eigenvalue"):
        if key in traj.diagnostics:
            out[key] = float(traj.diagnostics[key])
    return out


def _heatmap(times, values) -> dict[str, np.ndarray]:
    values = np.asarray(values)
    n_t, n_s = values.shape
    return {"t": np.repeat(times, n_s), "site": np.tile(np.arange(n_s), n_t), "value": values.reshape(-1)}


# ---------------------------------------------------------------- commands


def _simulate(config: ExperimentConfig, out: OutputWriter, jobs: int) -> dict:
    traj = simulate(config)
    out.csv("trajectory.csv", _scalar_series(traj, config.outputs))
    results = trajectory_summary(traj)
    if config.engine == "mps":
        d = traj.diagnostics
        if config.mps.bath_observables:
            out.csv("populations.csv", _heatmap(traj.times, d["populations"]), "site populations <n_j>")
            out.csv("coherence.csv", _heatmap(traj.times, d["coherence"]), "transverse coherence per site")
            out.csv("bond_currents.csv", _heatmap(traj.times, d["bond_currents"]), "current on bond (site, site+1)")
        if config.mps.checkpoint:
            save_checkpoint(out.directory / "final_state.mps", d["final_state"], config.mps.d_max)
            out.files.append("final_state.mps")
    if config.blp is not None:
        results.update(_blp(config, traj, out, "blp_distance.csv"))
    return results


def _blp(config: ExperimentConfig, traj: Trajectory, out: OutputWriter, name: str) -> dict:
    """Trace distance between runs from the two states of ``config.blp.pair``."""
    a, b = config.blp.pair
    ta = traj if config.initial == a else simulate(with_initial(config, a))
    tb = simulate(with_initial(config, b))
    distance = trace_distance(ta.states, tb.states)
    steps = np.diff(distance)
    mid = 0.5 * (ta.times[1:] + ta.times[:-1])
    lo, hi = config.blp.window
    revival = float(np.clip(steps[(mid >= lo) & (mid <= hi)], 0, None).sum())
    out.csv(name, {"t": ta.times, "trace_distance": distance}, f"pair {a} vs {b}")
    return {"blp_revival": revival, "blp_window": [lo, hi]}


def _sweep(config: ExperimentConfig, out: OutputWriter, jobs: int) -> dict:
    sweep = config.sweep
    if sweep is None:
        raise ConfigError("sweep needs a 'sweep' section", violations=[{"path": "sweep", "message": "missing"}])
    if sweep.kind == "drives":
        if config.engine != "markov":
            raise ConfigError("drive grids run on the markov engine", violations=[{"path": "engine", "message": "use markov"}])
        t_max, dt = config.time_grid()
        surf = drive_sweep(markov_params(config), sweep.omega_1.array(), sweep.omega_2.array(),
                           initial_density(config), t_max, dt)
        g1, g2 = np.meshgrid(surf.omega_1, surf.omega_2, indexing="ij")
        out.csv("surface.csv", {
            "omega_1": g1.ravel(), "omega_2": g2.ravel(),
            "max_concurrence": surf.max_concurrence.ravel(), "time_of_max_concurrence": surf.time_of_max_concurrence.ravel(),
            "max_bell_fidelity": surf.max_fidelity.ravel(), "time_of_max_bell_fidelity": surf.time_of_max_fidelity.ravel(),
        })
        w1, w2, cmax = surf.argmax("max_concurrence")
        f1, f2, fmax = surf.argmax("max_fidelity")
        return {"max_concurrence": cmax, "argmax_concurrence": [w1, w2],
                "max_bell_fidelity": fmax, "argmax_bell_fidelity": [f1, f2],
                "corner_concurrence": float(surf.max_concurrence[0, 0])}
    if sweep.kind == "separations":
        if config.engine not in ("tcl2", "redfield", "secular"):
            raise ConfigError("separation grids run on the TCL engines", violations=[{"path": "engine", "message": "use tcl2"}])
        surf = distance_sweep(tcl_config(config), sweep.omega_1.array(), sweep.separations)
        g1, g2 = np.meshgrid(surf.omega_1, surf.separations, indexing="ij")
        out.csv("surface.csv", {"omega_1": g1.ravel(), "separation": g2.ravel(),
                                "max_concurrence": surf.max_concurrence.ravel(), "first_peak": surf.first_peak.ravel(),
                                "min_eigenvalue": surf.min_eigenvalue.ravel()})
        i, j = np.unravel_index(int(np.argmax(surf.max_concurrence)), surf.max_concurrence.shape)
        return {"max_concurrence": float(surf.max_concurrence[i, j]),
                "argmax": [float(surf.omega_1[i]), int(surf.separations[j])],
                "min_eigenvalue": float(surf.min_eigenvalue.min())}
    base = config_to_dict(config)
    base.pop("sweep")
    configs = [config_from_dict(merge(base, override)) for override in sweep.cases]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            trajectories = list(pool.map(simulate, configs))
    else:
        trajectories = [simulate(c) for c in configs]
    cases = []
    for k, (override, traj) in enumerate(zip(sweep.cases, trajectories)):
        cols = _scalar_series(traj, config.outputs)
        out.csv(f"case_{k:02d}.csv", cols, json.dumps(override, sort_keys=True))
        summary = {"case": k, "override": override, **trajectory_summary(traj)}
        if configs[k].blp is not None:
            summary.update(_blp(configs[k], traj, out, f"blp_distance_{k:02d}.csv"))
        cases.append(summary)
    return {"cases": cases}


def _disorder(config: ExperimentConfig, out: OutputWriter, jobs: int) -> dict:
    if config.disorder is None and config.beta_scan is None:
        raise ConfigError("disorder needs a 'disorder' list or a 'beta_scan' section",
                          violations=[{"path": "disorder", "message": "missing"}])
    results: dict = {}
    if config.disorder:
        base = tcl_config(config)
        nominal = integrate_tcl(base)
        nominal_peak = float(nominal["concurrence"][first_peak_index(nominal["concurrence"])])
        results["nominal_first_peak"] = nominal_peak
        results["ensembles"] = []
        for k, item in enumerate(config.disorder):
            spec = DisorderSpec(item.target, item.kind, item.sigma, item.tau, item.realizations, config.seed)
            ens = run_disorder_ensemble(base, spec, jobs=jobs)
            out.csv(f"ensemble_{k:02d}.csv", {
                "t": ens.times, "mean_C": ens.mean_concurrence, "std_C": ens.std_concurrence,
                "C_of_mean_state": ens.mean_state_concurrence,
            }, f"{item.target} {item.kind} sigma={item.sigma} tau={item.tau}")
            results["ensembles"].append({
                **item.model_dump(mode="json"),
                "realizations_used": ens.realizations,
                "failures": ens.failures,
                "mean_first_peak": ens.mean_first_peak(),
                "first_peak_of_mean": ens.first_peak_of_mean(),
                "suppression": nominal_peak - ens.mean_first_peak(),
            })
    if config.beta_scan:
        engine = config.engine
        rows = {"pattern": [], "a": [], "c_max": [], "c_ss": []}
        scans = {}
        for pattern in config.beta_scan.patterns:
            if engine == "markov":
                t_max, dt = config.time_grid()
                scan = beta_factor_scan(config.beta_scan.a_values, pattern, "markov",
                                        markov_params=markov_params(config), markov_time=(t_max, dt))
            else:
                scan = beta_factor_scan(config.beta_scan.a_values, pattern, engine, tcl_config=tcl_config(config))
            scans[pattern] = {"c_max": scan.first_peak, "c_ss": scan.plateau}
            for a, cm, cs in zip(scan.a_values, scan.first_peak, scan.plateau):
                rows["pattern"].append(pattern)
                rows["a"].append(a)
                rows["c_max"].append(cm)
                rows["c_ss"].append(cs)
        out.csv("beta_scan.csv", rows)
        results["beta_scan"] = {"a_values": list(config.beta_scan.a_values), "engine": engine, "patterns": scans}
    return results


def _kernels(config: ExperimentConfig, out: OutputWriter, jobs: int) -> dict:
    section = config.kernels or KernelsSection()
    w1, w2 = config.drive.complex_pair()
    terms = derive_generator_terms(w1, w2, config.tcl.drive_prefactor)
    out.csv("generator_terms.csv", {
        "kernel": [f"Gamma_{t.pair[0] + 1}{t.pair[1] + 1}" for t in terms],
        "kernel_omega": [t.kernel_omega for t in terms],
        "alpha": [("-" if t.sign < 0 else "") + t.alpha_label for t in terms],
        "beta": [t.beta_label for t in terms],
        "chi": [t.chi for t in terms],
        "weight": [t.weight for t in terms],
    })
    params = bath_params(config)
    freqs = section.frequencies
    if freqs is None:
        freqs = sorted({t.kernel_omega for t in terms})
    times = np.arange(int(round(section.t_max / section.dt)) + 1) * section.dt
    cols: dict[str, list] = {"t": [], "kernel": [], "omega": [], "re": [], "im": []}
    redfield = {"kernel": [], "omega": [], "on_shell": [], "dispersive_re": [], "dispersive_im": []}
    for i in range(2):
        for j in range(2):
            for w in freqs:
                series = tcl_kernel_series(i, j, w, times, params)
                cols["t"].extend(times)
                cols["kernel"].extend([f"Gamma_{i + 1}{j + 1}"] * len(times))
                cols["omega"].extend([w] * len(times))
                cols["re"].extend(series.real)
                cols["im"].extend(series.imag)
                rk = redfield_kernel(i, j, w, params)
                redfield["kernel"].append(f"Gamma_{i + 1}{j + 1}")
                redfield["omega"].append(w)
                redfield["on_shell"].append(np.real(rk.on_shell))
                redfield["dispersive_re"].append(np.real(rk.dispersive))
                redfield["dispersive_im"].append(np.imag(rk.dispersive))
    out.csv("kernels.csv", cols)
    out.csv("redfield.csv", redfield)
    return {"n_terms": len(terms), "frequencies": [float(w) for w in freqs],
            "terms": [{"kernel": f"Gamma_{t.pair[0] + 1}{t.pair[1] + 1}", "kernel_omega": t.kernel_omega,
                       "alpha": ("-" if t.sign < 0 else "") + t.alpha_label, "beta": t.beta_label, "chi": t.chi}
                      for t in terms]}


def _optimize(config: ExperimentConfig, out: OutputWriter, jobs: int) -> dict:
    if config.optimize is None or config.engine not in ("tcl2", "redfield", "secular"):
        raise ConfigError("optimize needs a TCL engine and an 'optimize' section",
                          violations=[{"path": "optimize", "message": "missing or wrong engine"}])
    opt = config.optimize
    result = optimize_parameters(tcl_config(config), dict(opt.bounds), opt.points_per_axis, opt.refine_steps)
    keys = ("omega_1", "omega_2", "g_1", "g_2")
    cols = {k: [p[k] for p, _ in result.history] for k in keys}
    cols["first_peak_concurrence"] = [v for _, v in result.history]
    out.csv("history.csv", cols)
    return {"best": result.best, "best_first_peak_concurrence": result.best_value, "evaluations": len(result.history)}


HANDLERS = {"simulate": _simulate, "sweep": _sweep, "disorder": _disorder, "kernels": _kernels, "optimize": _optimize}


def run(command: str, config: ExperimentConfig, out_dir, jobs: int = 1, label: str = "") -> dict:
    """Run one command; returns the manifest (also written as manifest.json)."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}", violations=[{"path": "command", "message": f"one of {COMMANDS}"}])
    digest = config_hash(config)
    out = OutputWriter(Path(out_dir), digest)
    started = time.perf_counter()
    results = HANDLERS[command](config, out, jobs)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "command": command,
        "engine": config.engine,
        "preset": label,
        "seed": config.seed,
        "config_hash": digest,
        "parameters": config_to_dict(config),
        "results": results,
    }
    out.json("summary.json", summary)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "config_hash": digest,
        "wall_seconds": time.perf_counter() - started,
        "outputs": sorted(out.files + ["manifest.json"]),
        "warnings": [],
    }
    out.json("manifest.json", manifest)
    return {**manifest, "summary": summary}
