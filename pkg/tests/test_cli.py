import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralnet import cli, runner
from chiralnet.config import (
    ExperimentConfig,
    config_hash,
    config_to_dict,
    load_preset,
    parse_config,
    preset_names,
    preset_text,
    serialize_config,
)
from chiralnet.errors import ChiralNetError, ConfigError, TraceDriftError
from chiralnet.mps import load_checkpoint


def _read_csv(path):
    lines = path.read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.DictReader(ln for ln in lines if not ln.startswith("#")))
    return comments, rows


def _write(tmp_path, data, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


# parsing

def test_minimal_markov_defaults():
    cfg = parse_config("engine: markov\nmarkov: {gamma_R: 1.0}\n")
    assert cfg.initial == "gg" and cfg.seed == 0
    assert cfg.markov.gamma_L == 0 and cfg.markov.phi == 0
    assert cfg.time_grid() == (10.0, 0.01)


def test_every_violation_is_reported():
    with pytest.raises(ConfigError) as exc:
        parse_config("engine: markov\nmarkov: {gamma_R: -1.0, gamma_L: -2.0}\nspeed: 3\n")
    paths = {v["path"] for v in exc.value.details["violations"]}
    assert {"markov.gamma_R", "markov.gamma_L", "speed"} <= paths


@pytest.mark.parametrize("text", [
    "engine: lindblad\n",
    "engine: markov\ntime: {t_max: 1.0, dt: 2.0}\n",
    "engine: mps\ninitial: bell\n",
    "engine: mps\nmps: {emitters: [3, 4]}\n",
    "engine: markov\ninitial: [[1, 0], [0, 0], [0, 0], [0.5, 0]]\n",
    "engine: markov\nseed: -1\n",
    "engine: tcl2\nsweep: {separations: [1, 3]}\n",
    "- not a mapping\n",
    "engine: [unclosed\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_preset_round_trip_and_hash():
    cfg = parse_config(preset_text("tcl2-optimum"))
    again = parse_config(serialize_config(cfg))
    assert again == cfg and config_hash(again) == config_hash(cfg)
    shuffled = yaml.safe_dump(dict(reversed(list(config_to_dict(cfg).items()))), sort_keys=False, indent=4)
    assert config_hash(parse_config(shuffled)) == config_hash(cfg)
    assert config_hash(cfg.model_copy(update={"seed": 1})) != config_hash(cfg)


@given(
    st.floats(0, 5, allow_nan=False), st.floats(0, 5, allow_nan=False),
    st.floats(-math.pi, math.pi, allow_nan=False), st.integers(0, 2**64 - 1),
)
@settings(max_examples=40, deadline=None)
def test_round_trip_is_exact(gamma_L, gamma_R, phi, seed):
    cfg = ExperimentConfig.model_validate(
        {"engine": "markov", "seed": seed, "markov": {"gamma_L": gamma_L, "gamma_R": gamma_R, "phi": phi}}
    )
    assert parse_config(serialize_config(cfg)) == cfg


def test_known_hash_is_stable():
    # canonical JSON of the minimal config, hashed independently
    import hashlib

    cfg = parse_config("engine: markov\n")
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    assert config_hash(cfg) == hashlib.sha256(canonical.encode()).hexdigest()


def test_presets_cover_every_figure_and_table():
    names = set(preset_names())
    wanted = {f"fig{k}" for k in (1, 2, 3, 4, 6, 7, 8, 9, 10, 11, 12, 13)} | {"table1", "table2", "tableF1"}
    assert wanted <= names
    for name in names:
        parse_config(preset_text(name))
    with pytest.raises(ConfigError):
        load_preset("fig5")


# command line

def test_undriven_chiral_summary(tmp_path, capsys):
    assert cli.main(["simulate", "markov", "--preset", "undriven-chiral", "--out", str(tmp_path)]) == 0
    printed = json.loads(capsys.readouterr().out)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["results"] == printed
    assert printed["peak_concurrence"] == pytest.approx(2 / math.e, abs=1e-3)
    assert printed["peak_time"] == pytest.approx(1.0, abs=0.01)
    assert summary["schema_version"] == runner.SCHEMA_VERSION and summary["engine"] == "markov"
    comments, rows = _read_csv(tmp_path / "trajectory.csv")
    assert comments[0] == f"# config_hash: {summary['config_hash']}"
    assert len(rows) == 1001 and float(rows[100]["t"]) == pytest.approx(1.0)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outputs"] == sorted(p.name for p in tmp_path.iterdir())


def test_outputs_are_bit_identical(tmp_path):
    for sub in ("a", "b"):
        cli.main(["simulate", "--preset", "undriven-chiral", "--out", str(tmp_path / sub)])
    for name in ("trajectory.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    assert cli.main(["simulate", "--preset", "undriven-chiral"]) == 0
    assert (tmp_path / "simulate-undriven-chiral" / "summary.json").is_file()


def test_overrides_apply(tmp_path):
    path = _write(tmp_path, {"engine": "markov", "initial": "eg", "time": {"t_max": 2.0, "dt": 0.01}})
    assert cli.main(["simulate", "--config", str(path), "--seed", "17", "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["seed"] == 17 and summary["preset"] == "run"


def test_bad_config_exits_2(tmp_path, capsys):
    path = _write(tmp_path, {"engine": "markov", "markov": {"gamma_R": -1}})
    assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and err["violations"][0]["path"] == "markov.gamma_R"
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.yaml")]) == cli.EXIT_CONFIG
    assert cli.main(["sweep", "--preset", "undriven-chiral", "--out", str(tmp_path / "s")]) == cli.EXIT_CONFIG
    assert cli.main([]) == cli.EXIT_CONFIG


def test_engine_error_exits_3(tmp_path, monkeypatch, capsys):
    def drift(config):
        raise TraceDriftError("trace drift beyond limit", drift=0.2)

    monkeypatch.setattr(runner, "simulate", drift)
    assert cli.main(["simulate", "--preset", "undriven-chiral", "--out", str(tmp_path)]) == cli.EXIT_ENGINE
    err = json.loads(capsys.readouterr().err)
    assert err == {"error": "TraceDriftError", "message": "trace drift beyond limit", "drift": 0.2}
    assert issubclass(TraceDriftError, ChiralNetError)


def test_console_script(tmp_path):
    out = subprocess.run([sys.executable, "-m", "chiralnet.cli", "--list-presets"], capture_output=True, text=True, check=True)
    assert "tableF1" in out.stdout.split()


def test_kernels_command(tmp_path):
    assert cli.main(["kernels", "--preset", "table2", "--out", str(tmp_path)]) == 0
    results = json.loads((tmp_path / "summary.json").read_text())["results"]
    assert results["n_terms"] == 16
    assert results["frequencies"] == pytest.approx([-0.126, 0.0, 0.126])
    _, rows = _read_csv(tmp_path / "redfield.csv")
    assert len(rows) == 12
    _, kernels = _read_csv(tmp_path / "kernels.csv")
    assert len(kernels) == 12 * 3001


def test_small_drive_sweep(tmp_path):
    path = _write(tmp_path, {
        "engine": "markov", "time": {"t_max": 10.0, "dt": 0.01},
        "sweep": {"omega_1": {"values": [0.0, 2.05]}, "omega_2": {"values": [0.0, 0.74]}},
    })
    assert cli.main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    results = json.loads((tmp_path / "o" / "summary.json").read_text())["results"]
    assert results["argmax_concurrence"] == [2.05, 0.74]
    assert results["max_concurrence"] == pytest.approx(0.77, abs=0.01)
    assert results["corner_concurrence"] == 0
    _, rows = _read_csv(tmp_path / "o" / "surface.csv")
    assert len(rows) == 4


def test_separation_sweep_reports_positivity(tmp_path):
    path = _write(tmp_path, {
        "engine": "tcl2", "time": {"t_max": 60.0, "dt": 0.05},
        "sweep": {"omega_1": {"values": [0.063]}, "separations": [1, 3]},
    })
    assert cli.main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    _, rows = _read_csv(tmp_path / "o" / "surface.csv")
    assert [int(r["separation"]) for r in rows] == [1, 3]
    assert all(float(r["min_eigenvalue"]) < 1e-3 for r in rows)


def test_small_disorder_run(tmp_path):
    path = _write(tmp_path, {
        "engine": "tcl2", "time": {"t_max": 60.0, "dt": 0.05}, "drive": {"omega_1": 0.063}, "seed": 3,
        "disorder": [{"target": "position", "sigma": 0.0, "realizations": 2}],
        "beta_scan": {"a_values": [1.0, 0.9], "patterns": ["both"]},
    })
    assert cli.main(["disorder", "--config", str(path), "--jobs", "2", "--out", str(tmp_path / "o")]) == 0
    results = json.loads((tmp_path / "o" / "summary.json").read_text())["results"]
    ens = results["ensembles"][0]
    assert ens["suppression"] == pytest.approx(0, abs=1e-12) and ens["realizations_used"] == 2
    c_max = results["beta_scan"]["patterns"]["both"]["c_max"]
    assert c_max[0] == pytest.approx(results["nominal_first_peak"]) and c_max[1] < c_max[0]
    comments, rows = _read_csv(tmp_path / "o" / "ensemble_00.csv")
    assert list(rows[0]) == ["t", "mean_C", "std_C", "C_of_mean_state"]


def test_small_optimize(tmp_path):
    path = _write(tmp_path, {
        "engine": "tcl2", "time": {"t_max": 60.0, "dt": 0.05},
        "optimize": {"bounds": {"omega_1": [0.05, 0.07], "g_1": [0.14, 0.14], "g_2": [0.3, 0.3], "omega_2": [0, 0]},
                     "points_per_axis": 2, "refine_steps": 1},
    })
    assert cli.main(["optimize", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    results = json.loads((tmp_path / "o" / "summary.json").read_text())["results"]
    _, rows = _read_csv(tmp_path / "o" / "history.csv")
    assert len(rows) == results["evaluations"]
    assert results["best_first_peak_concurrence"] == max(float(r["first_peak_concurrence"]) for r in rows)


def test_small_mps_with_checkpoint(tmp_path):
    path = _write(tmp_path, {
        "engine": "mps", "initial": "eg", "time": {"t_max": 1.0, "dt": 0.1},
        "mps": {"n_sites": 6, "emitters": [1, 4], "checkpoint": True},
    })
    assert cli.main(["simulate", "--config", str(path), "--dmax", "8", "--out", str(tmp_path / "o")]) == 0
    out = tmp_path / "o"
    state, d_max = load_checkpoint(out / "final_state.mps")
    assert d_max == 8 and state.n_sites == 6
    _, rows = _read_csv(out / "bond_currents.csv")
    assert len(rows) == 11 * 5
    assert json.loads((out / "summary.json").read_text())["parameters"]["mps"]["d_max"] == 8


@pytest.mark.slow
def test_table_f1_row(tmp_path):
    assert cli.main(["simulate", "mps", "--preset", "tableF1", "--dmax", "18", "--out", str(tmp_path)]) == 0
    results = json.loads((tmp_path / "summary.json").read_text())["results"]
    assert results["peak_concurrence"] == pytest.approx(0.6876, abs=5e-3)
    assert results["peak_time"] == pytest.approx(35.6, abs=0.5)
    assert np.isfinite(results["max_trace_drift"])
