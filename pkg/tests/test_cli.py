from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from oqt import cli, io
from oqt.gateset import GateSet
from oqt.priors import exact_spec
from oqt.protocols import lsgst

ROOT = Path(__file__).resolve().parents[1]


def write_config(path: Path, **doc) -> Path:
    path.write_text(json.dumps({"version": 1, **doc}))
    return path


def run_cli(*args) -> int:
    return cli.main([str(a) for a in args])


def small_ramsey(tmp_path, out="run"):
    return write_config(tmp_path / "ramsey.json", seed=5, protocol="ramsey", particles=200,
                        output_dir=str(tmp_path / out),
                        design={"n_train": [2, 12], "n_test": [13, 16], "shots": 100})


def read_all(directory: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.name != "config.json"}


def test_infer_is_deterministic(tmp_path, capsys):
    cfg = small_ramsey(tmp_path)
    assert run_cli("infer", "--config", cfg, "--out", tmp_path / "a") == 0
    assert run_cli("infer", "--config", cfg, "--out", tmp_path / "b") == 0
    a, b = read_all(tmp_path / "a"), read_all(tmp_path / "b")
    assert a == b
    assert {"posterior.json", "predictions.csv", "losses.csv", "ramsey_fit.csv", "updates.csv"} <= set(a)
    result = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert 0 < result["omega"] < np.pi


def test_seed_override_changes_output(tmp_path):
    cfg = small_ramsey(tmp_path)
    run_cli("infer", "--config", cfg, "--out", tmp_path / "a")
    run_cli("infer", "--config", cfg, "--out", tmp_path / "b", "--seed", 6)
    assert read_all(tmp_path / "a")["posterior.json"] != read_all(tmp_path / "b")["posterior.json"]


def test_emitted_tables_parse_and_hold_probabilities(tmp_path):
    cfg = small_ramsey(tmp_path)
    run_cli("infer", "--config", cfg)
    out = tmp_path / "run"
    for csv in out.glob("*.csv"):
        header, rows = io.read_csv(csv)
        assert rows and all(len(r) == len(header) for r in rows)
    header, rows = io.read_csv(out / "predictions.csv")
    for col in ("bme", "true_probability"):
        values = [float(r[header.index(col)]) for r in rows]
        assert all(0.0 <= v <= 1.0 for v in values)


def test_report_subcommand(tmp_path):
    cfg = small_ramsey(tmp_path)
    run_cli("infer", "--config", cfg)
    assert run_cli("report", "--out", tmp_path / "run") == 0
    header, rows = io.read_csv(tmp_path / "run" / "posterior_mean.csv")
    assert header == ["parameter", "value"] and len(rows) == 27
    assert rows[0][0] == "E[0]"
    rep = io.rep_from_dict(io.load_json(tmp_path / "run" / "posterior_rep.json"))
    assert rep.minimal.shape == (27,)


def test_simulate_with_perfect_gates_gives_definite_counts(tmp_path):
    cfg = write_config(tmp_path / "sim.json", seed=2, mode="simulate", protocol="lsgst",
                       output_dir=str(tmp_path / "sim"), truth={"kind": "ideal"},
                       design={"m_values": [1, 3], "shots": 50})
    assert run_cli("simulate", "--config", cfg) == 0
    ds = io.read_dataset(tmp_path / "sim" / "training.txt")
    gs = lsgst.ideal_gateset()
    definite = 0
    for d in ds:
        p = gs.probability(d.sequence)
        if abs(p) < 1e-9 or abs(p - 1) < 1e-9:
            definite += 1
            assert d.successes == (d.trials if p > 0.5 else 0)
    assert definite > 10
    header, rows = io.read_csv(tmp_path / "sim" / "probabilities.csv")
    probs = [float(r[2]) for r in rows]
    assert all(0.0 <= p <= 1.0 for p in probs)


def test_inference_failure_exit_code(tmp_path, capsys):
    ideal = lsgst.ideal_gateset()
    bad = np.eye(4)
    bad[1:, 1:] = 0.9
    spec = exact_spec(GateSet(ideal.rho, ideal.effect, {**ideal.gates, "Gi": bad}), lsgst.FIDUCIALS)
    data = tmp_path / "impossible.txt"
    # every particle predicts Pr(Gi Gi) > 1, clipped to 1, so a failure rules them all out
    data.write_text("Gi 10 9\nGi,Gi 10 0\n")
    cfg = write_config(tmp_path / "fail.json", seed=1, protocol="lsgst", particles=4,
                       output_dir=str(tmp_path / "fail"), prior=spec.to_dict(),
                       design={"m_values": [1, 1]}, dataset=str(data))
    assert run_cli("infer", "--config", cfg) == cli.EXIT_INFERENCE
    assert "inference failed" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.json", seed=1, protocol="ramsey", particles=1)
    assert run_cli("infer", "--config", cfg) == cli.EXIT_USAGE
    assert "particles" in capsys.readouterr().err
    assert run_cli("infer", "--config", tmp_path / "missing.json") == cli.EXIT_USAGE


def test_seed_only_invocation(tmp_path):
    assert run_cli("dynamics", "--seed", 3, "--out", tmp_path / "dyn") == 0
    summary = io.load_json(tmp_path / "dyn" / "summary.json")
    assert summary["max_deviation"] < 1e-6
    assert (tmp_path / "dyn" / "trajectory.csv").exists()


def test_rb_mode_writes_interval(tmp_path):
    cfg = write_config(tmp_path / "rb.json", seed=4, mode="rb", particles=50, output_dir=str(tmp_path / "rb"),
                       design={"count": 20, "shots": 200}, rb={"test_lengths": 10, "per_length": 3})
    assert run_cli("rb", "--config", cfg) == 0
    header, rows = io.read_csv(tmp_path / "rb" / "decay_fit.csv")
    assert header == ["parameter", "estimate", "lower", "upper", "true"]
    by_name = {r[0]: [float(x) for x in r[1:]] for r in rows}
    assert by_name["fidelity"][1] <= by_name["fidelity"][2]


def test_statetomo_mode(tmp_path):
    cfg = write_config(tmp_path / "st.json", seed=4, mode="statetomo", particles=100,
                       output_dir=str(tmp_path / "st"), statetomo={"states": 3},
                       design={"n_train": 10, "n_test": 5})
    assert run_cli("statetomo", "--config", cfg) == 0
    header, rows = io.read_csv(tmp_path / "st" / "pseudo_bloch.csv")
    assert len(rows) == 3


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "oqt.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
