"""Experiment harness and command line: exit codes, output formats, determinism, warnings."""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from stelab.cli import main
from stelab.experiments import (
    ExperimentSpec,
    child_seed,
    excess_variation,
    run_experiment,
    total_variation,
)


@pytest.fixture
def run_cli(capsys, caplog):
    """Run the command line; returns (exit code, stdout, log text)."""

    def go(args):
        caplog.clear()
        code = main(args)
        return code, capsys.readouterr().out, caplog.text

    return go


def test_total_and_excess_variation():
    assert total_variation([3.0, 1.0, 2.0]) == 3.0
    assert total_variation([]) == 0.0
    # monotone down then up around the argmin: nothing in excess
    assert excess_variation([3.0, 2.0, 1.0, 4.0]) == 0.0
    # a bump of height 1 before the minimum counts twice
    assert excess_variation([3.0, 4.0, 1.0]) == 2.0


def test_child_seed_wraps_to_64_bits():
    assert child_seed(2**64 - 1, 1) == 0
    assert child_seed(5, 3) == 8


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(command="nope")
    with pytest.raises(ValueError):
        ExperimentSpec(command="verify", m=0)
    with pytest.raises(ValueError):
        ExperimentSpec(command="sweep", count=-1)


def test_landscape_saddle_example_passes(run_cli):
    code, out, _ = run_cli(["landscape", "--m", "2", "--v-star", "1,-1"])
    assert code == 0
    doc = json.loads(out)
    assert doc["command"] == "landscape"
    assert doc["spec"]["v_star"] == [1.0, -1.0]


def test_landscape_no_saddle_example_warns(run_cli):
    code, out, err = run_cli(["landscape", "--m", "2", "--v-star", "1,1"])
    assert code == 0
    assert "saddle" in err.lower()


def test_verify_low_power_warning(run_cli):
    code, out, err = run_cli(["verify", "--samples", "10"])
    assert "low power" in err
    doc = json.loads(out)
    assert doc["summary"]["low_power"] is True
    assert code in (0, 1)


def test_verify_default_sample_size_agrees():
    res = run_experiment(ExperimentSpec(command="verify", samples=200_000, seed=3))
    assert res.passed, [r for r in res.records if not r["pass"]]
    assert not res.warnings


def test_instability_warnings(run_cli):
    _, _, err = run_cli(["instability", "--m", "1", "--v-star", "1", "--iters", "5", "--out", "/dev/null"])
    assert "m = 1" in err
    _, _, err = run_cli(["instability", "--v-star", "1,-1", "--iters", "5", "--out", "/dev/null"])
    assert "1'v* = 0" in err


def test_instability_rise_when_minimum_exists():
    # (1'v*)^2 = 0.25 < 3/2 * 1.25, so the angle-pi point is a genuine local minimum
    res = run_experiment(ExperimentSpec(command="instability", v_star=(1.0, -0.5), eta=0.01, iters=10_000))
    runs = res.summary["runs"]
    assert runs["identity"]["first_iter_above_start"] is not None
    assert runs["relu"]["max_residual"] <= 1e-8
    assert runs["crelu"]["max_residual"] <= 1e-8
    assert res.passed


def test_instability_rounding_is_not_a_rise():
    res = run_experiment(ExperimentSpec(command="instability", v_star=(1.0, -0.5)))
    ident = res.summary["runs"]["identity"]
    assert ident["first_iter_above_start"] is None
    assert not res.passed


def test_invalid_input_exit_2(run_cli):
    code, _, err = run_cli(["landscape", "--m", "3", "--v-star", "1,1"])
    assert code == 2
    code, _, _ = run_cli(["descend", "--eta", "-1"])
    assert code == 2
    code, _, _ = run_cli(["verify", "--n", "3", "--w-star", "1,0"])
    assert code == 2


def test_unwritable_output_exit_2(tmp_path, run_cli):
    code, _, err = run_cli(["landscape", "--out", str(tmp_path / "missing" / "x.json")])
    assert code == 2
    assert "cannot write" in err


def test_descend_csv_roundtrip(tmp_path, run_cli):
    path = tmp_path / "d.csv"
    code, _, _ = run_cli(["descend", "--ste", "relu", "--seed", "7", "--out", str(path)])
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.DictReader(io.StringIO(raw.decode())))
    assert rows and "loss" in rows[0]
    # 17 significant digits reproduce the binary64 values exactly
    res = run_experiment(ExperimentSpec(command="descend", ste="relu", seed=7, format="csv"))
    for row, rec in zip(rows, res.records):
        assert float(row["loss"]) == rec["loss"]
    assert code == (0 if res.passed else 1)


def test_outputs_are_byte_identical(tmp_path, capsys):
    for cmd in (["figure1"], ["descend", "--ste", "crelu"], ["sweep", "--count", "3"], ["verify", "--samples", "5000"]):
        path = tmp_path / "out"
        main([*cmd, "--seed", "11", "--out", str(path)])
        first = path.read_bytes()
        main([*cmd, "--seed", "11", "--out", str(path)])
        capsys.readouterr()
        assert path.read_bytes() == first, cmd


def test_sweep_jobs_do_not_change_results():
    one = run_experiment(ExperimentSpec(command="sweep", count=4, seed=5, jobs=1))
    four = run_experiment(ExperimentSpec(command="sweep", count=4, seed=5, jobs=4))
    assert one.records == four.records
    assert one.summary == four.summary


def test_sweep_zero_runs(run_cli):
    code, out, _ = run_cli(["sweep", "--count", "0"])
    assert code == 0
    doc = json.loads(out)
    assert doc["checks"] == []
    assert doc["summary"]["relu"]["runs"] == 0 and doc["summary"]["relu"]["iterations_median"] is None


def test_figure1_curves_shape():
    res = run_experiment(ExperimentSpec(command="figure1", m=2, n=4, sizes=(10, 50)))
    curves = res.extra["curves"]
    assert [c.sample_size for c in curves] == [10, 50]
    for c in curves:
        assert c.etas[0] == 0.0 and np.all(np.diff(c.etas) > 0)
        assert np.all(np.isfinite(c.losses))
    names = [c["name"] for c in res.summary["checks"]]
    assert "smoother[N=50 vs N=10]" in names


def test_descend_fixed_eta_converges(run_cli):
    code, out, _ = run_cli(["descend", "--ste", "relu", "--v-star", "1,-1", "--w-star", "1,0,0",
                            "--eta", "0.1", "--seed", "1"])
    rows = list(csv.DictReader(io.StringIO(out)))
    losses = np.array([float(r["loss"]) for r in rows])
    assert np.all(np.diff(losses) <= 1e-12) or code == 1
    assert math.isfinite(losses[-1])
