# -*- coding: utf-8 -*-

import os

import pytest
from click.testing import CliRunner

import prepinn.config as prepinn_config
from prepinn.commands.prepinn import prepinn

POISSON = """\
version: "1.0"
logs: logs

problem:
  kind: poisson
  k: 1
  nx: 6
  ny: 6

network:
  widths: [4]

training:
  mode: {mode}
  epochs: 3
  seed: 1

output:
  directory: {directory}
"""

CAVITY = """\
version: "1.0"
logs: logs

problem:
  kind: cavity
  re: 100
  nx: 8
  ny: 8

network:
  widths: [6]
  activation: gelu

training:
  mode: preconditioned
  epochs: 2
  weight: 1.0

oracle:
  tol: 1.0e-6
  max_outer: 50

output:
  directory: out
"""


@pytest.fixture(autouse=True)
def fresh_state():
    ansi, debug = prepinn_config.ANSI_COLORS, prepinn_config.DEBUG
    prepinn_config.exit_event.clear()
    yield
    prepinn_config.ANSI_COLORS, prepinn_config.DEBUG = ansi, debug
    prepinn_config.exit_event.clear()


def invoke(*args):
    return CliRunner().invoke(prepinn, ["--no-ansi", *args])


def poisson_config(path, mode="preconditioned", directory="out"):
    path.write_text(POISSON.format(mode=mode, directory=directory))
    return str(path)


def test_check_passes():
    result = invoke("check")
    assert result.exit_code == 0, result.output
    assert "FAIL" not in result.output
    for name in ("ilu-pattern-exact", "adjoint-identity", "gmres-oracle", "network-gradient"):
        assert name in result.output


def test_check_detects_corrupted_factors():
    result = invoke("check", "--corrupt-ilu")
    assert result.exit_code == 1
    assert "FAIL" in result.output and "ilu-pattern-exact" in result.output


def test_run_writes_artifacts(tmp_path):
    result = invoke("run", poisson_config(tmp_path / "tiny.yaml"))
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir()) == [
        "convergence.csv",
        "errors.csv",
        "fields.csv",
        "params.bin",
        "summary.txt",
    ]
    rows = (out / "convergence.csv").read_text().splitlines()
    assert rows[0] == "epoch,loss,rel_l2,seconds"
    assert [r.split(",")[0] for r in rows[1:]] == ["0", "1", "2"]
    assert all(r.endswith(",0") for r in rows[1:])
    fields = (out / "fields.csv").read_text().splitlines()
    assert fields[0] == "x,y,u" and len(fields) == 37
    assert (out / "errors.csv").read_text().startswith("x,y,abs_u\n")
    assert (out / "params.bin").read_bytes().startswith(b"prepinn-params 1 kind=mlp widths=4")
    summary = (out / "summary.txt").read_text()
    assert "final loss:" in summary and "kappa(M^-1 J):" in summary
    assert (tmp_path / "logs" / "prepinn_run.log").exists()


def test_rerun_is_byte_identical(tmp_path):
    config = poisson_config(tmp_path / "tiny.yaml")
    assert invoke("run", config).exit_code == 0
    first = (tmp_path / "out" / "convergence.csv").read_bytes()
    assert invoke("run", config).exit_code == 0
    assert (tmp_path / "out" / "convergence.csv").read_bytes() == first


def test_overrides(tmp_path):
    config = poisson_config(tmp_path / "tiny.yaml")
    result = invoke("run", config, "--epochs", "1", "--out", str(tmp_path / "other"))
    assert result.exit_code == 0, result.output
    rows = (tmp_path / "other" / "convergence.csv").read_text().splitlines()
    assert len(rows) == 2


def test_unwritable_output_fails_cleanly(tmp_path):
    (tmp_path / "blocked").write_text("not a directory")
    result = invoke("run", poisson_config(tmp_path / "tiny.yaml", directory="blocked/run"))
    assert result.exit_code == 1
    assert "ERROR" in result.output
    assert (tmp_path / "blocked").read_text() == "not a directory"


def test_invalid_config_fails(tmp_path):
    result = invoke("run", poisson_config(tmp_path / "bad.yaml", mode="fast"))
    assert result.exit_code == 1
    assert "training.mode" in result.output


def test_config_validate(tmp_path):
    good = poisson_config(tmp_path / "good.yaml")
    result = invoke("config", "validate", good)
    assert result.exit_code == 0, result.output
    assert "is valid" in result.output
    bad = tmp_path / "bad.yaml"
    bad.write_text(POISSON.format(mode="baseline", directory="out") + "foo: 1\n")
    result = invoke("config", "validate", str(bad))
    assert result.exit_code == 1
    assert "Unknown key 'foo'" in result.output


def test_sweep(tmp_path):
    runs = tmp_path / "runs"
    runs.mkdir()
    poisson_config(runs / "a_baseline.yaml", mode="baseline")
    poisson_config(runs / "b_precond.yaml")
    result = invoke("sweep", os.path.join(str(runs), "*.yaml"), "--out", str(tmp_path / "sweep"))
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    header = next(x for x in lines if x.startswith("RUN"))
    assert "REL_L2" in header
    assert any(x.startswith("a_baseline") for x in lines)
    assert any(x.startswith("b_precond") for x in lines)
    for name in ("a_baseline", "b_precond"):
        assert (tmp_path / "sweep" / name / "convergence.csv").exists()


def test_cavity_run_reports_checkerboard(tmp_path):
    config = tmp_path / "cavity.yaml"
    config.write_text(CAVITY)
    result = invoke("run", str(config))
    assert result.exit_code == 0, result.output
    summary = (tmp_path / "out" / "summary.txt").read_text()
    assert "checkerboard index:" in summary and "Re=100" in summary
    assert (tmp_path / "out" / "fields.csv").read_text().startswith("x,y,u,v,p\n")
