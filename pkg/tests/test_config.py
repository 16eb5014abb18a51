# -*- coding: utf-8 -*-

import glob
import os

import pytest

from prepinn.components.experiment import parse_config
from prepinn.config import ConfigException

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "config")

TINY = """\
version: "1.0"
logs: logs

problem:
  kind: poisson
  k: 1
  nx: {nx}
  ny: 6
{problem_extra}
network:
  kind: mlp
  widths: [4]

training:
  mode: preconditioned
  epochs: 3
  weight: {weight}
{training_extra}
output:
  directory: {directory}
"""


def write_config(path, nx=6, weight="auto", directory="out", problem_extra="", training_extra="", extra=""):
    path.write_text(
        TINY.format(
            nx=nx,
            weight=weight,
            directory=directory,
            problem_extra=problem_extra,
            training_extra=training_extra,
        )
        + extra
    )
    return str(path)


@pytest.mark.parametrize("name", [os.path.basename(f) for f in sorted(glob.glob(os.path.join(CONFIG_DIR, "*.yaml")))])
def test_bundled_configs_parse(name):
    rc = parse_config(os.path.join(CONFIG_DIR, name))
    assert rc.name == os.path.splitext(name)[0]
    assert rc.arch.n_out == len(rc.problem.components)


def test_desk_poisson_config(monkeypatch):
    monkeypatch.setenv("PREPINN_MODE", "baseline")
    rc = parse_config(os.path.join(CONFIG_DIR, "poisson_k5_desk.yaml"))
    assert rc.problem.kind == "poisson" and rc.problem.k == 5
    assert (rc.grid.nx, rc.grid.ny) == (100, 20)
    assert rc.training.mode == "baseline"
    assert rc.output.directory.endswith("poisson_k5_desk_baseline")


def test_tiny_config(tmp_path):
    rc = parse_config(write_config(tmp_path / "tiny.yaml"))
    assert rc.name == "tiny"
    assert rc.training.weight == "auto" and rc.training.epochs == 3
    assert rc.output.directory == os.path.join(os.path.realpath(tmp_path), "out")
    assert rc.logs == os.path.join(os.path.realpath(tmp_path), "logs")
    assert rc.grid.extents == (-1.0, 1.0, -1.0, 1.0)


def test_nx_too_small(tmp_path):
    with pytest.raises(ConfigException) as e:
        parse_config(write_config(tmp_path / "c.yaml", nx=2))
    assert "problem.nx" in str(e.value)
    assert e.value.line == 7


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigException) as e:
        parse_config(write_config(tmp_path / "c.yaml", extra="foo: 1\n"))
    assert "foo" in str(e.value) and e.value.line is not None


def test_unknown_nested_key(tmp_path):
    with pytest.raises(ConfigException) as e:
        parse_config(write_config(tmp_path / "c.yaml", training_extra="  momentum: 0.9\n"))
    assert e.value.path == "training.momentum"


@pytest.mark.parametrize("weight", ["-1", "0", "heavy"])
def test_bad_weight(tmp_path, weight):
    with pytest.raises(ConfigException) as e:
        parse_config(write_config(tmp_path / "c.yaml", weight=weight))
    assert "training.weight" in str(e.value)


def test_numeric_weight(tmp_path):
    rc = parse_config(write_config(tmp_path / "c.yaml", weight="1.0e+7"))
    assert rc.training.weight == 1.0e7


def test_stabilization(tmp_path):
    assert parse_config(write_config(tmp_path / "a.yaml")).training.stabilization == 1.0
    rc = parse_config(write_config(tmp_path / "b.yaml", training_extra="  stabilization: 0.5\n"))
    assert rc.training.stabilization == 0.5
    with pytest.raises(ConfigException) as e:
        parse_config(write_config(tmp_path / "c.yaml", training_extra="  stabilization: -1\n"))
    assert "training.stabilization" in str(e.value)


def test_poisson_extents_are_fixed(tmp_path):
    with pytest.raises(ConfigException) as e:
        parse_config(write_config(tmp_path / "c.yaml", problem_extra="  extents: [0, 1, 0, 1]\n"))
    assert e.value.path == "problem.extents"


def test_conv_needs_a_divisible_grid(tmp_path):
    path = tmp_path / "c.yaml"
    write_config(path)
    path.write_text(path.read_text().replace("kind: mlp\n  widths: [4]", "kind: conv\n  widths: [4, 8, 8]"))
    with pytest.raises(ConfigException, match="divisible") as e:
        parse_config(str(path))
    assert e.value.path == "problem.nx"


def test_training_cross_checks(tmp_path):
    with pytest.raises(ConfigException) as e:
        parse_config(write_config(tmp_path / "c.yaml", training_extra="  lbfgs:\n    c1: 0.95\n"))
    assert e.value.path == "training"


def test_env_file_substitution(tmp_path):
    env = tmp_path / "run.env"
    env.write_text("# outputs\nRUN_OUT=results/custom\n")
    rc = parse_config(write_config(tmp_path / "c.yaml", directory="${RUN_OUT}"), env=str(env))
    assert rc.output.directory == os.path.join(os.path.realpath(tmp_path), "results", "custom")


def test_missing_env_variable(tmp_path):
    with pytest.raises(ConfigException, match="NOT_DEFINED_ANYWHERE"):
        parse_config(write_config(tmp_path / "c.yaml", directory="${NOT_DEFINED_ANYWHERE}"))


def test_override(tmp_path):
    rc = parse_config(write_config(tmp_path / "c.yaml")).override(seed=5, out="elsewhere", epochs=2)
    assert rc.training.seed == 5 and rc.training.epochs == 2
    assert rc.output.directory == "elsewhere"
