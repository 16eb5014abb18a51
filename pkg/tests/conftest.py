# -*- coding: utf-8 -*-

import logging

import numpy as np
import pytest

from prepinn.components.discretize import (
    LinearizationState,
    ResidualOperator,
    cavity_problem,
    poisson_problem,
)
from prepinn.components.grid import make_grid


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run long acceptance tests"
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance test (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
        h.close()


@pytest.fixture
def poisson_op():
    def _make(n=8, k=1, order=2):
        grid = make_grid(n, n, (-1.0, 1.0, -1.0, 1.0))
        return ResidualOperator(grid, poisson_problem(k, order))

    return _make


@pytest.fixture
def cavity_op():
    def _make(n=8, re=100.0, order=2, seed=0):
        grid = make_grid(n, n, (0.0, 1.0, 0.0, 1.0))
        rng = np.random.default_rng(seed)
        lin = LinearizationState(rng.uniform(-1, 1, grid.shape), rng.uniform(-1, 1, grid.shape))
        return ResidualOperator(grid, cavity_problem(re, order), lin)

    return _make
