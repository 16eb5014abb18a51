# -*- coding: utf-8 -*-

from __future__ import absolute_import, annotations, unicode_literals

import dataclasses
import glob
import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from prepinn import __version__
from prepinn.config import Config, ConfigException, render_template
from prepinn.utils import PrepinnException, format_float

from .artifacts import StagingDirectory, csv_text
from .discretize import CAVITY, POISSON, DiscretizationException, ProblemSpec, checkerboard_index
from .grid import GridException, StructuredGrid, make_grid
from .net import NetException, NetworkArch, params_bytes
from .oracle import ReferenceSolution, gauge_aligned, picard_solve, poisson_exact
from .sparsela import (
    SparseLAException,
    estimate_condition,
    ilu0,
    matrix_market_text,
    preconditioned_dense,
)
from .train import AdamConfig, LbfgsConfig, TrainConfig, TrainException, TrainResult, train

log = logging.getLogger("run")

DEFAULT_EXTENTS = {
    POISSON: (-1.0, 1.0, -1.0, 1.0),
    CAVITY: (0.0, 1.0, 0.0, 1.0),
}

CONVERGENCE_HEADER = ("epoch", "loss", "rel_l2", "seconds")


@dataclass(frozen=True)
class OracleConfig:
    tol: float = 1e-8
    max_outer: int = 500
    relax: float = 0.7


@dataclass(frozen=True)
class OutputConfig:
    directory: str
    dump_fields: bool = True
    dump_matrices: bool = False
    wall_clock: bool = False
    condition_limit: int = 2500


@dataclass(frozen=True)
class RunConfig:
    name: str
    source: str
    problem: ProblemSpec
    grid: StructuredGrid
    arch: NetworkArch
    training: TrainConfig
    oracle: OracleConfig
    output: OutputConfig
    logs: Optional[str] = None

    def override(self, seed=None, out=None, epochs=None) -> "RunConfig":
        training = self.training
        if seed is not None:
            training = dataclasses.replace(training, seed=int(seed))
        if epochs is not None:
            training = dataclasses.replace(training, epochs=int(epochs))
        output = self.output if out is None else dataclasses.replace(self.output, directory=out)
        return dataclasses.replace(self, training=training, output=output)


def _problem(config: Config) -> Tuple[ProblemSpec, StructuredGrid]:
    part = config.get_part("problem")
    kind = part.value_str("kind", required=True)
    try:
        spec = ProblemSpec(
            kind,
            k=part.value_int("k", default=1, min=1),
            re=part.value_float("re", default=100.0),
            scheme_order=part.value_int("scheme_order", default=2),
            lid_velocity=part.value_float("lid_velocity", default=1.0),
        )
    except DiscretizationException as e:
        raise part.fail("kind", str(e))
    extents = tuple(float(x) for x in part.value("extents", default=list(DEFAULT_EXTENTS[kind])))
    try:
        grid = make_grid(part.value_int("nx", min=3, required=True), part.value_int("ny", min=3, required=True), extents)
    except GridException as e:
        raise part.fail("extents", str(e))
    if kind == POISSON and extents != DEFAULT_EXTENTS[POISSON]:
        raise part.fail("extents", "The Poisson problem is defined on [-1, 1] x [-1, 1].")
    return spec, grid


def _network(config: Config, spec: ProblemSpec, grid: StructuredGrid) -> NetworkArch:
    part = config.get_part("network")
    try:
        arch = NetworkArch(
            kind=part.value_str("kind", default="mlp"),
            widths=tuple(part.value("widths", default=[64, 64, 64])),
            activation=part.value_str("activation", default="tanh"),
            n_out=len(spec.components),
        )
    except NetException as e:
        raise part.fail("widths", str(e))
    try:
        arch.check_grid(grid)
    except NetException as e:
        raise config.get_part("problem").fail("nx", str(e))
    return arch


def _training(config: Config, spec: ProblemSpec) -> TrainConfig:
    part = config.get_part("training")
    adam = config.get_part("training.adam")
    lbfgs = config.get_part("training.lbfgs")
    weight = part.value("weight", default="auto")
    try:
        return TrainConfig(
            optimizer=part.value_str("optimizer", default="adam"),
            epochs=part.value_int("epochs", min=1, required=True),
            weight=weight if weight == "auto" else float(weight),
            mode=part.value_str("mode", required=True),
            preconditioner=part.value_str("preconditioner", default="ilu"),
            refactor_stride=part.value_int("refactor_stride", default=1, min=1),
            seed=part.value_int("seed", default=0, min=0),
            log_stride=part.value_int("log_stride", default=1, min=1),
            force_identity=part.value_bool("force_identity", default=False),
            stabilization=float(part.value("stabilization", default=1.0)),
            adam=AdamConfig(
                lr=adam.value_float("lr", default=1e-3),
                beta1=adam.value_float("beta1", default=0.9),
                beta2=adam.value_float("beta2", default=0.999),
                eps=adam.value_float("eps", default=1e-8),
            ),
            lbfgs=LbfgsConfig(
                history=lbfgs.value_int("history", default=10, min=1),
                max_iter=lbfgs.value_int("max_iter", default=200, min=1),
                c1=lbfgs.value_float("c1", default=1e-4),
                c2=lbfgs.value_float("c2", default=0.9),
            ),
        )
    except TrainException as e:
        raise ConfigException(str(e), "training", config.line("training"))


def from_config(config: Config) -> RunConfig:
    """
    Build a RunConfig from a validated configuration.
    """
    spec, grid = _problem(config)
    arch = _network(config, spec, grid)
    training = _training(config, spec)
    o = config.get_part("oracle")
    out = config.get_part("output")
    name = os.path.splitext(os.path.basename(config.config_file))[0]
    logs = config("logs", default=None, required=False)
    return RunConfig(
        name=name,
        source=config.config_file,
        problem=spec,
        grid=grid,
        arch=arch,
        training=training,
        oracle=OracleConfig(
            tol=o.value_float("tol", default=1e-8),
            max_outer=o.value_int("max_outer", default=500, min=1),
            relax=o.value_float("relax", default=0.7),
        ),
        output=OutputConfig(
            directory=config.get_dir_path(out.value_str("directory", default=f"out/{name}")),
            dump_fields=out.value_bool("dump_fields", default=True),
            dump_matrices=out.value_bool("dump_matrices", default=False),
            wall_clock=out.value_bool("wall_clock", default=False),
            condition_limit=out.value_int("condition_limit", default=2500, min=0),
        ),
        logs=config.get_dir_path(logs) if logs else None,
    )


def parse_config(path, env=None, scope=None) -> RunConfig:
    """
    Read, validate and convert a run configuration. Errors name the offending key and line.
    """
    config = Config(path, env, schema="config-schema.yaml", scope=scope)
    config.validate()
    return from_config(config)


@dataclass
class RunOutcome:
    name: str
    directory: str
    loss: float
    rel_l2: float
    epochs: int
    seconds: float
    kappa: Optional[Tuple[float, float]] = None


def reference_for(rc: RunConfig, exit_event=None) -> ReferenceSolution:
    if rc.problem.kind == POISSON:
        return poisson_exact(rc.grid, rc.problem.k)
    log.info(f"Computing the Picard reference for Re={rc.problem.re:g} on {rc.grid}.")
    return picard_solve(
        rc.grid,
        rc.problem.re,
        tol=rc.oracle.tol,
        max_outer=rc.oracle.max_outer,
        relax=rc.oracle.relax,
        scheme_order=rc.problem.scheme_order,
        lid_velocity=rc.problem.lid_velocity,
        strict=False,
        exit_event=exit_event,
    )


def condition_numbers(result: TrainResult, limit: int) -> Optional[Tuple[float, float]]:
    """
    kappa(J) and kappa(M^-1 J) for systems with at most `limit` unknowns. Without trained
    factors (baseline mode) M is the ILU(0) of the matrix the preconditioned mode factors.
    """
    J = result.jacobian
    if J is None or J.shape[0] > limit:
        return None
    fac = result.factors if result.factors is not None else ilu0(result.target)
    return estimate_condition(J), estimate_condition(preconditioned_dense(J, fac))


def node_rows(grid: StructuredGrid, *arrays):
    X, Y = np.meshgrid(grid.x_nodes(), grid.y_nodes())
    columns = [X.ravel(), Y.ravel()] + [a.ravel() for arr in arrays for a in arr]
    return zip(*columns)


def convergence_csv(result: TrainResult, wall_clock: bool) -> str:
    return csv_text(
        CONVERGENCE_HEADER,
        ((r.epoch, r.loss, r.rel_l2, r.seconds if wall_clock else 0) for r in result.records),
    )


def run(rc: RunConfig, exit_event=None) -> RunOutcome:
    """
    Train, evaluate against the reference and write the run artifacts atomically into
    the output directory.
    """
    reference = reference_for(rc, exit_event)
    if not reference.converged:
        log.warning("The reference solution did not converge; errors are reported against the last iterate.")
    result = train(rc.problem, rc.grid, rc.arch, rc.training, reference=reference, exit_event=exit_event)

    final = result.records[-1] if result.records else None
    try:
        kappa = condition_numbers(result, rc.output.condition_limit)
    except SparseLAException as e:
        log.warning(f"Condition numbers not computed: {e}")
        kappa = None
    checkerboard = (
        checkerboard_index(result.field.component("p")) if rc.problem.kind == CAVITY else None
    )
    names = rc.problem.components

    with StagingDirectory(rc.output.directory) as out:
        out.write("convergence.csv", convergence_csv(result, rc.output.wall_clock))
        if rc.output.dump_fields:
            out.write("fields.csv", csv_text(("x", "y") + names, node_rows(rc.grid, result.field.values)))
            error = np.abs(gauge_aligned(result.field) - gauge_aligned(reference))
            out.write(
                "errors.csv",
                csv_text(("x", "y") + tuple(f"abs_{c}" for c in names), node_rows(rc.grid, error)),
            )
        out.write("params.bin", params_bytes(result.params))
        if rc.output.dump_matrices and result.jacobian is not None:
            out.write("J.mtx", matrix_market_text(result.jacobian))
            if result.factors is not None:
                out.write("L.mtx", matrix_market_text(result.factors.lower))
                out.write("U.mtx", matrix_market_text(result.factors.upper))
        out.write(
            "summary.txt",
            render_template(
                "summary.txt.j2",
                version=__version__,
                rc=rc,
                result=result,
                final=final,
                reference=reference,
                kappa=kappa,
                checkerboard=checkerboard,
                ff=format_float,
            ),
        )

    log.info(
        f"Run {rc.name} finished: loss={result.loss:.6e}, rel_l2={result.rel_l2:.6e}, "
        f"output in {rc.output.directory}"
    )
    return RunOutcome(
        rc.name,
        rc.output.directory,
        result.loss,
        result.rel_l2,
        final.epoch + 1 if final else 0,
        result.seconds,
        kappa,
    )


def sweep(pattern, env=None, seed=None, out=None, epochs=None, exit_event=None) -> List[RunOutcome]:
    """
    Run every configuration matching `pattern`, one after another in sorted order. With
    `out`, each run writes into `<out>/<config name>`.
    """
    files = sorted(glob.glob(pattern))
    if not files:
        raise PrepinnException(f"No configuration matches {pattern}.")
    outcomes = []
    for file in files:
        if exit_event is not None and exit_event.is_set():
            break
        rc = parse_config(file, env).override(
            seed=seed, out=os.path.join(out, os.path.splitext(os.path.basename(file))[0]) if out else None, epochs=epochs
        )
        outcomes.append(run(rc, exit_event))
    return outcomes
