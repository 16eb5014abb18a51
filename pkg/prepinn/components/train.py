# -*- coding: utf-8 -*-

from __future__ import absolute_import, annotations, unicode_literals

import dataclasses
import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import line_search

from prepinn.utils import PrepinnException, perf_counter

from .discretize import (
    CAVITY,
    LinearizationState,
    ProblemSpec,
    ResidualOperator,
    checkerboard_index,
    field_to_unknowns,
    residual_pattern,
    stabilized_jacobian,
    unknowns_to_values,
)
from .grid import Field, StructuredGrid, coordinate_channels
from .net import NetException, NetworkArch, ParameterSet, backward, configure_torch, forward, init_params
from .oracle import ReferenceSolution, relative_l2
from .sparsela import (
    IluFactors,
    apply_minv,
    apply_minv_transpose,
    assemble_jacobian,
    color_columns,
    dense_minv,
    ilu0,
)

log = logging.getLogger("train")

BASELINE = "baseline"
PRECONDITIONED = "preconditioned"
MODES = (BASELINE, PRECONDITIONED)

ADAM = "adam"
LBFGS = "lbfgs"

ILU = "ilu"
DENSE = "dense"

# L-BFGS stops when the gradient norm falls below this fraction of its value at the
# start of the epoch
LBFGS_GTOL = 1e-10

# curvature pairs with s.y at or below this are not stored
LBFGS_CURVATURE_EPS = 1e-10


class TrainException(PrepinnException):
    def __init__(self, message, epoch=None, index=None):
        self.epoch = epoch
        self.index = index
        super().__init__(message)


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise TrainException("Adam betas must lie in (0, 1).")
        if self.lr <= 0 or self.eps <= 0:
            raise TrainException("Adam lr and eps must be positive.")


@dataclass(frozen=True)
class LbfgsConfig:
    history: int = 10
    max_iter: int = 200
    c1: float = 1e-4
    c2: float = 0.9

    def __post_init__(self):
        if self.history < 1 or self.max_iter < 1:
            raise TrainException("L-BFGS history and max_iter must be at least 1.")
        if not (0 < self.c1 < self.c2 < 1):
            raise TrainException("L-BFGS Wolfe constants must satisfy 0 < c1 < c2 < 1.")


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = ADAM
    epochs: int = 1000
    weight: Union[float, str] = "auto"
    mode: str = PRECONDITIONED
    preconditioner: str = ILU
    refactor_stride: int = 1
    seed: int = 0
    log_stride: int = 1
    force_identity: bool = False
    stabilization: float = 1.0
    adam: AdamConfig = field(default_factory=AdamConfig)
    lbfgs: LbfgsConfig = field(default_factory=LbfgsConfig)

    def __post_init__(self):
        if self.optimizer not in (ADAM, LBFGS):
            raise TrainException(f"Unknown optimizer '{self.optimizer}'.")
        if self.mode not in MODES:
            raise TrainException(f"Unknown training mode '{self.mode}'.")
        if self.preconditioner not in (ILU, DENSE):
            raise TrainException(f"Unknown preconditioner '{self.preconditioner}'.")
        if self.epochs < 1:
            raise TrainException("The number of epochs must be at least 1.")
        if self.refactor_stride < 1 or self.log_stride < 1:
            raise TrainException("refactor_stride and log_stride must be at least 1.")
        if self.stabilization < 0:
            raise TrainException(f"The pressure stabilization must be non-negative, found {self.stabilization}.")
        if self.weight != "auto" and not (isinstance(self.weight, (int, float)) and self.weight > 0):
            raise TrainException(f"The loss weight must be positive or 'auto', found {self.weight}.")


@dataclass(frozen=True, eq=False)
class AdjointWorkspace:
    """
    Detached quantities of one preconditioned loss evaluation: the residual, the
    preconditioned residual p = M^-1 f and the adjoint gradient g = 2 M^-T p.
    """

    f_detached: np.ndarray
    p_detached: np.ndarray
    g_detached: np.ndarray

    @property
    def multiplier(self) -> np.ndarray:
        return -2.0 * self.p_detached


@dataclass(frozen=True)
class ConvergenceRecord:
    epoch: int
    loss: float
    rel_l2: float
    seconds: float


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def _finite_residual(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(f))
    if bad.size > 0:
        raise TrainException(f"Non-finite residual entry at index {bad[0]}.", index=int(bad[0]))
    return f


def baseline_loss(f, w: float) -> Tuple[float, np.ndarray]:
    """
    loss = (w/N_r) f.f and its gradient (2w/N_r) f with respect to the residual.
    """
    f = _finite_residual(f)
    scale = w / f.size
    return scale * float(f @ f), (2.0 * scale) * f


def precond_loss(f_live, fac: IluFactors, w: float, f_detached=None):
    """
    Preconditioned loss (w/N_r) [p.p + g.(f_live - f_de)] with p = M^-1 f_de and
    g = 2 M^-T p. The correction term vanishes at the evaluation point; its gradient
    (w/N_r) g is the residual-side seed. Returns (loss, seed, workspace).
    """
    f_live = _finite_residual(f_live)
    if f_live.size != fac.n:
        raise TrainException(
            f"The residual has {f_live.size} entries but the factors are of size {fac.n}."
        )
    f_de = f_live.copy() if f_detached is None else np.asarray(f_detached, dtype=np.float64)
    p = apply_minv(fac, f_de)
    g = 2.0 * apply_minv_transpose(fac, p)
    scale = w / f_live.size
    loss = scale * (float(p @ p) + float(g @ (f_live - f_de)))
    return loss, scale * g, AdjointWorkspace(f_de, p, g)


def dense_precond_loss(f, minv: np.ndarray, w: float) -> Tuple[float, np.ndarray]:
    """
    (w/N_r) ||M^-1 f||^2 with an explicit inverse and its gradient (2w/N_r) M^-T M^-1 f.
    """
    f = _finite_residual(f)
    p = minv @ f
    scale = w / f.size
    return scale * float(p @ p), (2.0 * scale) * (minv.T @ p)


def adam_step(params, grads, state: Optional[AdamState], cfg: AdamConfig):
    """
    One bias-corrected Adam update; returns the new parameters and state.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise TrainException(f"Parameter shape {params.shape} and gradient shape {grads.shape} differ.")
    if state is None:
        state = AdamState.zeros(params.size)
    t = state.t + 1
    m = cfg.beta1 * state.m + (1 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1 - cfg.beta2) * grads * grads
    m_hat = m / (1 - cfg.beta1**t)
    v_hat = v / (1 - cfg.beta2**t)
    return params - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps), AdamState(m, v, t)


@dataclass
class LbfgsResult:
    x: np.ndarray
    iterations: int
    loss: float
    grad_norm: float
    reason: str


class _Memo:
    """
    Remembers the last evaluations of `fn(x) -> (value, gradient)` so that the line search
    can query value and gradient separately.
    """

    def __init__(self, fn, size=4):
        self.fn = fn
        self.cache = deque(maxlen=size)

    def __call__(self, x):
        key = np.asarray(x, dtype=np.float64).tobytes()
        for k, v in self.cache:
            if k == key:
                return v
        f, g = self.fn(np.array(x, dtype=np.float64))
        v = (float(f), np.asarray(g, dtype=np.float64))
        self.cache.append((key, v))
        return v


def lbfgs_epoch(x0, loss_fn: Callable, cfg: LbfgsConfig) -> LbfgsResult:
    """
    L-BFGS with the two-loop recursion and a strong Wolfe line search. Runs until the
    gradient norm drops below 1e-10 times its initial value, the line search fails or
    `cfg.max_iter` iterations are done. A line search failure ends the epoch and is reported in `reason`.
    """
    fn = _Memo(loss_fn)
    x = np.array(x0, dtype=np.float64)
    f, g = fn(x)
    gtol = LBFGS_GTOL * float(np.linalg.norm(g))
    S, Y, R = deque(maxlen=cfg.history), deque(maxlen=cfg.history), deque(maxlen=cfg.history)
    reason = "max_iter"
    iterations = 0
    for _ in range(cfg.max_iter):
        gnorm = np.linalg.norm(g)
        if gnorm <= gtol:
            reason = "gradient"
            break

        q = g.copy()
        alphas = []
        for s, y, rho in reversed(list(zip(S, Y, R))):
            a = rho * float(s @ q)
            q -= a * y
            alphas.append(a)
        if S:
            gamma = float(S[-1] @ Y[-1]) / float(Y[-1] @ Y[-1])
        else:
            # first step of unit 1-norm, independent of the loss scale
            gamma = 1.0 / np.abs(g).sum()
        r = gamma * q
        for (s, y, rho), a in zip(zip(S, Y, R), reversed(alphas)):
            b = rho * float(y @ r)
            r += s * (a - b)
        d = -r
        if float(g @ d) >= 0:
            S.clear(), Y.clear(), R.clear()
            d = -g / np.abs(g).sum()

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            alpha, _, _, f_new, _, _ = line_search(
                lambda z: fn(z)[0],
                lambda z: fn(z)[1],
                x,
                d,
                gfk=g,
                old_fval=f,
                c1=cfg.c1,
                c2=cfg.c2,
            )
        if alpha is None:
            reason = "line_search"
            log.warning(f"L-BFGS line search failed after {iterations} iteration(s), loss {f:.6e}.")
            break

        step = alpha * d
        x_new = x + step
        f_new, g_new = fn(x_new)
        y = g_new - g
        sy = float(step @ y)
        if sy > LBFGS_CURVATURE_EPS:
            S.append(step)
            Y.append(y)
            R.append(1.0 / sy)
        x, f, g = x_new, f_new, g_new
        iterations += 1
    else:
        if np.linalg.norm(g) <= gtol:
            reason = "gradient"
    return LbfgsResult(x, iterations, f, float(np.linalg.norm(g)), reason)


@dataclass
class TrainResult:
    params: ParameterSet
    records: List[ConvergenceRecord]
    weight: float
    field: Field
    jacobian: object = None
    factors: Optional[IluFactors] = None
    seconds: float = 0.0
    # loss and error at the returned parameters
    loss: float = float("nan")
    rel_l2: float = float("nan")
    target: object = None

    def __iter__(self):
        return iter((self.params, self.records))


class Trainer:
    """
    Epoch loop for one problem, grid and network. The Jacobian of the current
    linearization chains residual-side seeds to the network outputs; the preconditioner
    is rebuilt every `refactor_stride` epochs (once for linear problems).
    """

    def __init__(
        self,
        problem: ProblemSpec,
        grid: StructuredGrid,
        arch: NetworkArch,
        cfg: TrainConfig,
        reference: Optional[ReferenceSolution] = None,
        exit_event=None,
    ):
        if arch.n_out != len(problem.components):
            raise TrainException(
                f"The network has {arch.n_out} outputs but the problem has "
                f"{len(problem.components)} components."
            )
        arch.check_grid(grid)
        self.problem = problem
        self.grid = grid
        self.arch = arch
        self.cfg = cfg
        self.reference = reference
        self.exit_event = exit_event
        self.coords = coordinate_channels(grid)
        self.pattern = residual_pattern(grid, problem)
        self.coloring = color_columns(self.pattern)
        self.op = ResidualOperator(grid, problem)
        self.jacobian = None
        self.factors = None
        self.minv = None
        self.weight = None if cfg.weight == "auto" else float(cfg.weight)
        self.log = log
        log.info(
            f"{problem.kind} on {grid}, {self.op.n} residual entries, "
            f"{self.coloring.n_colors} colors, mode={cfg.mode}, optimizer={cfg.optimizer}."
        )

    @property
    def preconditioned(self) -> bool:
        return self.cfg.mode == PRECONDITIONED

    def output(self, values):
        params = ParameterSet(values, self.arch)
        field, tape = forward(params, self.coords, self.problem.components)
        return params, field, tape

    def refresh(self, values, epoch: int):
        """
        Update the linearization, the Jacobian and, when due, the preconditioner.
        """
        nonlinear = self.problem.kind == CAVITY
        if self.jacobian is not None and not nonlinear:
            return
        _, field, _ = self.output(values)
        if nonlinear:
            self.op = ResidualOperator(self.grid, self.problem, LinearizationState.from_field(field))
        point = field_to_unknowns(field, self.problem)
        self.jacobian, _ = assemble_jacobian(self.op, point, self.coloring, self.pattern)

        if self.preconditioned and (self.factors is None or epoch % self.cfg.refactor_stride == 0):
            if self.cfg.force_identity:
                self.factors = IluFactors.identity(self.op.n)
            else:
                self.factors = ilu0(self.target())
            if self.cfg.preconditioner == DENSE:
                self.minv = dense_minv(self.factors)
            log.debug(f"Rebuilt the preconditioner at epoch {epoch}.")

        if self.weight is None:
            self.weight = self.auto_weight(self.op(point))
            log.info(f"Automatic loss weight {self.weight:.6e}.")

    def target(self):
        """
        The matrix the preconditioner factors: J with the pressure stabilization for the cavity.
        """
        return stabilized_jacobian(self.jacobian, self.grid, self.problem, self.cfg.stabilization)

    def auto_weight(self, f0) -> float:
        """
        1 for the baseline loss, ||f0||^2 / ||M^-1 f0||^2 for the preconditioned one.
        """
        if not self.preconditioned:
            return 1.0
        p0 = apply_minv(self.factors, f0)
        den = float(p0 @ p0)
        return float(f0 @ f0) / den if den > 0 else 1.0

    def loss_and_seed(self, f):
        if not self.preconditioned:
            return baseline_loss(f, self.weight)
        if self.cfg.preconditioner == DENSE:
            return dense_precond_loss(f, self.minv, self.weight)
        loss, seed, _ = precond_loss(f, self.factors, self.weight)
        return loss, seed

    def evaluate(self, values) -> Tuple[float, np.ndarray, Field]:
        """
        Loss and parameter gradient at `values`.
        """
        params, field, tape = self.output(values)
        f = self.op(field_to_unknowns(field, self.problem))
        loss, seed_r = self.loss_and_seed(f)
        seed_w = self.jacobian.T @ seed_r
        seed = unknowns_to_values(seed_w, self.grid, self.problem)
        return loss, backward(tape, seed, params), field

    def error(self, field: Field) -> float:
        if self.reference is None:
            return float("nan")
        return relative_l2(field, self.reference)

    def train(self, params: Optional[ParameterSet] = None) -> TrainResult:
        cfg = self.cfg
        configure_torch()
        if params is None:
            params = init_params(self.arch, cfg.seed)
        values = params.values.copy()
        state = None
        records = []
        start = perf_counter()
        field = None
        for epoch in range(cfg.epochs):
            if self.exit_event is not None and self.exit_event.is_set():
                log.warning(f"Training interrupted at epoch {epoch}.")
                break
            try:
                self.refresh(values, epoch)
                if cfg.optimizer == ADAM:
                    loss, grads, field = self.evaluate(values)
                    values, state = adam_step(values, grads, state, cfg.adam)
                else:
                    result = lbfgs_epoch(values, lambda x: self.evaluate(x)[:2], cfg.lbfgs)
                    values, loss = result.x, result.loss
                    field = self.output(values)[1]
            except (NetException, TrainException) as e:
                raise TrainException(f"Epoch {epoch}: {e}", epoch=epoch, index=getattr(e, "index", None))
            if not np.isfinite(loss) or not np.isfinite(values).all():
                raise TrainException(f"Non-finite loss at epoch {epoch}.", epoch=epoch)

            if epoch % cfg.log_stride == 0 or epoch == cfg.epochs - 1:
                record = ConvergenceRecord(epoch, float(loss), self.error(field), perf_counter(start))
                records.append(record)
                extra = ""
                if self.problem.kind == CAVITY:
                    extra = f", checkerboard={checkerboard_index(field.component('p')):.4f}"
                log.info(
                    f"epoch={epoch} loss={record.loss:.6e} rel_l2={record.rel_l2:.6e}"
                    f" t={record.seconds:.1f}s{extra}"
                )

        params = ParameterSet(values, self.arch)
        final_loss, final_field = float("nan"), self.output(values)[1]
        if self.jacobian is not None:
            final_loss, _, final_field = self.evaluate(values)
        return TrainResult(
            params,
            records,
            self.weight if self.weight is not None else 1.0,
            final_field,
            self.jacobian,
            self.factors,
            perf_counter(start),
            loss=float(final_loss),
            rel_l2=self.error(final_field),
            target=None if self.jacobian is None else self.target(),
        )


def train(
    problem: ProblemSpec,
    grid: StructuredGrid,
    arch: NetworkArch,
    cfg: TrainConfig,
    mode: Optional[str] = None,
    reference: Optional[ReferenceSolution] = None,
    params: Optional[ParameterSet] = None,
    exit_event=None,
) -> TrainResult:
    """
    Train a network on `problem`; `mode` overrides `cfg.mode`. The result unpacks to
    (final parameters, convergence records).
    """
    if mode is not None and mode != cfg.mode:
        cfg = dataclasses.replace(cfg, mode=mode)
    return Trainer(problem, grid, arch, cfg, reference, exit_event).train(params)
