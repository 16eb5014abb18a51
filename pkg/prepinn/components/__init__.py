# -*- coding: utf-8 -*-

from __future__ import absolute_import, unicode_literals

from .grid import Field, StructuredGrid, coordinate_channels, make_grid
from .discretize import (
    LinearizationState,
    ProblemSpec,
    ResidualOperator,
    cavity_problem,
    poisson_problem,
    residual,
    residual_jvp,
)
from .sparsela import (
    IluFactors,
    apply_minv,
    apply_minv_transpose,
    assemble_jacobian,
    color_columns,
    gmres,
    ilu0,
    spmv,
)
from .net import NetworkArch, ParameterSet, backward, forward, init_params, load_params
from .oracle import ReferenceSolution, picard_solve, poisson_exact, relative_l2
# components.train is the module, train() is not re-exported
from .train import TrainConfig, Trainer, adam_step, baseline_loss, lbfgs_epoch, precond_loss
