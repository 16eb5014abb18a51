# -*- coding: utf-8 -*-

from __future__ import absolute_import, unicode_literals

import glob
import os

import click

import prepinn.config as prepinn_config
from prepinn.components.experiment import from_config, run, sweep
from prepinn.config import get_dir_path, init_logging
from prepinn.json2table import Table
from prepinn.utils import PrepinnException, format_float

from . import BaseCommand, log_level


def overrides(fn):
    fn = click.option("--epochs", "epochs", type=int, metavar="<n>", help="Override training.epochs.")(fn)
    fn = click.option("--out", "out", metavar="<dir>", help="Override output.directory.")(fn)
    fn = click.option("--seed", "seed", type=int, metavar="<n>", help="Override training.seed.")(fn)
    return fn


@click.command("run", help="Train a network for a run configuration.", cls=BaseCommand)
@overrides
def command_run(config, log, seed, out, epochs):
    rc = from_config(config).override(seed=seed, out=out, epochs=epochs)
    outcome = run(rc, prepinn_config.exit_event)
    click.echo(
        f"{outcome.name}: loss={format_float(outcome.loss)} rel_l2={format_float(outcome.rel_l2)} "
        f"epochs={outcome.epochs} -> {outcome.directory}"
    )


@click.command("sweep", help="Run all configurations matching a glob pattern, one after another.")
@click.argument("pattern", metavar="<config-glob>")
@click.option("-e", "--env", "env", metavar="<file>", default=prepinn_config.CONFIG_ENV, help="Environment variable file")
@overrides
def command_sweep(pattern, env, seed, out, epochs):
    files = sorted(glob.glob(pattern))
    if not files:
        raise PrepinnException(f"No configuration matches {pattern}.")
    init_logging(get_dir_path(os.path.dirname(os.path.abspath(files[0])), "logs"), "sweep", log_level=log_level())
    outcomes = sweep(pattern, env, seed=seed, out=out, epochs=epochs, exit_event=prepinn_config.exit_event)
    table_def = [
        {"name": "RUN", "value": "{name}"},
        {"name": "EPOCHS", "value": "{epochs}", "justify": "right"},
        {"name": "LOSS", "value": "{loss}", "format": lambda c, v, e: "%.6e" % v, "justify": "right"},
        {"name": "REL_L2", "value": "{rel_l2}", "format": lambda c, v, e: "%.6e" % v, "justify": "right"},
        {"name": "OUTPUT", "value": "{directory}"},
    ]
    Table(table_def).display([o.__dict__ for o in outcomes])
