# -*- coding: utf-8 -*-

from __future__ import absolute_import, unicode_literals

import sys

import click

import prepinn.config as prepinn_config
from prepinn.components.checks import run_checks
from prepinn.config import init_logging
from prepinn.json2table import Table
from prepinn.utils import bcolors, format_str_color

from . import log_level


@click.command("check", help="Run the invariant self-check suite.")
@click.option("--corrupt-ilu", "corrupt_ilu", is_flag=True, default=False, hidden=True)
def command_check(corrupt_ilu):
    init_logging(None, "check", log_level=log_level(), handlers=["console"] if prepinn_config.DEBUG else [])
    results = run_checks(corrupt_ilu=corrupt_ilu)

    def _result(cdef, value, entry):
        return format_str_color(
            "PASS" if value else "FAIL",
            bcolors.OKGREEN if value else bcolors.ERROR,
            not prepinn_config.ANSI_COLORS,
        )

    table_def = [
        {"name": "CHECK", "value": "{name}"},
        {"name": "RESULT", "value": "{passed}", "format": _result},
        {"name": "DETAIL", "value": "{detail}"},
    ]
    Table(table_def).display([r.__dict__ for r in results])
    failed = [r.name for r in results if not r.passed]
    if failed:
        sys.stderr.write(f"{len(failed)} check(s) failed: {', '.join(failed)}\n")
        sys.exit(1)
