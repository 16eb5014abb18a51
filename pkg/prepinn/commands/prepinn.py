# -*- coding: utf-8 -*-

from __future__ import absolute_import, unicode_literals

import signal
import sys
import traceback

import click

import prepinn.config as prepinn_config
from prepinn import __version__
from prepinn.commands.check import command_check
from prepinn.commands.config import command_config
from prepinn.commands.run import command_run, command_sweep
from prepinn.utils import bcolors, format_str_color


class CoreCommand(click.core.Group):
    def invoke(self, ctx):
        prepinn_config.ANSI_COLORS = not ctx.params.get("no_ansi", False)
        prepinn_config.DEBUG = ctx.params.get("debug", False) or prepinn_config.DEBUG
        try:
            for sig in ("TERM", "INT"):
                signal.signal(
                    getattr(signal, "SIG" + sig),
                    lambda x, y: prepinn_config.exit_event.set(),
                )
            return click.core.Group.invoke(self, ctx)
        except click.exceptions.Exit as e:
            sys.exit(e.exit_code)
        except click.core.ClickException as e:
            raise e
        except Exception as e:
            sys.stderr.write(
                format_str_color(
                    f"ERROR: {str(e)}\n", bcolors.ERROR, not prepinn_config.ANSI_COLORS
                )
            )
            if prepinn_config.DEBUG:
                print("---")
                traceback.print_exc()
                print("---")

            sys.exit(1)


@click.group(cls=CoreCommand)
@click.option("--no-ansi", "no_ansi", is_flag=True, default=False, help="No colors.")
@click.option("-d", "--debug", "debug", is_flag=True, default=False, help="Be verbose.")
@click.version_option(version=__version__)
def prepinn(debug, no_ansi):
    pass


prepinn.add_command(command_run)
prepinn.add_command(command_sweep)
prepinn.add_command(command_check)
prepinn.add_command(command_config)
