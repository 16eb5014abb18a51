# -*- coding: utf-8 -*-

from __future__ import absolute_import, unicode_literals

import json
import os

import click

from prepinn.components.experiment import from_config
from prepinn.config import env_variables

from . import BaseCommandLogOnly, BaseCommandLogOnlyNoValidate


@click.group("config", help="Configuration commands")
def command_config():
    pass


@click.command("show", help="Show the run configuration.", cls=BaseCommandLogOnly)
def config_show(config, log):
    print(json.dumps(config.root._config, indent=4, default=str))


@click.command("env", help="Show environment variables.")
def config_env():
    print("List of environment variables used by prepinn:")
    print("")
    for e in env_variables:
        print(f"{e}={os.getenv(e)}")
    print("")


@click.command("validate", help="Validate configuration.", cls=BaseCommandLogOnlyNoValidate)
def config_validate(config, log):
    res, errors = config.validate(throw_ex=False)
    if not res:
        click.echo(f"Validation of {config.config_file} failed with the following errors:")
        for e in errors:
            click.echo(f"- {config.describe_error(e)}")
        raise click.exceptions.Exit(1)
    from_config(config)
    click.echo(f"The configuration file {config.config_file} is valid.")


command_config.add_command(config_show)
command_config.add_command(config_env)
command_config.add_command(config_validate)
