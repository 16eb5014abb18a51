# -*- coding: utf-8 -*-

from __future__ import absolute_import, unicode_literals

import logging

import click
from click import Argument, Option

import prepinn.config as prepinn_config
from prepinn import __version__
from prepinn.config import Config, init_logging


def log_level():
    return "DEBUG" if prepinn_config.DEBUG else "INFO"


class BaseCommand(click.core.Command):
    """
    A command that reads, validates and injects a run configuration (`config`) and a
    logger (`log`).
    """

    log_handlers = ["file", "console"]

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.params.insert(
            0,
            Argument(
                ("config",),
                required=prepinn_config.CONFIG_FILE is None,
                default=prepinn_config.CONFIG_FILE,
                metavar="<config>",
            ),
        )
        self.params.insert(
            1,
            Option(
                ("-e", "--env"),
                metavar="<file>",
                required=False,
                help="Environment variable file",
                default=prepinn_config.CONFIG_ENV,
            ),
        )

    def init_logging(self, config, command_name):
        init_logging(
            config.get_dir_path(config("logs", default="logs")),
            command_name,
            log_level=log_level(),
            handlers=self.log_handlers,
        )

    def validate_config(self, config):
        config.validate()

    def invoke(self, ctx):
        config_file = ctx.params.pop("config")
        env_file = ctx.params.pop("env")
        config = Config(config_file, env_file, schema="config-schema.yaml")
        self.validate_config(config)

        self.init_logging(config, ctx.command.name)
        log = logging.getLogger(ctx.command.name)
        log.info(f"prepinn, preconditioned physics-informed networks, version {__version__}")

        ctx.params["config"] = config
        ctx.params["log"] = log
        return super().invoke(ctx)


class BaseCommandLogOnly(BaseCommand):
    log_handlers = ["file"]


class BaseCommandLogOnlyNoValidate(BaseCommandLogOnly):
    def validate_config(self, config):
        pass
