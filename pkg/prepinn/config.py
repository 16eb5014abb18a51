# -*- coding: utf-8 -*-

from __future__ import absolute_import, unicode_literals

import io
import logging
import logging.config
import os
import re
from threading import Event

import jinja2
import yaml
from jsonschema import Draft7Validator
from jsonschema.validators import extend

from .utils import Map, PrepinnException, deep_find, str2bool

# they must be in a form ${VARIABLE_NAME}
ENVNAME_PATTERN = "[A-Z0-9_]+"
ENVPARAM_PATTERN = r"\$\{%s\}" % ENVNAME_PATTERN

# consolidated variables supplied via env file and environment variables
ENV = {}

DEBUG = str2bool(os.getenv("PREPINN_DEBUG", "False"))
ANSI_COLORS = not str2bool(os.getenv("PREPINN_NO_ANSI", "False"))
CONFIG_FILE = os.getenv("PREPINN_CONFIG", None)
CONFIG_ENV = os.getenv("PREPINN_ENV", None)

env_variables = ["PREPINN_DEBUG", "PREPINN_NO_ANSI", "PREPINN_CONFIG", "PREPINN_ENV"]

# global exit event, set by SIGINT/SIGTERM
exit_event = Event()

# valid schema versions
SCHEMA_VERSIONS = ["1.0"]


class ConfigException(PrepinnException):
    """
    Invalid configuration. `path` is the dotted key path and `line` the 1-based line
    of the offending node in the configuration file, when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = []
        if path:
            where.append(f"'{path}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))


class Jinja2TemplateLoader(jinja2.BaseLoader):
    def get_source(self, environment, template):
        if not os.path.exists(template):
            raise jinja2.TemplateNotFound(template)
        with open(template, "r", encoding="utf-8") as f:
            source = f.read()
        return source, template, lambda: True


class Jinja2Template(io.BytesIO):
    name = None

    def __init__(self, file, scope=None):
        super(Jinja2Template, self).__init__(None)
        self.name = file
        env = jinja2.Environment(
            loader=Jinja2TemplateLoader(),
            keep_trailing_newline=True,
            undefined=jinja2.StrictUndefined,
        )
        if scope is not None:
            env.globals.update(scope)
        try:
            content = env.get_template(file).render()
            self.write(content.encode())
            self.seek(0)
        except Exception as e:
            raise ConfigException(
                f"Error when processing template {os.path.basename(file)}: {str(e)}"
            )


def get_template_file(name):
    tfile = os.path.dirname(os.path.realpath(__file__)) + f"/templates/{name}"
    if not os.path.exists(tfile):
        raise ConfigException(f"The template {tfile} does not exist!")
    return tfile


def render_template(name, **scope):
    """
    Render a bundled Jinja2 template with `scope` as its globals.
    """
    return Jinja2Template(get_template_file(name), scope).read().decode("utf-8")


def get_schema_file(name):
    sfile = os.path.dirname(os.path.realpath(__file__)) + f"/schemas/{name}"
    if not os.path.exists(sfile):
        raise ConfigException(f"The schema {sfile} does not exist!")
    return sfile


def get_dir_path(config_dir, path, base_dir=None, check=False):
    """
    Return the directory for the path specified.
    """
    d = os.path.normpath(
        (
            ((config_dir if base_dir is None else base_dir) + "/")
            if path[0] != "/"
            else ""
        )
        + path
    )
    if check and not os.path.exists(d):
        raise ConfigException(f"The directory {d} does not exist!")
    return d


def init_env(env_file, sep="=", comment="#"):
    """
    Read environment variables from the `env_file` and combine them with the OS environment variables.
    """
    env = {}
    for k, v in os.environ.items():
        env[k] = v
    if env_file:
        with open(env_file, "rt") as f:
            for line in f:
                l = line.strip()
                if l and not l.startswith(comment):
                    key_value = l.split(sep)
                    key = key_value[0].strip()
                    if not re.match(f"^{ENVNAME_PATTERN}$", key):
                        raise ConfigException(f"Invalid variable name '{key}'.")
                    value = sep.join(key_value[1:]).strip().strip("\"'")
                    env[key] = value
    return env


def replace_env_variable(value):
    """
    Replace all environment variables in a string provided in `value` parameter
    with values of variable in `ENV` global variable.
    """
    params = list(set(re.findall("(%s)" % ENVPARAM_PATTERN, value)))
    if len(params) > 0:
        for k in params:
            env_value = ENV.get(k[2:-1])
            if env_value is None:
                raise ConfigException(f"The environment variable {k} does not exist!")
            else:
                value = value.replace(k, env_value)
    return value


def env_constructor(loader, node):
    """
    A constructor for environment variables provided in the yaml configuration file.
    It populates strings that contain environment variables in a form `${var_name}` with
    their values.
    """
    return replace_env_variable(node.value)


def read_config(config_file, env_file, use_template, scope=None):
    if not (os.path.exists(config_file)):
        raise ConfigException(f"The configuration file {config_file} does not exist!")
    if env_file and not (os.path.exists(env_file)):
        raise ConfigException(f"The environment file {env_file} does not exist!")

    # init yaml reader
    global ENV
    ENV = init_env(env_file)
    yaml.add_implicit_resolver(
        "!env", re.compile(r".*%s.*" % ENVPARAM_PATTERN), Loader=yaml.FullLoader
    )
    yaml.add_constructor("!env", env_constructor, Loader=yaml.FullLoader)

    config_file = os.path.realpath(config_file)
    stream = (
        open(config_file, "r", encoding="utf-8")
        if not use_template
        else Jinja2Template(config_file, Map(env=ENV, **(scope or {})))
    )
    try:
        text = stream.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        config = yaml.load(text, Loader=yaml.FullLoader)
    except ConfigException:
        raise
    except Exception as e:
        raise ConfigException(
            f"Error when reading the configuration file {config_file}: {str(e)}"
        )
    finally:
        stream.close()
    config_dir = os.path.dirname(config_file)
    return config, config_file, config_dir, text


def node_line(root, path):
    """
    Return the 1-based line of the yaml node at `path` (a sequence of keys and indices)
    in the composed node tree `root`, or the line of the deepest node found.
    """
    node = root
    for key in path:
        if isinstance(node, yaml.MappingNode):
            found = next((v for k, v in node.value if k.value == str(key)), None)
            if found is None:
                break
            node = found
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int):
            if key >= len(node.value):
                break
            node = node.value[key]
        else:
            break
    return node.start_mark.line + 1 if node is not None else None


def key_line(root, path, key):
    """
    Return the line of mapping key `key` under `path`.
    """
    node = root
    for k in path:
        if not isinstance(node, yaml.MappingNode):
            return None
        node = next((v for kn, v in node.value if kn.value == str(k)), None)
        if node is None:
            return None
    if isinstance(node, yaml.MappingNode):
        for kn, _ in node.value:
            if kn.value == key:
                return kn.start_mark.line + 1
    return None


class Config:
    """
    The main configuration.
    """

    def __init__(self, file, env=None, schema=None, scope=None, use_template=True):
        """
        Read and parse the configuration from the yaml file.
        """
        self.schema = None
        if not (os.path.exists(file)):
            raise ConfigException(f"The configuration file {file} does not exist!")
        self.raw_config, self.config_file, self.config_dir, self.text = read_config(
            file, env, use_template=use_template, scope=scope
        )
        if not isinstance(self.raw_config, dict):
            raise ConfigException(
                f"The configuration file {self.config_file} must contain a mapping!"
            )
        self.root = self.get_part(None)
        if schema:
            self.schema = read_config(
                get_schema_file(schema), None, use_template=False
            )[0]

    def line(self, path):
        """
        Return the line number of the node at the dotted `path`.
        """
        try:
            root = yaml.compose(self.text, Loader=yaml.FullLoader)
        except yaml.YAMLError:
            return None
        return node_line(root, [p for p in path.split(".") if p])

    def validate(self, throw_ex=True):
        def __version(c, i):
            return i in SCHEMA_VERSIONS

        def __weight(c, i):
            return i == "auto" or (
                isinstance(i, (int, float)) and not isinstance(i, bool) and i > 0
            )

        type_checker = Draft7Validator.TYPE_CHECKER.redefine_many(
            Map(__version=__version, __weight=__weight)
        )
        ConfigValidator = extend(Draft7Validator, type_checker=type_checker)
        validator = ConfigValidator(self.schema)
        errors = sorted(
            validator.iter_errors(self.raw_config),
            key=lambda e: [str(x) for x in e.absolute_path],
        )

        if errors:
            if throw_ex:
                raise self.describe_error(errors[0])
            return False, errors
        return True, None

    def describe_error(self, error):
        """
        Convert a jsonschema error to a `ConfigException` with key path and line number.
        """
        path = list(error.absolute_path)
        try:
            root = yaml.compose(self.text, Loader=yaml.FullLoader)
        except yaml.YAMLError:
            root = None
        m = re.search(r"\('([^']+)' (was|were) unexpected\)", error.message)
        if m is not None:
            key = m.group(1).split("', '")[0]
            dotted = ".".join([str(x) for x in path] + [key])
            line = key_line(root, path, key) if root is not None else None
            return ConfigException(f"Unknown key '{key}'", dotted, line)
        dotted = ".".join([str(x) for x in path])
        line = node_line(root, path) if root is not None else None
        return ConfigException(f"Invalid value: {error.message}", dotted or None, line)

    def get_dir_path(self, path, base_dir=None, check=False):
        """
        Return the full directory of the path with `config_dir` as the base directory.
        """
        return get_dir_path(self.config_dir, path, base_dir, check)

    def get_part(self, path):
        """
        Return a `ConfigPart` object for a part of the configuration
        """
        return ConfigPart(
            self,
            path,
            self.raw_config,
            self.config_dir,
        )

    def __call__(self, path, default=None, type=None, required=True):
        return self.root(path, default=default, type=type, required=required)


class ConfigPart:
    def __init__(self, parent, base_path, config, config_dir):
        self.parent = parent
        self.config_dir = config_dir
        self.base_path = base_path
        if base_path is not None:
            self._config = deep_find(config, base_path)
        else:
            self._config = config

    def get_dir_path(self, path, base_dir=None, check=False):
        return get_dir_path(self.config_dir, path, base_dir, check)

    def path(self, path):
        return "%s.%s" % (self.base_path, path) if self.base_path is not None else path

    def fail(self, path, message):
        full = self.path(path)
        return ConfigException(message, full, self.parent.line(full))

    def __call__(self, path, default=None, type=None, required=True):
        return self.value(path, default, type, required)

    def value(self, path, default=None, type=None, required=True):
        required = default is None and required
        r = default
        if self._config is not None:
            val = deep_find(self._config, path)
            if val is not None:
                r = type(val) if type != None else val
        if r is None and required:
            raise ConfigException("The property does not exist!", self.path(path))
        return r

    def value_str(self, path, default=None, regex=None, required=False):
        v = self.value(path, default=default, type=str, required=required)
        if regex is not None and v is not None and not re.match(regex, v):
            raise self.fail(path, f"The value {v} does not match {regex}!")
        return v

    def value_int(self, path, default=None, min=None, max=None, required=False):
        v = self.value(path, default=default, type=int, required=required)
        if min is not None and v < min:
            raise self.fail(path, f"The value {v} must be greater or equal to {min}!")
        if max is not None and v > max:
            raise self.fail(path, f"The value {v} must be less or equal to {max}!")
        return v

    def value_float(self, path, default=None, required=False):
        return self.value(path, default=default, type=float, required=required)

    def value_bool(self, path, default=None, required=False):
        return self.value(path, default=default, type=bool, required=required)


class CustomFormatter(logging.Formatter):
    grey = "\x1b[38;20m"
    yellow = "\x1b[33;20m"
    red = "\x1b[31;20m"
    bold_red = "\x1b[31;1m"
    reset = "\x1b[0m"
    format_header = "%(asctime)s [%(name)-10.10s] "
    format_msg = "[%(levelname)-1.1s] %(message)s"

    FORMATS = {
        logging.DEBUG: format_header + grey + format_msg + reset,
        logging.INFO: format_header + grey + format_msg + reset,
        logging.WARNING: format_header + yellow + format_msg + reset,
        logging.ERROR: format_header + red + format_msg + reset,
        logging.CRITICAL: format_header + bold_red + format_msg + reset,
    }

    def format(self, record):
        log_fmt = self.FORMATS.get(record.levelno)
        formatter = logging.Formatter(log_fmt)
        return formatter.format(record)


def init_logging(logs_dir, command_name, log_level="INFO", handlers=["file", "console"]):
    """
    Initialize the logging, set the log level and logging directory. Without `logs_dir`
    only the console handler is used.
    """
    if logs_dir is None:
        handlers = [h for h in handlers if h != "file"]
    else:
        os.makedirs(logs_dir, exist_ok=True)

    handler_defs = {
        "console": {
            "formatter": "colored" if ANSI_COLORS else "standard",
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stdout",
        },
        "file": {
            "formatter": "standard",
            "class": "logging.handlers.TimedRotatingFileHandler",
            "filename": f"{logs_dir}/prepinn_{command_name}.log",
            "when": "midnight",
            "interval": 1,
            "backupCount": 30,
        },
    }

    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "standard": {
                    "format": CustomFormatter.format_header + CustomFormatter.format_msg
                },
                "colored": {"()": CustomFormatter},
            },
            "handlers": {h: handler_defs[h] for h in handlers},
            "loggers": {
                "": {  # all loggers
                    "handlers": handlers,
                    "level": f"{log_level}",
                    "propagate": False,
                }
            },
        }
    )
