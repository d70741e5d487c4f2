"""
Experiment config files.

A config file holds flat ``key = value`` lines with dotted keys (``model.pi``,
``slab.K``, ``experiment.n``) and ``#`` comments. Keys the file omits fall
back to ``settings.LAB_DEFAULTS``.
"""

import logging
from pathlib import Path

from django.conf import settings

from decouple import Config, RepositoryEnv

from manifold_lab.exceptions import ConfigError

from .forms import ExperimentConfigForm
from .models import KEY_FIELDS, ExperimentConfig

logger = logging.getLogger(__name__)

FIELD_KEYS = {name: key for key, name in KEY_FIELDS.items()}


def read_config_file(path):
    """
    Raw string values of a config file.

    Raises:
        ConfigError: If the file is missing or holds keys outside the schema.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    repository = RepositoryEnv(str(path))
    unknown = sorted(set(repository.data) - set(KEY_FIELDS))
    if unknown:
        raise ConfigError(
            f"unknown config keys: {', '.join(unknown)}",
            errors={key: ["unknown key"] for key in unknown},
        )
    source = Config(repository)
    return {key: source(key, default=None) for key in repository.data}


def _form_errors(form):
    errors = {}
    for name, items in form.errors.get_json_data().items():
        errors[FIELD_KEYS.get(name, name)] = [item["message"] for item in items]
    return errors


def load_config(path=None, overrides=None):
    """
    Read, validate and build an ExperimentConfig.

    Args:
        path (str | Path): Config file; None uses the defaults alone.
        overrides (dict): Dotted keys taking precedence over the file, as
            set by the ``--seed``, ``--threads`` and ``--out`` flags.

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: Carrying the form errors keyed by dotted key.
    """
    values = {key: str(value) for key, value in settings.LAB_DEFAULTS.items()}
    if path is not None:
        values.update(read_config_file(path))
    for key, value in (overrides or {}).items():
        if key not in KEY_FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        if value is not None:
            values[key] = str(value)

    form = ExperimentConfigForm(
        data={KEY_FIELDS[key]: value for key, value in values.items()}
    )
    if not form.is_valid():
        errors = _form_errors(form)
        logger.error("invalid experiment config: %s", errors)
        raise ConfigError("invalid experiment config", errors=errors)
    config = ExperimentConfig.from_cleaned(form.cleaned_data)
    logger.info(
        "loaded %s/%s/%s config with n=%s",
        config.preset,
        config.noise,
        config.estimator,
        ",".join(str(n) for n in config.ns),
    )
    return config
