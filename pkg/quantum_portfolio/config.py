import os
from typing import Any, Callable, Tuple, Union

import numpy as np

from quantum_portfolio.exceptions import ConfigurationError

JOBS_ENVIRONMENT_VARIABLE = 'QUANTUM_PORTFOLIO_JOBS'


def package_version() -> str:
    try:
        from importlib.metadata import PackageNotFoundError, version
    except ImportError:
        return 'unknown'
    try:
        return version('QuantumPortfolio')
    except PackageNotFoundError:
        return 'unknown'


def deep_map(map_fn: Callable[[Any], Tuple[Any, bool]], data: Union[dict, list]):
    """
    Applies `map_fn` to every value of a nested structure of dicts and lists.

    `map_fn` returns the mapped value and whether to recurse into it, should it be a container itself.
    """
    if isinstance(data, dict):
        mapped_data = dict()
        for key in data.keys():
            mapped, recurse = map_fn(data[key])
            if isinstance(mapped, (dict, list, tuple)) and recurse:
                mapped = deep_map(map_fn, mapped)
            mapped_data[key] = mapped
        return mapped_data
    if isinstance(data, (list, tuple)):
        mapped_data = list()
        for element in data:
            mapped, recurse = map_fn(element)
            if isinstance(mapped, (dict, list, tuple)) and recurse:
                mapped = deep_map(map_fn, mapped)
            mapped_data.append(mapped)
        return mapped_data
    mapped, _ = map_fn(data)
    return mapped


def _jsonable_value(value):
    if isinstance(value, np.ndarray):
        return value.tolist(), False
    if isinstance(value, np.bool_):
        return bool(value), False
    if isinstance(value, np.integer):
        return int(value), False
    if isinstance(value, np.floating):
        return float(value), False
    if isinstance(value, (dict, list, tuple)):
        return dict(value) if isinstance(value, dict) else list(value), True
    return value, False


def to_jsonable(data):
    """Replaces numpy arrays and scalars inside a nested structure by plain Python values."""
    return deep_map(_jsonable_value, data)


def deep_merge(base: dict, override: dict) -> dict:
    """
    Merges `override` into a copy of `base`. Nested dicts are merged key by key, everything else is replaced.
    None values in `override` leave the base value in place.
    """
    merged = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def resolve_run_config(command: str, flags: dict, file_config: Union[None, dict] = None) -> dict:
    """
    Builds the run configuration of a command.

    The config file (if any) supplies the base values and the command line flags win. Flags that were not given
    are None and leave the file's value alone. A run manifest may be passed as config file to repeat its run.

    :param command: The subcommand name.
    :param flags: Flag values as parsed from the command line, possibly nested.
    :param file_config: Contents of the --config file.
    :return: The resolved configuration, including the command name.
    """
    if file_config is not None and not isinstance(file_config, dict):
        raise ConfigurationError("the config file must hold a JSON object")
    file_config = dict(file_config or {})
    if 'schema_version' in file_config and isinstance(file_config.get('config'), dict):
        # a run manifest
        file_config = dict(file_config['config'])
    file_command = file_config.pop('command', command)
    if file_command != command:
        raise ConfigurationError("the config file was written for '{}', not '{}'".format(file_command, command))
    resolved = deep_merge(file_config, flags)
    resolved['command'] = command
    return resolved


def default_jobs() -> int:
    value = os.environ.get(JOBS_ENVIRONMENT_VARIABLE)
    if value is None or value == '':
        return 1
    try:
        jobs = int(value)
    except ValueError:
        raise ConfigurationError("{} must be a positive integer. Not '{}'".format(
            JOBS_ENVIRONMENT_VARIABLE, value)) from None
    if jobs < 1:
        raise ConfigurationError("{} must be a positive integer. Not '{}'".format(JOBS_ENVIRONMENT_VARIABLE, value))
    return jobs
