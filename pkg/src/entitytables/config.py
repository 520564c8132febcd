#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# Copyright © 2024 entitytables developers
""" Run configuration

Values are layered, later sources winning:

    1. the packaged data/defaults.yaml
    2. a user config file (YAML, the same keys)
    3. the environment: ENTITYTABLES_CACHE_ROOT, ENTITYTABLES_OFFLINE,
       ENTITYTABLES_TAPE
    4. command-line flags

The API key is never read from a file; ``api_key_env`` names the
environment variable that holds it.

.. codeauthor: entitytables developers
"""
import logging
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import yaml

from . import entityerror as ee
from .util import get_filepath

logger = logging.getLogger(__name__)

ENV_PREFIX = 'ENTITYTABLES_'
env_keys = {'CACHE_ROOT': 'cache_root', 'OFFLINE': 'offline',
            'TAPE': 'tape'}
tape_modes = ('off', 'record', 'replay')

_true_words = {'1', 'true', 'yes', 'on'}
_false_words = {'0', 'false', 'no', 'off', ''}


@dataclass
class RunConfig:
    sparql_endpoint: str
    search_endpoint: str
    page_endpoint: str
    llm_base_url: str
    capable_model: str
    fast_model: str
    api_key_env: str = 'ENTITYTABLES_API_KEY'
    cache_root: Optional[Path] = None
    offline: bool = False
    tape: Optional[Path] = None
    tape_mode: Optional[str] = None
    strict_replay: bool = True
    seed: int = 7
    workers: int = 8
    synonyms: Optional[Path] = None
    max_sample_rows: int = 5
    page_size: int = 5000

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, _coerce(f.name, getattr(self, f.name)))
        if self.tape_mode is None:
            self.tape_mode = 'replay' if self.tape is not None else 'off'
        problems = self.problems()
        if problems:
            raise ee.ConfigError('; '.join(problems))

    def problems(self):
        problems = []
        if self.offline and self.cache_root is None:
            problems.append('offline mode requires cache_root')
        if self.tape_mode not in tape_modes:
            problems.append(f"tape_mode must be one of {', '.join(tape_modes)}")
        elif self.tape_mode != 'off' and self.tape is None:
            problems.append(f"tape_mode '{self.tape_mode}' requires tape")
        if self.workers < 1:
            problems.append('workers must be at least 1')
        if not 0 <= self.max_sample_rows <= 5:
            problems.append('max_sample_rows must lie in 0..5')
        if self.page_size < 1:
            problems.append('page_size must be at least 1')
        return problems

    def api_key(self):
        return os.environ.get(self.api_key_env)

    def to_dict(self):
        return {k: (str(v) if isinstance(v, Path) else v)
                for k, v in asdict(self).items()}


_paths = {'cache_root', 'tape', 'synonyms'}
_bools = {'offline', 'strict_replay'}
_ints = {'seed', 'workers', 'max_sample_rows', 'page_size'}


def _coerce(name, value):
    if value is None:
        return None
    try:
        if name in _paths:
            return Path(value).expanduser()
        if name in _bools:
            if isinstance(value, bool):
                return value
            text = str(value).strip().casefold()
            if text in _true_words:
                return True
            if text in _false_words:
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if name in _ints:
            if isinstance(value, bool):
                raise ValueError(f"not an integer: {value!r}")
            return int(value)
    except (TypeError, ValueError) as e:
        raise ee.ConfigError(f"{name}: {e}")
    return str(value)


def read_config_file(path):
    """ The mapping in a YAML config file.

    Raises:
        ConfigError: unreadable file, not a mapping, or unknown keys
    """
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as f:
            data = yaml.safe_load(f.read())
    except (OSError, yaml.YAMLError) as e:
        raise ee.ConfigError(f"{path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ee.ConfigError(f"{path}: expected a mapping of settings")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ee.ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    return data


def environment_settings(environ=None):
    environ = os.environ if environ is None else environ
    return {key: environ[ENV_PREFIX + var] for var, key in env_keys.items()
            if ENV_PREFIX + var in environ}


def load_config(path=None, environ=None, overrides=None) -> RunConfig:
    """ Build a RunConfig from defaults, ``path``, the environment and
    ``overrides`` (flag values; None means not given). """
    settings = read_config_file(get_filepath('defaults.yaml'))
    if path is not None:
        settings.update(read_config_file(path))
    settings.update(environment_settings(environ))
    settings.update({k: v for k, v in (overrides or {}).items()
                     if v is not None})
    unknown = sorted(set(settings) - {f.name for f in fields(RunConfig)})
    if unknown:
        raise ee.ConfigError(f"unknown settings {', '.join(unknown)}")
    config = RunConfig(**settings)
    logger.debug("config: %s", config.to_dict())
    return config
