import logging
import os
import re

import yaml
from dotenv import load_dotenv
from schematics.exceptions import DataError, BaseError

from reta.models.dtos.config_dto import RunConfigDTO
from reta.models.utils import ConfigError
from reta.utils import config_digest

logger = logging.getLogger(__name__)


class EnvironmentConfig:
    """ Base configuration class """

    load_dotenv(os.path.normpath(
        os.path.join(os.path.dirname(__file__), '..', 'reta.env')
    ))

    TESTING = False

    NCBI_API_KEY = os.getenv('RETA_NCBI_API_KEY', None)
    EMBED_API_KEY = os.getenv('RETA_EMBED_API_KEY', None)
    LLM_API_KEY = os.getenv('RETA_LLM_API_KEY', None)

    EUTILS_BASE = os.getenv('RETA_EUTILS_BASE', 'https://eutils.ncbi.nlm.nih.gov/entrez/eutils')
    EMBED_ENDPOINT = os.getenv('RETA_EMBED_ENDPOINT', 'https://api.openai.com/v1/embeddings')
    LLM_ENDPOINT = os.getenv('RETA_LLM_ENDPOINT', 'https://api.openai.com/v1/completions')

    LOG_LEVEL = os.getenv('RETA_LOG_LEVEL', 'INFO')


class TestConfig(EnvironmentConfig):
    TESTING = True
    NCBI_API_KEY = None
    EMBED_API_KEY = None
    LLM_API_KEY = None
    LOG_LEVEL = 'WARNING'


class RunConfig:
    """
    Validated run configuration plus the directory relative paths resolve against
    """

    def __init__(self, dto: RunConfigDTO, base_dir: str = '.'):
        self.dto = dto
        self.base_dir = base_dir

    def __getattr__(self, name):
        # sections (corpus, segmenter, ...) read straight through to the DTO
        return getattr(self.__dict__['dto'], name)

    @property
    def digest(self) -> str:
        return config_digest(self.dto.to_primitive())

    def path(self, name: str):
        """ Resolve one of the `paths` entries, None when unset """

        value = self.dto.paths[name]
        if value is None:
            return None
        return os.path.normpath(os.path.join(self.base_dir, value))

    def to_primitive(self) -> dict:
        return self.dto.to_primitive()


def build_run_config(raw: dict, overrides: dict = None, base_dir: str = '.') -> RunConfig:
    """
    Validate a raw config mapping, applying command line overrides first
    :raises ConfigError
    """

    raw = dict(raw or {})
    for section in ('corpus', 'segmenter', 'embedding', 'retrieval', 'llm', 'paths'):
        raw[section] = dict(raw.get(section) or {})

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        if '.' in dotted:
            section, key = dotted.split('.', 1)
            raw[section][key] = value
        else:
            raw[dotted] = value

    try:
        dto = RunConfigDTO(raw)
        dto.validate()
    except (DataError, BaseError) as e:
        raise ConfigError(f'invalid config: {e}')

    if dto.segmenter.overlap >= dto.segmenter.max_tokens:
        raise ConfigError('invalid config: segmenter.overlap must be smaller than segmenter.max_tokens')

    try:
        re.compile(dto.llm.refusal_pattern)
    except re.error as e:
        raise ConfigError(f'invalid config: llm.refusal_pattern: {e}')

    return RunConfig(dto, base_dir)


def load_run_config(path: str = None, overrides: dict = None) -> RunConfig:
    """
    Load a YAML run config. Without a path the built-in defaults are used.
    :raises ConfigError
    """

    if path is None:
        return build_run_config({}, overrides)

    if not os.path.exists(path):
        raise ConfigError(f'config file {path} not found')

    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f'{path}: {e}')

    if not isinstance(raw, dict):
        raise ConfigError(f'{path}: top level must be a mapping')

    config = build_run_config(raw, overrides, os.path.dirname(os.path.abspath(path)))
    logger.debug('loaded config %s (digest %s)', path, config.digest)
    return config
