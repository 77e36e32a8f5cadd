import logging
from typing import NamedTuple

__version__ = '0.1.0'

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level: str = None):
    """ Root logging for the command line; library use leaves logging alone """

    from reta.config import EnvironmentConfig

    level = (level or EnvironmentConfig.LOG_LEVEL or 'INFO').upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)


class Pipeline(NamedTuple):
    """ Providers wired for one run config """

    config: object
    tokenizer: object
    embedder: object
    llm: object


def create_pipeline(config, transport=None) -> Pipeline:
    """
    Build the tokenizer and providers a run config names
    :raises ConfigError for unknown or ungated providers
    """

    from reta.services.embedding_service import get_embedding_provider
    from reta.services.segment_service import get_tokenizer
    from reta.services.synthesis_service import get_llm_provider

    return Pipeline(
        config,
        get_tokenizer(config.segmenter.tokenizer),
        get_embedding_provider(config, transport),
        get_llm_provider(config, transport)
    )
