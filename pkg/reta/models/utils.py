import datetime
import logging

logger = logging.getLogger(__name__)


class RetaError(Exception):
    """ Base exception for every error the pipeline reports to callers """

    exit_code = 1

    def __init__(self, message: str = None):
        super(RetaError, self).__init__(message or self.__doc__.strip())
        self.message = message or self.__doc__.strip()
        logger.debug('%s: %s', type(self).__name__, self.message)


class ConfigError(RetaError):
    """ Run configuration is missing or invalid """


class PreconditionError(RetaError, ValueError):
    """ An operation was called with arguments outside its contract """


class UsageError(RetaError):
    """ Command line usage error """


class DataIntegrityError(RetaError):
    """ Input or stored data failed an integrity check """

    exit_code = 2


class ParseError(DataIntegrityError):
    """ A payload could not be parsed """

    def __init__(self, message: str = None, field: str = None):
        super(ParseError, self).__init__(message)
        self.field = field


class ArticleNotFound(DataIntegrityError):
    """ Custom exception to indicate an article was not found in PMC """

    def __init__(self, pmc_id: str):
        super(ArticleNotFound, self).__init__(f'article {pmc_id} not found')
        self.pmc_id = pmc_id


class EmptyDocumentError(DataIntegrityError):
    """ Article has no usable prose after preprocessing """

    def __init__(self, pmc_id: str):
        super(EmptyDocumentError, self).__init__(f'article {pmc_id} has an empty body after filtering')
        self.pmc_id = pmc_id


class EmptyCorpusError(DataIntegrityError):
    """ Every query failed and the corpus is empty """

    def __init__(self, message: str = None, transport_failure: bool = False):
        super(EmptyCorpusError, self).__init__(message)
        self.transport_failure = transport_failure
        if transport_failure:
            self.exit_code = TransportError.exit_code


class StoreIntegrityError(DataIntegrityError):
    """ Embedding store file is corrupt """


class DimensionMismatchError(DataIntegrityError):
    """ Vector dimensions do not agree """


class CoverageError(DataIntegrityError):
    """ Scores do not cover every question """

    def __init__(self, message: str = None, missing: list = None):
        super(CoverageError, self).__init__(message)
        self.missing = missing or []


class UnresolvedConflictError(DataIntegrityError):
    """ Reviewers disagree and no adjudicator record exists """

    def __init__(self, message: str = None, reviewers: list = None):
        super(UnresolvedConflictError, self).__init__(message)
        self.reviewers = reviewers or []


class AssetIntegrityError(DataIntegrityError):
    """ A packaged asset is missing or corrupt """


class TransportError(RetaError):
    """ A remote service could not be reached """

    exit_code = 3


class RetryableTransportError(TransportError):
    """ Transient transport failure, safe to retry """

    def __init__(self, message: str = None, attempts: int = 1):
        super(RetryableTransportError, self).__init__(message)
        self.attempts = attempts


class RateLimitError(RetryableTransportError):
    """ The remote service asked us to slow down """

    def __init__(self, message: str = None, retry_after: float = None, attempts: int = 1):
        super(RateLimitError, self).__init__(message, attempts)
        self.retry_after = retry_after


class ProviderError(TransportError):
    """ An embedding or completion provider failed """


class PipelineError(TransportError):
    """ Question answering failed at a given stage """

    def __init__(self, message: str = None, stage: str = None, segment_key=None):
        super(PipelineError, self).__init__(message)
        self.stage = stage
        self.segment_key = segment_key


def timestamp():
    """ Used by the corpus manifest to stamp fetches """
    return datetime.datetime.utcnow().replace(microsecond=0)
