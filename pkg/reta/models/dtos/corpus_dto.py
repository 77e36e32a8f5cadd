from schematics import Model
from schematics.transforms import blacklist
from schematics.types import StringType, IntType, DateTimeType, ListType, DictType


class CorpusQueryDTO(Model):
    """ Describes one Entrez search against PMC """

    text = StringType(required=True, min_length=1)
    retmax = IntType(required=True, min_value=0, default=500)


class DocumentDTO(Model):
    """ Describes a preprocessed full-text article """

    pmc_id = StringType(required=True, min_length=1)
    title = StringType(default='')
    body = StringType(required=True, min_length=1)
    source_queries = ListType(StringType, default=list)
    fetched = DateTimeType()
    byte_length = IntType(min_value=0)

    class Options:
        roles = {
            'corpus': blacklist('fetched', 'byte_length'),
            'manifest': blacklist('body'),
        }


class QueryManifestDTO(Model):
    """ Describes the outcome of one corpus query

        hits - ids returned by esearch after the retmax cap
        fetched - articles that made it into the corpus
        skipped - {pmc_id, error, kind} for articles that did not
    """

    query = StringType(required=True)
    retmax = IntType(required=True)
    hits = IntType(default=0)
    fetched = IntType(default=0)
    skipped = ListType(DictType(StringType), default=list)
    error = StringType()
    error_kind = StringType(choices=['transport', 'data'])
    started = DateTimeType()
    finished = DateTimeType()
