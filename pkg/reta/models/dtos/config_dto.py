from schematics import Model
from schematics.types import StringType, IntType, FloatType, BooleanType, ListType, ModelType

TOKENIZERS = ['regex', 'tiktoken']
EMBEDDING_PROVIDERS = ['deterministic', 'openai']
LLM_PROVIDERS = ['mock', 'openai']

DEFAULT_QUERIES = [
    'diffuse large b-cell lymphoma',
    'follicular lymphoma',
    'epcoritamab',
    'glofitamab',
    'minimal residual disease',
    'ctDNA',
]

DEFAULT_EXCLUDED_ELEMENTS = [
    'fig', 'fig-group', 'table-wrap', 'table-wrap-group', 'ref-list', 'ack', 'fn-group', 'glossary'
]

DEFAULT_EXCLUDED_SECTIONS = [
    'author contribution', 'authors contribution', 'authors\' contribution',
    'conflict of interest', 'conflicts of interest', 'competing interest',
    'disclosure', 'declaration of interest', 'funding', 'acknowledg',
]


class CorpusSection(Model):
    queries = ListType(StringType(min_length=1), default=lambda: list(DEFAULT_QUERIES))
    retmax = IntType(min_value=0, default=500)
    excluded_elements = ListType(StringType, default=lambda: list(DEFAULT_EXCLUDED_ELEMENTS))
    excluded_sections = ListType(StringType, default=lambda: list(DEFAULT_EXCLUDED_SECTIONS))
    requests_per_second = FloatType(min_value=0.1, default=3.0)
    fetch_workers = IntType(min_value=1, default=3)
    max_tries = IntType(min_value=1, default=5)


class SegmenterSection(Model):
    tokenizer = StringType(choices=TOKENIZERS, default='regex')
    max_tokens = IntType(min_value=1, default=4000)
    overlap = IntType(min_value=0, default=0)


class EmbeddingSection(Model):
    provider = StringType(choices=EMBEDDING_PROVIDERS, default='deterministic')
    dim = IntType(min_value=1, default=256)
    model = StringType(default='text-embedding-ada-002')


class RetrievalSection(Model):
    k = IntType(min_value=1, default=4)


class LLMSection(Model):
    """ Decoding defaults favour reproducibility: temperature 0, bounded completions """

    provider = StringType(choices=LLM_PROVIDERS, default='mock')
    model = StringType(default='text-davinci-003')
    temperature = FloatType(min_value=0.0, default=0.0)
    max_tokens = IntType(min_value=1, default=512)
    context_window = IntType(min_value=1, default=4097)
    refusal_pattern = StringType(default='do not know')
    drop_refusals = BooleanType(default=True)
    fallback_text = StringType(default='Not found in corpus.')
    workers = IntType(min_value=1, default=4)


class PathsSection(Model):
    corpus = StringType(default='build/corpus')
    index = StringType(default='build/index.bin')
    audit_log = StringType(default='build/audit.jsonl')
    scores = StringType()
    annotations = StringType()
    reports = StringType(default='build/reports')
    fixtures = StringType()


class RunConfigDTO(Model):
    """ Describes a reproducible run: every parameter of ingest, index, ask and eval """

    corpus = ModelType(CorpusSection, required=True)
    segmenter = ModelType(SegmenterSection, required=True)
    embedding = ModelType(EmbeddingSection, required=True)
    retrieval = ModelType(RetrievalSection, required=True)
    llm = ModelType(LLMSection, required=True)
    paths = ModelType(PathsSection, required=True)
    live = BooleanType(default=False)
