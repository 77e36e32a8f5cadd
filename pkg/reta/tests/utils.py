import numpy as np

from reta.models.dtos.corpus_dto import DocumentDTO
from reta.models.embedding_store import EmbeddingRecord, EmbeddingStore
from reta.services.embedding_service import EmbeddingService, HashingEmbeddingProvider
from reta.services.segment_service import RegexTokenizer, SegmentService
from reta.tests.fixtures import planted_documents
from reta.utils import text_digest


def planted_store(dim: int = 256) -> EmbeddingStore:
    """ Indexed planted-fact corpus: one segment per document """

    tokenizer = RegexTokenizer()
    segments = []
    for pmc_id, title, body in planted_documents():
        document = DocumentDTO({'pmc_id': pmc_id, 'title': title, 'body': body})
        segments.extend(SegmentService.segment_document(document, tokenizer))

    return EmbeddingService.index_segments(segments, HashingEmbeddingProvider(dim))


def random_store(rng: np.random.Generator, n: int, dim: int, provider: str = 'random') -> EmbeddingStore:
    store = EmbeddingStore(dim, provider)
    for i in range(n):
        vector = rng.standard_normal(dim).astype(np.float32)
        pmc_id = f'PMC{rng.integers(1, 50)}'
        store.upsert(EmbeddingRecord(pmc_id, i, vector, provider, text_digest(f'{pmc_id}-{i}')))
    return store


def oracle_top_k(store: EmbeddingStore, query, k: int):
    """ Score every record, sort by (-score, key) """

    scored = [
        (EmbeddingService.cosine(store.get(key).vector, query), key)
        for key in store.keys()
    ]
    scored.sort(key=lambda item: (-item[0], item[1]))
    return scored[:k]
