import hashlib
import logging
import re
from abc import ABC, abstractmethod
from typing import Iterable, List

import numpy as np

from reta.config import EnvironmentConfig
from reta.models.custom_types import RetrievedSegment, Segment
from reta.models.embedding_store import EmbeddingRecord, EmbeddingStore
from reta.models.utils import ConfigError, DimensionMismatchError, PreconditionError, ProviderError
from reta.services.api_client import JsonApiClient
from reta.utils import text_digest

logger = logging.getLogger(__name__)

WORD_PATTERN = re.compile(r'\w+|[^\w\s]')


class EmbeddingProvider(ABC):
    """ Turns text into a fixed-length vector """

    name = None
    dim = None

    @abstractmethod
    def embed_text(self, text: str) -> np.ndarray:
        pass


class HashingEmbeddingProvider(EmbeddingProvider):
    """
    Offline provider: lower-cased unigram counts hashed into `dim` buckets,
    unit-normalized. Identical text always yields identical vectors.
    """

    name = 'deterministic'

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ConfigError(f'embedding dim must be at least 1, got {dim}')
        self.dim = dim

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode('utf-8'), digest_size=8).digest()
        return int.from_bytes(digest, 'little') % self.dim

    def embed_text(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dim, dtype=np.float64)
        for token in WORD_PATTERN.findall(text.lower()):
            vector[self._bucket(token)] += 1.0

        norm = np.linalg.norm(vector)
        if norm == 0:
            raise PreconditionError('text has no tokens to embed')
        return (vector / norm).astype(np.float32)


class OpenAIEmbeddingProvider(EmbeddingProvider):
    """ OpenAI-compatible /embeddings endpoint """

    name = 'openai'

    def __init__(self, model: str = 'text-embedding-ada-002', dim: int = 1536, transport=None,
                 endpoint: str = None, api_key: str = None):
        self.model = model
        self.dim = dim
        self.client = JsonApiClient(
            endpoint or EnvironmentConfig.EMBED_ENDPOINT,
            api_key or EnvironmentConfig.EMBED_API_KEY,
            'RETA_EMBED_API_KEY',
            transport=transport
        )

    def embed_text(self, text: str) -> np.ndarray:
        data = self.client.post({'model': self.model, 'input': text})

        try:
            vector = np.asarray(data['data'][0]['embedding'], dtype=np.float32)
        except (KeyError, IndexError, TypeError, ValueError):
            raise ProviderError('embedding response has no data[0].embedding')

        return vector


def get_embedding_provider(config, transport=None) -> EmbeddingProvider:
    """
    Provider named by the run config
    :raises ConfigError
    """

    section = config.embedding
    if section.provider == HashingEmbeddingProvider.name:
        return HashingEmbeddingProvider(section.dim)

    if section.provider == OpenAIEmbeddingProvider.name:
        if not config.live:
            raise ConfigError('the openai embedding provider needs --live')
        return OpenAIEmbeddingProvider(section.model, section.dim, transport=transport)

    raise ConfigError(f'unknown embedding provider {section.provider!r}')


class EmbeddingService():
    @staticmethod
    def embed(text: str, provider: EmbeddingProvider) -> np.ndarray:
        """
        Embed one text
        :raises PreconditionError on empty text, DimensionMismatchError, TransportError
        """

        if not text or not text.strip():
            raise PreconditionError('cannot embed empty text')

        vector = np.asarray(provider.embed_text(text), dtype=np.float32)
        if vector.ndim != 1 or vector.shape[0] != provider.dim:
            raise DimensionMismatchError(
                f'{provider.name} returned {vector.shape} for a declared dim of {provider.dim}')
        if not np.all(np.isfinite(vector)):
            raise ProviderError(f'{provider.name} returned non-finite components')

        return vector

    @staticmethod
    def cosine(u, v) -> float:
        """
        dot(u, v) / (|u| |v|), clipped to [-1, 1]
        :raises DimensionMismatchError, PreconditionError
        """

        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        if u.shape != v.shape:
            raise DimensionMismatchError(f'cannot compare vectors of shape {u.shape} and {v.shape}')

        nu = np.linalg.norm(u)
        nv = np.linalg.norm(v)
        if nu == 0 or nv == 0:
            raise PreconditionError('cosine of a zero-norm vector is undefined')

        return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))

    @staticmethod
    def top_k(store: EmbeddingStore, query_vec, k: int) -> List[RetrievedSegment]:
        """
        Exhaustive cosine scan: the k best segments, best first, ties by ascending key
        :params store, query_vec, k

        :raises PreconditionError, DimensionMismatchError
        :returns list of RetrievedSegment, at most k long
        """

        if k < 1:
            raise PreconditionError(f'k must be at least 1, got {k}')
        if len(store) == 0:
            return []

        q = np.asarray(query_vec, dtype=np.float64)
        if q.ndim != 1 or q.shape[0] != store.dim:
            raise DimensionMismatchError(f'query dim {q.shape[-1]} does not match store dim {store.dim}')

        qn = np.linalg.norm(q)
        if qn == 0:
            raise PreconditionError('query vector has zero norm')

        keys, matrix, norms = store.snapshot()
        scores = np.clip((matrix @ q) / (norms * qn), -1.0, 1.0)

        # keys are sorted, so position breaks ties by ascending key
        order = np.lexsort((np.arange(len(keys)), -scores))[:k]

        return [RetrievedSegment(store.segment(keys[i]), float(scores[i])) for i in order]

    @staticmethod
    def index_segments(segments: Iterable[Segment], provider: EmbeddingProvider,
                       store: EmbeddingStore = None) -> EmbeddingStore:
        """ Embed and upsert every segment; returns the (new or given) store """

        if store is None:
            store = EmbeddingStore(provider.dim, provider.name)

        for segment in segments:
            vector = EmbeddingService.embed(segment.text, provider)
            record = EmbeddingRecord(segment.pmc_id, segment.index, vector, provider.name,
                                     text_digest(segment.text))
            store.upsert(record, segment)

        logger.info('store holds %d records (dim %s, provider %s)', len(store), store.dim, store.provider_name)
        return store
