import math

import numpy as np

from reta.models.embedding_store import EmbeddingRecord, EmbeddingStore
from reta.models.utils import ConfigError, DimensionMismatchError, PreconditionError, ProviderError
from reta.services.api_client import TransportResponse
from reta.services.embedding_service import EmbeddingProvider, EmbeddingService, HashingEmbeddingProvider, \
    OpenAIEmbeddingProvider, get_embedding_provider
from reta.tests.base import BaseTestCase
from reta.tests.factories import SegmentFactory
from reta.tests.utils import oracle_top_k, random_store
from reta.utils import text_digest


class StubPost(object):
    def __init__(self, status, body):
        self.status = status
        self.body = body
        self.payloads = []

    def post(self, url, payload, headers):
        self.payloads.append(payload)
        return TransportResponse(self.status, self.body, {})


class ShortProvider(EmbeddingProvider):
    name = 'short'
    dim = 8

    def embed_text(self, text):
        return np.ones(4, dtype=np.float32)


def store_of(vectors, provider='test'):
    store = EmbeddingStore(len(vectors[0][1]), provider)
    for key, vector in vectors:
        store.upsert(EmbeddingRecord(key[0], key[1], vector, provider, text_digest(str(key))))
    return store


class CosineTest(BaseTestCase):
    def test_known_values(self):
        assert math.isclose(EmbeddingService.cosine([1, 0], [1, 1]), 1 / math.sqrt(2), rel_tol=1e-12)
        assert math.isclose(EmbeddingService.cosine([1, 2, 3], [2, 4, 6]), 1.0, rel_tol=1e-12)
        assert EmbeddingService.cosine([1, 0], [-1, 0]) == -1.0
        assert EmbeddingService.cosine([1, 0], [0, 1]) == 0.0

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            u, v = rng.standard_normal(16), rng.standard_normal(16)
            score = EmbeddingService.cosine(u, v)
            assert score == EmbeddingService.cosine(v, u)
            assert -1.0 <= score <= 1.0

    def test_zero_vector(self):
        with self.assertRaises(PreconditionError):
            EmbeddingService.cosine([0, 0], [1, 0])

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            EmbeddingService.cosine([1, 0, 0], [1, 0])


class TopKTest(BaseTestCase):
    def test_matches_brute_force(self):
        rng = np.random.default_rng(1234)
        for trial in range(100):
            store = random_store(rng, n=int(rng.integers(1, 1001)), dim=256)
            query = rng.standard_normal(256)
            expected = oracle_top_k(store, query, len(store))
            for k in (1, 4, 10, len(store)):
                got = EmbeddingService.top_k(store, query, k)

                assert [r.segment.key for r in got] == [key for _, key in expected[:k]]
                for r, (score, _) in zip(got, expected):
                    assert abs(r.score - score) <= 1e-12

    def test_scores_are_non_increasing(self):
        rng = np.random.default_rng(5)
        store = random_store(rng, n=40, dim=16)
        scores = [r.score for r in EmbeddingService.top_k(store, rng.standard_normal(16), 10)]

        assert scores == sorted(scores, reverse=True)

    def test_scaling_the_query_does_not_change_the_ranking(self):
        rng = np.random.default_rng(99)
        store = random_store(rng, n=30, dim=16)
        query = rng.standard_normal(16)
        baseline = [r.segment.key for r in EmbeddingService.top_k(store, query, 4)]

        for power in (-8, -1, 1, 8):
            scaled = [r.segment.key for r in EmbeddingService.top_k(store, query * 2.0 ** power, 4)]
            assert scaled == baseline

    def test_scaling_a_stored_vector_does_not_change_the_result(self):
        rng = np.random.default_rng(99)
        store = random_store(rng, n=30, dim=16)
        query = rng.standard_normal(16)
        baseline = EmbeddingService.top_k(store, query, 4)

        for power in (-8, -1, 1, 8):
            for key in [baseline[0].segment.key, store.keys()[-1]]:
                stored = store.get(key)
                store.upsert(EmbeddingRecord(key[0], key[1], stored.vector * np.float32(2.0 ** power),
                                             stored.provider_name, stored.text_hash))
                scaled = EmbeddingService.top_k(store, query, 4)
                store.upsert(stored)

                assert [r.segment.key for r in scaled] == [r.segment.key for r in baseline]
                for r, b in zip(scaled, baseline):
                    assert abs(r.score - b.score) <= 1e-12

    def test_ties_break_by_ascending_key(self):
        v = np.array([1.0, 0.0], dtype=np.float32)
        store = store_of([(('PMC2', 0), v), (('PMC1', 1), v), (('PMC1', 0), v), (('PMC3', 0), -v)])

        keys = [r.segment.key for r in EmbeddingService.top_k(store, [1.0, 0.0], 3)]

        assert keys == [('PMC1', 0), ('PMC1', 1), ('PMC2', 0)]

    def test_undersized_store_returns_everything(self):
        rng = np.random.default_rng(3)
        store = random_store(rng, n=3, dim=8)

        assert len(EmbeddingService.top_k(store, rng.standard_normal(8), 10)) == 3

    def test_empty_store(self):
        assert EmbeddingService.top_k(EmbeddingStore(8), np.ones(8), 4) == []

    def test_invalid_arguments(self):
        store = random_store(np.random.default_rng(0), n=5, dim=8)

        with self.assertRaises(PreconditionError):
            EmbeddingService.top_k(store, np.ones(8), 0)
        with self.assertRaises(PreconditionError):
            EmbeddingService.top_k(store, np.zeros(8), 2)
        with self.assertRaises(DimensionMismatchError):
            EmbeddingService.top_k(store, np.ones(9), 2)

    def test_sees_records_added_after_a_query(self):
        v = np.array([1.0, 0.0], dtype=np.float32)
        store = store_of([(('PMC2', 0), v)])
        EmbeddingService.top_k(store, v, 1)
        store.upsert(EmbeddingRecord('PMC1', 0, v, 'test', text_digest('x')))

        assert EmbeddingService.top_k(store, v, 1)[0].segment.key == ('PMC1', 0)


class HashingProviderTest(BaseTestCase):
    def test_deterministic_and_unit_length(self):
        provider = HashingEmbeddingProvider(256)
        first = EmbeddingService.embed('Glofitamab in relapsed DLBCL', provider)
        second = EmbeddingService.embed('Glofitamab in relapsed DLBCL', HashingEmbeddingProvider(256))

        assert first.dtype == np.float32
        assert first.shape == (256,)
        assert first.tobytes() == second.tobytes()
        assert math.isclose(float(np.linalg.norm(first)), 1.0, rel_tol=1e-6)

    def test_case_insensitive(self):
        provider = HashingEmbeddingProvider(64)

        assert EmbeddingService.embed('ORR', provider).tobytes() == EmbeddingService.embed('orr', provider).tobytes()

    def test_related_texts_score_higher(self):
        provider = HashingEmbeddingProvider(256)
        query = EmbeddingService.embed('glofitamab response rate', provider)
        related = EmbeddingService.embed('the response rate of glofitamab was high', provider)
        unrelated = EmbeddingService.embed('zebrafish husbandry notes', provider)

        assert EmbeddingService.cosine(query, related) > EmbeddingService.cosine(query, unrelated)

    def test_empty_text(self):
        with self.assertRaises(PreconditionError):
            EmbeddingService.embed('   ', HashingEmbeddingProvider())

    def test_declared_dim_is_enforced(self):
        with self.assertRaises(DimensionMismatchError):
            EmbeddingService.embed('text', ShortProvider())

    def test_index_segments(self):
        segments = SegmentFactory.build_batch(5)
        store = EmbeddingService.index_segments(segments, HashingEmbeddingProvider(32))

        assert len(store) == 5
        assert store.provider_name == 'deterministic'
        for segment in segments:
            assert store.segment(segment.key) == segment
            assert store.get(segment.key).text_hash == text_digest(segment.text)


class ProviderFactoryTest(BaseTestCase):
    def test_offline_default(self):
        provider = get_embedding_provider(self.run_config())

        assert provider.name == 'deterministic'
        assert provider.dim == 256

    def test_network_provider_needs_live(self):
        with self.assertRaises(ConfigError):
            get_embedding_provider(self.run_config(embedding={'provider': 'openai'}))

    def test_openai_response_is_parsed(self):
        transport = StubPost(200, b'{"data": [{"embedding": [0.5, 0.5, 0.0]}]}')
        provider = OpenAIEmbeddingProvider('m', dim=3, transport=transport, endpoint='https://embed.test',
                                           api_key='k')

        vector = EmbeddingService.embed('hello', provider)

        assert vector.tolist() == [0.5, 0.5, 0.0]
        assert transport.payloads[0] == {'model': 'm', 'input': 'hello'}

    def test_openai_malformed_response(self):
        transport = StubPost(200, b'{"data": []}')
        provider = OpenAIEmbeddingProvider('m', dim=3, transport=transport, endpoint='https://embed.test',
                                           api_key='k')

        with self.assertRaises(ProviderError):
            provider.embed_text('hello')

