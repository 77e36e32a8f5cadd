import json

from reta.models.dtos.corpus_dto import CorpusQueryDTO
from reta.models.utils import ArticleNotFound, ParseError, PreconditionError, RateLimitError, \
    RetryableTransportError
from reta.services.api_client import TransportResponse
from reta.services.entrez_client import EntrezClient, FixtureTransport, RateLimiter, normalize_pmc_id
from reta.tests.base import BaseTestCase
from reta.tests.fixtures import jats, write_entrez_tree


class ScriptedTransport(object):
    """ Answers GETs from a list of canned responses, in order """

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def get(self, url, params):
        self.requests.append((url, dict(params)))
        response = self.responses.pop(0)
        if isinstance(response, Exception):
            raise response
        return response


def esearch(ids):
    return TransportResponse(200, json.dumps({'esearchresult': {'idlist': ids}}).encode(), {})


def client(transport, **kwargs):
    kwargs.setdefault('requests_per_second', 1000.0)
    kwargs.setdefault('backoff_factor', 0)
    return EntrezClient(transport, base_url='https://eutils.test/entrez/eutils', sleep=lambda s: None, **kwargs)


class EntrezClientTest(BaseTestCase):
    def test_search_returns_prefixed_ids_in_service_order(self):
        transport = ScriptedTransport([esearch(['3', '1', '2'])])
        ids = client(transport).search_pmc(CorpusQueryDTO({'text': 'glofitamab', 'retmax': 10}))

        assert ids == ['PMC3', 'PMC1', 'PMC2']
        url, params = transport.requests[0]
        assert url.endswith('/esearch.fcgi')
        assert params['db'] == 'pmc'
        assert params['retmax'] == 10

    def test_search_caps_at_retmax(self):
        transport = ScriptedTransport([esearch([str(i) for i in range(600)])])
        ids = client(transport).search_pmc(CorpusQueryDTO({'text': 'ctDNA', 'retmax': 500}))

        assert len(ids) == 500
        assert ids[0] == 'PMC0'

    def test_search_with_zero_retmax_skips_the_request(self):
        transport = ScriptedTransport([])
        assert client(transport).search_pmc(CorpusQueryDTO({'text': 'x', 'retmax': 0})) == []
        assert transport.requests == []

    def test_search_without_idlist_is_a_parse_error(self):
        transport = ScriptedTransport([TransportResponse(200, b'{"esearchresult": {}}', {})])
        try:
            client(transport).search_pmc(CorpusQueryDTO({'text': 'x'}))
            assert False, 'expected ParseError'
        except ParseError as e:
            assert e.field == 'esearchresult.idlist'

    def test_search_with_html_body_is_a_parse_error(self):
        transport = ScriptedTransport([TransportResponse(200, b'<html>maintenance</html>', {})])
        with self.assertRaises(ParseError):
            client(transport).search_pmc(CorpusQueryDTO({'text': 'x'}))

    def test_fetch_empty_id_is_a_precondition_error(self):
        with self.assertRaises(PreconditionError):
            client(ScriptedTransport([])).fetch_article('  ')

    def test_fetch_missing_article(self):
        with self.assertRaises(ArticleNotFound):
            client(ScriptedTransport([TransportResponse(404, b'', {})])).fetch_article('PMC1')

    def test_fetch_inline_error_is_not_found(self):
        body = b'<?xml version="1.0"?><pmc-articleset><error>ID list is empty!</error></pmc-articleset>'
        with self.assertRaises(ArticleNotFound):
            client(ScriptedTransport([TransportResponse(200, body, {})])).fetch_article('PMC1')

    def test_fetch_returns_raw_bytes(self):
        xml = jats('PMC7', 'T', 'A', ['P'])
        raw = client(ScriptedTransport([TransportResponse(200, xml, {})])).fetch_article('7')

        assert raw.pmc_id == 'PMC7'
        assert raw.xml == xml

    def test_server_errors_are_retried(self):
        xml = jats('PMC7', 'T', 'A', ['P'])
        transport = ScriptedTransport([
            TransportResponse(503, b'', {}),
            RetryableTransportError('connection reset'),
            TransportResponse(200, xml, {}),
        ])
        raw = client(transport, max_tries=3).fetch_article('PMC7')

        assert raw.xml == xml
        assert len(transport.requests) == 3

    def test_rate_limit_exhaustion_reports_attempts(self):
        transport = ScriptedTransport([TransportResponse(429, b'', {'Retry-After': '0'})] * 3)
        try:
            client(transport, max_tries=3).fetch_article('PMC7')
            assert False, 'expected RateLimitError'
        except RateLimitError as e:
            assert e.attempts == 3
            assert e.exit_code == 3

    def test_retry_after_is_honoured(self):
        slept = []
        transport = ScriptedTransport([
            TransportResponse(429, b'', {'Retry-After': '2'}),
            TransportResponse(200, jats('PMC7', 'T', 'A', ['P']), {}),
        ])
        c = EntrezClient(transport, base_url='https://eutils.test', requests_per_second=1000.0,
                         backoff_factor=0, sleep=slept.append)
        c.fetch_article('PMC7')

        assert 2.0 in slept

    def test_api_key_is_sent(self):
        transport = ScriptedTransport([esearch([])])
        client(transport, api_key='secret').search_pmc(CorpusQueryDTO({'text': 'x'}))

        assert transport.requests[0][1]['api_key'] == 'secret'


class FixtureTransportTest(BaseTestCase):
    def test_serves_recorded_responses(self):
        root = write_entrez_tree(self.tmp, {'Follicular Lymphoma': ['PMC5']}, {'PMC5': jats('PMC5', 'T', 'A', ['P'])})
        c = client(FixtureTransport(root))

        assert c.search_pmc(CorpusQueryDTO({'text': 'Follicular Lymphoma'})) == ['PMC5']
        assert c.fetch_article('PMC5').pmc_id == 'PMC5'

    def test_unknown_article_is_not_found(self):
        c = client(FixtureTransport(write_entrez_tree(self.tmp, {}, {})))
        with self.assertRaises(ArticleNotFound):
            c.fetch_article('PMC404')


class RateLimiterTest(BaseTestCase):
    def test_spaces_calls(self):
        now = [0.0]
        slept = []

        def sleep(seconds):
            slept.append(seconds)
            now[0] += seconds

        limiter = RateLimiter(4.0, clock=lambda: now[0], sleep=sleep)
        for _ in range(3):
            limiter.wait()

        assert slept == [0.25, 0.25]

    def test_normalize_pmc_id(self):
        assert normalize_pmc_id('123') == 'PMC123'
        assert normalize_pmc_id('pmc123') == 'PMC123'
        assert normalize_pmc_id(' PMC123 ') == 'PMC123'
