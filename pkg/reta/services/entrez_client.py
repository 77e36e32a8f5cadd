"""
Entrez E-utilities client for PubMed Central.

Requests go through an injectable transport so the same client talks to the
live service or to a directory of recorded responses.
"""
import json
import logging
import os
import threading
import time
from typing import List

from reta.config import EnvironmentConfig
from reta.models.custom_types import RawArticle
from reta.models.dtos.corpus_dto import CorpusQueryDTO
from reta.models.utils import ArticleNotFound, ParseError, PreconditionError, TransportError
from reta.services.api_client import TransportResponse, raise_for_retryable, with_retries
from reta.utils import slugify

logger = logging.getLogger(__name__)


class FixtureTransport(object):
    """
    Serves recorded Entrez responses from a directory:

        <root>/esearch/<slug of term>.json
        <root>/efetch/<PMC id>.xml

    A missing file answers 404.
    """

    def __init__(self, root: str):
        super(FixtureTransport, self).__init__()

        self.root = root
        self.requests = []

    def get(self, url: str, params: dict) -> TransportResponse:
        self.requests.append((url, dict(params)))
        endpoint = url.rstrip('/').rsplit('/', 1)[-1]

        if endpoint == 'esearch.fcgi':
            path = os.path.join(self.root, 'esearch', slugify(params['term']) + '.json')
        elif endpoint == 'efetch.fcgi':
            path = os.path.join(self.root, 'efetch', normalize_pmc_id(str(params['id'])) + '.xml')
        else:
            return TransportResponse(404, b'', {})

        if not os.path.exists(path):
            return TransportResponse(404, b'', {})

        with open(path, 'rb') as f:
            return TransportResponse(200, f.read(), {})


class RateLimiter(object):
    """ Spaces calls at least 1/per_second apart across threads """

    def __init__(self, per_second: float, clock=time.monotonic, sleep=time.sleep):
        super(RateLimiter, self).__init__()

        self.interval = 1.0 / per_second
        self.clock = clock
        self.sleep = sleep
        self._next = None
        self._lock = threading.Lock()

    def wait(self):
        with self._lock:
            now = self.clock()
            if self._next is not None and now < self._next:
                self.sleep(self._next - now)
                now = self._next
            self._next = now + self.interval


def normalize_pmc_id(pmc_id: str) -> str:
    """ esearch on db=pmc answers bare numbers; the corpus keys on PMC-prefixed ids """

    pmc_id = pmc_id.strip()
    if pmc_id.upper().startswith('PMC'):
        return 'PMC' + pmc_id[3:]
    return 'PMC' + pmc_id


class EntrezClient(object):
    """
    search_pmc / fetch_article against E-utilities, throttled and retried
    """

    def __init__(self, transport, base_url: str = None, api_key: str = None,
                 requests_per_second: float = 3.0, max_tries: int = 5, backoff_factor: float = 0.5,
                 sleep=time.sleep):
        super(EntrezClient, self).__init__()

        self.transport = transport
        self.base_url = (base_url or EnvironmentConfig.EUTILS_BASE).rstrip('/')
        self.api_key = api_key
        self.limiter = RateLimiter(requests_per_second, sleep=sleep)
        self._get = with_retries(self._get_once, 'entrez', max_tries, backoff_factor, sleep)

    def _get_once(self, endpoint: str, params: dict) -> TransportResponse:
        self.limiter.wait()

        params = dict(params)
        if self.api_key:
            params['api_key'] = self.api_key

        response = self.transport.get(f'{self.base_url}/{endpoint}', params)
        raise_for_retryable(response, endpoint)
        return response

    def search_pmc(self, query: CorpusQueryDTO) -> List[str]:
        """
        Ids matching a query, in service order, capped at retmax
        :raises RetryableTransportError, TransportError, ParseError
        """

        if query.retmax == 0:
            return []

        response = self._get('esearch.fcgi', {
            'db': 'pmc',
            'term': query.text,
            'retmax': query.retmax,
            'retmode': 'json'
        })

        if response.status_code != 200:
            raise TransportError(f'esearch for {query.text!r} returned HTTP {response.status_code}')

        try:
            data = json.loads(response.content.decode('utf-8'))
        except (UnicodeDecodeError, ValueError):
            raise ParseError('esearch response is not JSON', field='body')

        result = data.get('esearchresult') if isinstance(data, dict) else None
        if not isinstance(result, dict):
            raise ParseError('esearch response has no esearchresult', field='esearchresult')

        idlist = result.get('idlist')
        if not isinstance(idlist, list):
            raise ParseError('esearch response has no idlist', field='esearchresult.idlist')

        return [normalize_pmc_id(str(i)) for i in idlist[:query.retmax]]

    def fetch_article(self, pmc_id: str) -> RawArticle:
        """
        Full-text JATS payload for one article
        :raises PreconditionError, ArticleNotFound, RateLimitError, TransportError
        """

        if not pmc_id or not pmc_id.strip():
            raise PreconditionError('pmc_id must be non-empty')

        pmc_id = normalize_pmc_id(pmc_id)
        response = self._get('efetch.fcgi', {
            'db': 'pmc',
            'id': pmc_id[3:],
            'retmode': 'xml'
        })

        if response.status_code == 404 or not response.content.strip():
            raise ArticleNotFound(pmc_id)

        if response.status_code != 200:
            raise TransportError(f'efetch for {pmc_id} returned HTTP {response.status_code}')

        # efetch reports unknown ids inline with a 200
        head = response.content[:1024]
        if b'<error' in head and b'<article' not in response.content:
            raise ArticleNotFound(pmc_id)

        return RawArticle(pmc_id, response.content)
