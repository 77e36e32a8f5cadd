import json
import logging
import sys
import time
from typing import Dict, NamedTuple

import backoff
import requests

from reta.models.utils import ConfigError, ProviderError, RateLimitError, RetryableTransportError

logger = logging.getLogger(__name__)


class TransportResponse(NamedTuple):
    status_code: int
    content: bytes
    headers: Dict[str, str]


class HttpTransport(object):
    """ Live transport backed by a requests session """

    def __init__(self, session: requests.Session = None, timeout: float = 30.0):
        super(HttpTransport, self).__init__()

        self.session = session or requests.Session()
        self.timeout = timeout

    def get(self, url: str, params: dict) -> TransportResponse:
        try:
            r = self.session.get(url, params=params, timeout=self.timeout)
        except requests.RequestException as e:
            raise RetryableTransportError(f'GET {url} failed: {e}')

        return TransportResponse(r.status_code, r.content, dict(r.headers))

    def post(self, url: str, payload: dict, headers: dict = None) -> TransportResponse:
        try:
            r = self.session.post(url, json=payload, headers=headers, timeout=self.timeout)
        except requests.RequestException as e:
            raise RetryableTransportError(f'POST {url} failed: {e}')

        return TransportResponse(r.status_code, r.content, dict(r.headers))


def raise_for_retryable(response: TransportResponse, what: str):
    """ 429 and 5xx answers become retryable errors """

    if response.status_code == 429:
        retry_after = response.headers.get('Retry-After')
        try:
            retry_after = float(retry_after) if retry_after is not None else None
        except ValueError:
            retry_after = None
        raise RateLimitError(f'{what} rate limited', retry_after=retry_after)

    if response.status_code >= 500:
        raise RetryableTransportError(f'{what} returned HTTP {response.status_code}')


def with_retries(func, name: str, max_tries: int = 5, factor: float = 0.5, sleep=time.sleep):
    """
    Wrap func with exponential backoff on retryable transport errors.
    Retry-After is honoured as a floor; the final error carries the attempt count.
    """

    def on_backoff(details):
        e = details.get('exception') or sys.exc_info()[1]
        logger.warning('%s retry %d after %s', name, details['tries'], e)

        if isinstance(e, RateLimitError) and e.retry_after:
            extra = e.retry_after - details.get('wait', 0)
            if extra > 0:
                sleep(extra)

    def on_giveup(details):
        e = details.get('exception') or sys.exc_info()[1]
        if isinstance(e, RetryableTransportError):
            e.attempts = details['tries']
        logger.error('%s gave up after %d attempts: %s', name, details['tries'], e)

    return backoff.on_exception(
        backoff.expo,
        RetryableTransportError,
        max_tries=max_tries,
        factor=factor,
        jitter=None,
        on_backoff=on_backoff,
        on_giveup=on_giveup
    )(func)


class JsonApiClient(object):
    """ Bearer-authenticated JSON POST client used by the live providers """

    def __init__(self, endpoint: str, api_key: str, key_name: str, transport=None,
                 max_tries: int = 5, backoff_factor: float = 0.5):
        super(JsonApiClient, self).__init__()

        if not api_key:
            raise ConfigError(f'{key_name} is not set')

        self.endpoint = endpoint
        self.api_key = api_key
        self.transport = transport or HttpTransport()
        self.post = with_retries(self._post_once, endpoint, max_tries, backoff_factor)

    def _post_once(self, payload: dict) -> dict:
        response = self.transport.post(self.endpoint, payload, {
            'Authorization': f'Bearer {self.api_key}',
            'Content-Type': 'application/json'
        })

        raise_for_retryable(response, self.endpoint)
        if response.status_code != 200:
            raise ProviderError(f'{self.endpoint} returned HTTP {response.status_code}')

        try:
            return json.loads(response.content.decode('utf-8'))
        except (UnicodeDecodeError, ValueError):
            raise ProviderError(f'{self.endpoint} answered with invalid JSON')
