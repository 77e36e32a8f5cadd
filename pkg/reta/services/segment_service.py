import logging
import re
from abc import ABC, abstractmethod
from typing import List, Tuple

from reta.models.custom_types import Segment
from reta.models.dtos.corpus_dto import DocumentDTO
from reta.models.utils import ConfigError, EmptyDocumentError, PreconditionError

logger = logging.getLogger(__name__)

TOKEN_PATTERN = re.compile(r'\w+|[^\w\s]')


class Tokenizer(ABC):
    """
    Deterministic tokenizer contract. `normalize` is the whitespace normal form
    the tokenizer promises to reproduce; `separator` joins consecutive
    segment texts back into that normal form. `spans` gives the character
    range of every token so segments can be cut from the original text.
    """

    name = None
    separator = ' '

    @abstractmethod
    def tokenize(self, text: str) -> list:
        pass

    @abstractmethod
    def token_to_text(self, tokens: list) -> str:
        pass

    @abstractmethod
    def spans(self, text: str) -> List[Tuple[int, int]]:
        pass

    def normalize(self, text: str) -> str:
        return self.token_to_text(self.tokenize(text))

    def truncate(self, text: str, n_tokens: int) -> str:
        """ Prefix of `text` holding its first `n_tokens` tokens, original spacing kept """

        spans = self.spans(text)
        if n_tokens >= len(spans):
            return text
        if n_tokens < 1:
            return ''
        return text[:spans[n_tokens - 1][1]]


class RegexTokenizer(Tokenizer):
    """ Splits on whitespace and detaches every punctuation character """

    name = 'regex'
    separator = ' '

    def tokenize(self, text: str) -> List[str]:
        return TOKEN_PATTERN.findall(text)

    def token_to_text(self, tokens: List[str]) -> str:
        return ' '.join(tokens)

    def spans(self, text: str) -> List[Tuple[int, int]]:
        return [m.span() for m in TOKEN_PATTERN.finditer(text)]


class TiktokenTokenizer(Tokenizer):
    """ Byte-pair tokens of a model's encoding, for parity with live runs """

    name = 'tiktoken'
    separator = ''

    def __init__(self, encoding: str = 'cl100k_base', model: str = None):
        try:
            import tiktoken
        except ImportError:
            raise ConfigError('the tiktoken tokenizer needs the bpe extra: pip install reta[bpe]')

        if model:
            try:
                self.encoding = tiktoken.encoding_for_model(model)
                return
            except KeyError:
                logger.warning('no known encoding for model %s, using %s', model, encoding)
        self.encoding = tiktoken.get_encoding(encoding)

    def tokenize(self, text: str) -> List[int]:
        return self.encoding.encode(text, disallowed_special=())

    def token_to_text(self, tokens: List[int]) -> str:
        return self.encoding.decode(tokens)

    def spans(self, text: str) -> List[Tuple[int, int]]:
        _, starts = self.encoding.decode_with_offsets(self.tokenize(text))
        return list(zip(starts, starts[1:] + [len(text)]))


TOKENIZERS = {
    RegexTokenizer.name: RegexTokenizer,
    TiktokenTokenizer.name: TiktokenTokenizer,
}


def get_tokenizer(name: str) -> Tokenizer:
    try:
        return TOKENIZERS[name]()
    except KeyError:
        raise ConfigError(f'unknown tokenizer {name!r}')


class SegmentService():
    @staticmethod
    def count_tokens(text: str, tokenizer: Tokenizer) -> int:
        return len(tokenizer.tokenize(text))

    @staticmethod
    def segment_document(doc: DocumentDTO, tokenizer: Tokenizer, max_tokens: int = 4000,
                         overlap: int = 0) -> List[Segment]:
        """
        Greedy left-to-right packing of a document body into segments. A segment's
        text is the body cut from its first token to its last, spacing kept.
        :params doc, tokenizer, max_tokens, overlap

        :raises ConfigError, PreconditionError, EmptyDocumentError
        :returns list of Segment, index 0..n-1
        """

        if max_tokens < 1:
            raise ConfigError(f'max_tokens must be at least 1, got {max_tokens}')
        if overlap < 0 or overlap >= max_tokens:
            raise ConfigError(f'overlap must be in [0, {max_tokens}), got {overlap}')
        if not doc.body:
            raise PreconditionError(f'{doc.pmc_id}: empty body')

        spans = tokenizer.spans(doc.body)
        if not spans:
            raise EmptyDocumentError(doc.pmc_id)

        stride = max_tokens - overlap
        segments = []
        start = 0

        while True:
            chunk = spans[start:start + max_tokens]
            text = doc.body[chunk[0][0]:chunk[-1][1]]
            segments.append(Segment(doc.pmc_id, len(segments), text, len(chunk)))
            if start + max_tokens >= len(spans):
                break
            start += stride

        logger.debug('%s: %d tokens in %d segments', doc.pmc_id, len(spans), len(segments))
        return segments
