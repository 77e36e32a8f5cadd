"""
Two-stage answer synthesis.

Stage one asks the LLM to answer the query from each retrieved segment on its
own; stage two asks it to combine the stage-one answers into one response.
"""
import logging
import os
import re
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from reta.config import EnvironmentConfig
from reta.models.custom_types import FinalAnswer, RetrievedSegment, Segment, StageOneAnswer
from reta.models.dtos.audit_dto import AuditRecordDTO
from reta.models.embedding_store import EmbeddingStore
from reta.models.utils import ConfigError, PipelineError, PreconditionError, ProviderError, TransportError, \
    timestamp
from reta.services.api_client import JsonApiClient
from reta.services.embedding_service import EmbeddingProvider, EmbeddingService
from reta.services.segment_service import RegexTokenizer, TiktokenTokenizer, Tokenizer
from reta.utils import write_jsonl

logger = logging.getLogger(__name__)

PROMPT_VERSION = '1.0.0'
TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'templates')
REFUSAL_TEXT = 'I do not know the answer.'

_env = Environment(
    loader=FileSystemLoader(TEMPLATE_DIR),
    undefined=StrictUndefined,
    autoescape=False
)


def render_stage_one(segment: Segment, query: str) -> str:
    """
    Per-segment question answering prompt
    :raises PreconditionError
    """

    if not query or not query.strip():
        raise PreconditionError('query must be non-empty')
    if not segment.text:
        raise PreconditionError(f'{segment.key}: segment text must be non-empty')

    return _env.get_template('stage_one.j2').render(segment=segment.text, query=query)


def render_stage_two(answers: List[StageOneAnswer]) -> str:
    """
    Combination prompt, one numbered "Paper #i" entry per answer in the given order
    :raises PreconditionError
    """

    if not answers:
        raise PreconditionError('stage two needs at least one answer')

    return _env.get_template('stage_two.j2').render(answers=[a.text for a in answers])


class LLMProvider(ABC):
    """ Text completion: prompt in, completion text out """

    name = None
    tokenizer: Tokenizer = RegexTokenizer()

    @abstractmethod
    def complete(self, prompt: str, params: dict) -> str:
        pass

    def count_tokens(self, text: str) -> int:
        return len(self.tokenizer.tokenize(text))


SENTENCE_BREAK = re.compile(r'(?<=[.!?])\s+')
WORD = re.compile(r'\w+')
PAPER_MARKER = re.compile(r'\n\nPaper #\d+: ')


def _words(text: str) -> set:
    return set(WORD.findall(text.lower()))


class MockLLMProvider(LLMProvider):
    """
    Deterministic extractive stand-in for a completion model.

    Stage one: the context sentence sharing the most distinct words with the
    question (first one wins ties), or a refusal when nothing is shared.
    Stage two: the distinct "Paper #" bodies in order, space-joined.
    """

    name = 'mock'

    def __init__(self):
        self.calls = []

    def complete(self, prompt: str, params: dict = None) -> str:
        self.calls.append(prompt)

        if prompt.startswith('Instruction:'):
            return self._answer(prompt)
        if prompt.startswith('Please combine'):
            return self._combine(prompt)
        return REFUSAL_TEXT

    @staticmethod
    def _answer(prompt: str) -> str:
        context_start = prompt.find('\n\nContext: ')
        question_start = prompt.rfind('\n\nQuestion: ')
        answer_start = prompt.rfind('\n\nAnswer:')
        if min(context_start, question_start, answer_start) < 0:
            return REFUSAL_TEXT

        context = prompt[context_start + len('\n\nContext: '):question_start]
        question = _words(prompt[question_start + len('\n\nQuestion: '):answer_start])

        best, best_overlap = None, 0
        for sentence in SENTENCE_BREAK.split(context.strip()):
            overlap = len(_words(sentence) & question)
            if overlap > best_overlap:
                best, best_overlap = sentence, overlap

        return best if best is not None else REFUSAL_TEXT

    @staticmethod
    def _combine(prompt: str) -> str:
        bodies = PAPER_MARKER.split(prompt)[1:]
        return ' '.join(dict.fromkeys(b.strip() for b in bodies if b.strip()))


def mock_provider() -> LLMProvider:
    return MockLLMProvider()


class OpenAICompletionProvider(LLMProvider):
    """ OpenAI-compatible /completions endpoint, windows measured in the model's BPE tokens """

    name = 'openai'

    def __init__(self, model: str = 'text-davinci-003', transport=None, endpoint: str = None,
                 api_key: str = None, tokenizer: Tokenizer = None):
        self.model = model
        self.tokenizer = tokenizer or TiktokenTokenizer(model=model)
        self.client = JsonApiClient(
            endpoint or EnvironmentConfig.LLM_ENDPOINT,
            api_key or EnvironmentConfig.LLM_API_KEY,
            'RETA_LLM_API_KEY',
            transport=transport
        )

    def complete(self, prompt: str, params: dict = None) -> str:
        payload = {'model': self.model, 'prompt': prompt}
        payload.update(params or {})
        data = self.client.post(payload)

        try:
            return data['choices'][0]['text'].strip()
        except (KeyError, IndexError, TypeError, AttributeError):
            raise ProviderError('completion response has no choices[0].text')


def get_llm_provider(config, transport=None) -> LLMProvider:
    """
    Provider named by the run config
    :raises ConfigError
    """

    section = config.llm
    if section.provider == MockLLMProvider.name:
        return mock_provider()

    if section.provider == OpenAICompletionProvider.name:
        if not config.live:
            raise ConfigError('the openai completion provider needs --live')
        return OpenAICompletionProvider(section.model, transport=transport)

    raise ConfigError(f'unknown llm provider {section.provider!r}')


def _key_label(key) -> str:
    return f'{key[0]}#{key[1]}'


class SynthesisService():
    @staticmethod
    def decoding_params(llm_config) -> dict:
        return {'temperature': llm_config.temperature, 'max_tokens': llm_config.max_tokens}

    @staticmethod
    def fit_segment(segment: Segment, query: str, provider: LLMProvider, llm_config) -> Segment:
        """ Truncate a segment whose prompt would not fit the provider window """

        overhead = provider.count_tokens(render_stage_one(segment._replace(text='x'), query)) - 1
        budget = llm_config.context_window - llm_config.max_tokens - overhead
        tokens = provider.tokenizer.tokenize(segment.text)

        if len(tokens) <= budget:
            return segment
        if budget < 1:
            raise PreconditionError('query leaves no room for context in the provider window')

        logger.warning('%s: truncating segment from %d to %d tokens to fit the context window',
                       _key_label(segment.key), len(tokens), budget)
        return segment._replace(text=provider.tokenizer.truncate(segment.text, budget), token_count=budget)

    @staticmethod
    def stage_one(retrieved: List[RetrievedSegment], query: str, provider: LLMProvider,
                  llm_config) -> List[StageOneAnswer]:
        """
        One completion per retrieved segment, run concurrently, returned in rank order
        :raises PipelineError naming the failing segment
        """

        params = SynthesisService.decoding_params(llm_config)
        refusal = re.compile(llm_config.refusal_pattern, re.IGNORECASE)

        def ask(item: RetrievedSegment) -> StageOneAnswer:
            segment = SynthesisService.fit_segment(item.segment, query, provider, llm_config)
            try:
                text = provider.complete(render_stage_one(segment, query), params).strip()
            except TransportError as e:
                raise PipelineError(f'stage one failed for {_key_label(segment.key)}: {e}',
                                    stage='stage-one', segment_key=segment.key)
            return StageOneAnswer(segment.key, text, refusal.search(text) is not None)

        with ThreadPoolExecutor(max_workers=llm_config.workers) as pool:
            return list(pool.map(ask, retrieved))

    @staticmethod
    def stage_two(answers: List[StageOneAnswer], provider: LLMProvider, llm_config) -> Tuple[str, int]:
        """
        Combine answers in one completion. When the prompt would overflow the
        window, answers are first combined pairwise, level by level.
        :returns (combined text, number of fold levels)
        """

        params = SynthesisService.decoding_params(llm_config)
        room = llm_config.context_window - llm_config.max_tokens

        def combine(batch: List[StageOneAnswer]) -> str:
            try:
                return provider.complete(render_stage_two(batch), params).strip()
            except TransportError as e:
                raise PipelineError(f'stage two failed: {e}', stage='stage-two')

        level = list(answers)
        folds = 0
        while len(level) > 1 and provider.count_tokens(render_stage_two(level)) > room:
            folds += 1
            logger.info('stage two prompt over %d tokens, folding %d answers pairwise', room, len(level))
            level = [
                StageOneAnswer(None, combine(level[i:i + 2]), False) if i + 1 < len(level) else level[i]
                for i in range(0, len(level), 2)
            ]

        return combine(level), folds

    @staticmethod
    def answer_query(query: str, store: EmbeddingStore, k: int, embedder: EmbeddingProvider,
                     provider: LLMProvider, llm_config, audit_path: Optional[str] = None,
                     config_digest: str = None) -> FinalAnswer:
        """
        Retrieve the k closest segments and synthesize an answer from them
        :params query, store, k, embedder, provider, llm_config, audit_path, config_digest

        :raises PreconditionError on an empty query, PipelineError on provider failure
        :returns FinalAnswer
        """

        if not query or not query.strip():
            raise PreconditionError('query must be non-empty')

        timings = {}
        started = time.perf_counter()
        retrieved = []
        stage_one = []
        folds = 0

        if len(store) > 0:
            try:
                query_vec = EmbeddingService.embed(query, embedder)
            except TransportError as e:
                raise PipelineError(f'query embedding failed: {e}', stage='embed')
            timings['embed'] = time.perf_counter() - started

            retrieved = EmbeddingService.top_k(store, query_vec, k)
            timings['retrieve'] = time.perf_counter() - started

            stage_one = SynthesisService.stage_one(retrieved, query, provider, llm_config)
            timings['stage_one'] = time.perf_counter() - started

        informative = [a for a in stage_one if not a.is_refusal]
        if not informative:
            answer = FinalAnswer(query, llm_config.fallback_text, [], stage_one)
        else:
            survivors = informative if llm_config.drop_refusals else stage_one
            dropped = len(stage_one) - len(survivors)
            if dropped:
                logger.info('dropped %d refusals before stage two', dropped)

            text, folds = SynthesisService.stage_two(survivors, provider, llm_config)
            timings['stage_two'] = time.perf_counter() - started
            answer = FinalAnswer(query, text, [a.key for a in informative], stage_one)

        if audit_path:
            SynthesisService.write_audit(audit_path, answer, retrieved, k, embedder, provider,
                                         folds, timings, config_digest)

        return answer

    @staticmethod
    def write_audit(path: str, answer: FinalAnswer, retrieved: List[RetrievedSegment], k: int,
                    embedder: EmbeddingProvider, provider: LLMProvider, folds: int, timings: dict,
                    config_digest: str = None):
        record = AuditRecordDTO({
            'query': answer.query,
            'config_digest': config_digest,
            'embedding_provider': embedder.name,
            'llm_provider': provider.name,
            'prompt_version': PROMPT_VERSION,
            'k': k,
            'retrieved': [
                {'pmc_id': r.segment.pmc_id, 'segment_index': r.segment.index, 'score': r.score}
                for r in retrieved
            ],
            'stage_one': [
                {'pmc_id': a.key[0], 'segment_index': a.key[1], 'text': a.text, 'is_refusal': a.is_refusal}
                for a in answer.stage_one_answers
            ],
            'answer': answer.answer,
            'provenance': [_key_label(key) for key in answer.provenance],
            'folds': folds,
            'timings': timings,
            'answered': timestamp(),
        })
        record.validate()

        write_jsonl(path, [record.to_primitive()], append=True)
