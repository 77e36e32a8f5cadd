import logging
import os
import sys

import click

from reta import __version__, configure_logging, create_pipeline
from reta.config import EnvironmentConfig, load_run_config
from reta.models.corpus import Corpus
from reta.models.dtos.corpus_dto import CorpusQueryDTO
from reta.models.embedding_store import EmbeddingStore
from reta.models.utils import ConfigError, EmptyCorpusError, RetaError, UsageError
from reta.services.api_client import HttpTransport
from reta.services.corpus_service import CorpusService
from reta.services.embedding_service import EmbeddingService
from reta.services.entrez_client import EntrezClient, FixtureTransport
from reta.services.evaluation_service import DATA_DIR, EvaluationService
from reta.services.report_service import emit_report
from reta.services.segment_service import SegmentService
from reta.services.synthesis_service import SynthesisService
from reta.utils import file_digest

logger = logging.getLogger(__name__)


class RetaGroup(click.Group):
    """ Maps click usage errors to exit 1 and domain errors to their own exit codes """

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super(RetaGroup, self).main(args, prog_name, complete_var, False, **extra)

        try:
            rv = super(RetaGroup, self).main(args, prog_name, complete_var, False, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(1)
        except click.exceptions.Abort:
            click.echo('Aborted!', err=True)
            sys.exit(1)
        except RetaError as e:
            click.echo(f'error: {e}', err=True)
            sys.exit(e.exit_code)

        sys.exit(rv if isinstance(rv, int) else 0)


def _table(headers, rows):
    widths = [max(len(str(v)) for v in column) for column in zip(headers, *rows)]
    for row in [headers] + list(rows):
        click.echo('  '.join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip())


def _entrez_client(config) -> EntrezClient:
    if config.live:
        transport = HttpTransport()
    else:
        fixtures = config.path('fixtures')
        if not fixtures:
            raise ConfigError('offline runs read recorded responses: set paths.fixtures or pass --live')
        transport = FixtureTransport(fixtures)

    return EntrezClient(
        transport,
        api_key=EnvironmentConfig.NCBI_API_KEY if config.live else None,
        requests_per_second=config.corpus.requests_per_second,
        max_tries=config.corpus.max_tries
    )


@click.group(cls=RetaGroup)
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), envvar='RETA_CONFIG',
              help='Run config (YAML). Built-in defaults when omitted.')
@click.option('--live', is_flag=True, default=False, help='Allow network providers and the live Entrez service.')
@click.option('--k', type=int, help='Segments retrieved per question.')
@click.option('--max-tokens', type=int, help='Tokens per segment.')
@click.option('--provider', help='LLM provider name.')
@click.version_option(__version__, prog_name='reta')
@click.pass_context
def cli(ctx, config_path, live, k, max_tokens, provider):
    """ Retrieval-augmented question answering over PubMed Central, plus its evaluation harness """

    configure_logging()
    ctx.obj = load_run_config(config_path, {
        'live': True if live else None,
        'retrieval.k': k,
        'segmenter.max_tokens': max_tokens,
        'llm.provider': provider,
    })


@cli.command()
@click.pass_obj
def ingest(config):
    """ Download and preprocess the corpus """

    click.echo(f'config {config.digest}')
    queries = [CorpusQueryDTO({'text': q, 'retmax': config.corpus.retmax}) for q in config.corpus.queries]
    corpus_dir = config.path('corpus')

    try:
        corpus = CorpusService.build_corpus(
            queries,
            _entrez_client(config),
            workers=config.corpus.fetch_workers,
            excluded_elements=config.corpus.excluded_elements,
            excluded_sections=config.corpus.excluded_sections
        )
    except EmptyCorpusError as e:
        e.corpus.save(corpus_dir)
        _print_failures(e.corpus)
        raise

    corpus.save(corpus_dir)

    _table(['pmc_id', 'title', 'queries'], [
        [row['pmc_id'], (row.get('title') or '')[:60], '; '.join(row['source_queries'])]
        for row in corpus.manifest_rows()
    ])
    click.echo(f'{len(corpus)} documents written to {corpus_dir}')

    if len(corpus) == 0:
        logger.warning('the corpus is empty')
        click.echo('warning: the corpus is empty', err=True)

    failures = corpus.failures()
    if failures:
        _print_failures(corpus)
        return 3 if all(f['kind'] == 'transport' for f in failures) else 2
    return 0


def _print_failures(corpus: Corpus):
    failures = corpus.failures()
    if not failures:
        return
    click.echo(f'{len(failures)} failures:', err=True)
    _table(['query', 'pmc_id', 'kind', 'error'], [
        [f['query'], f['pmc_id'] or '-', f['kind'], f['error']] for f in failures
    ])


@cli.command()
@click.pass_obj
def index(config):
    """ Segment the corpus and embed every segment """

    click.echo(f'config {config.digest}')
    pipeline = create_pipeline(config)
    corpus = Corpus.load(config.path('corpus'))

    segments = []
    for document in corpus:
        segments.extend(SegmentService.segment_document(
            document, pipeline.tokenizer, config.segmenter.max_tokens, config.segmenter.overlap))

    store = EmbeddingService.index_segments(segments, pipeline.embedder)
    path = config.path('index')
    store.persist(path)

    click.echo(f'{len(segments)} segments from {len(corpus)} documents indexed to {path}')
    click.echo(f'index sha256 {file_digest(path)}')
    return 0


@cli.command()
@click.argument('question')
@click.pass_obj
def ask(config, question):
    """ Answer a question from the indexed corpus """

    if not question.strip():
        raise UsageError('the question must be non-empty')

    pipeline = create_pipeline(config)
    store = EmbeddingStore.load(config.path('index'))

    answer = SynthesisService.answer_query(
        question,
        store,
        config.retrieval.k,
        pipeline.embedder,
        pipeline.llm,
        config.llm,
        audit_path=config.path('audit_log'),
        config_digest=config.digest
    )

    click.echo(f'config {config.digest}')
    click.echo(answer.answer)
    sources = ', '.join(f'{pmc_id}#{index}' for pmc_id, index in answer.provenance)
    click.echo(f'sources: {sources or "none"}')
    return 0


@cli.command(name='eval')
@click.option('--scores', 'scores_path', type=click.Path(dir_okay=False),
              help='Score records (JSON lines). Defaults to paths.scores, then the bundled demo matrix.')
@click.option('--annotations', 'annotations_path', type=click.Path(dir_okay=False),
              help='Hallucination annotations (JSON lines).')
@click.option('--format', 'fmt', default='csv', show_default=True, help='csv or text.')
@click.pass_obj
def evaluate(config, scores_path, annotations_path, fmt):
    """ Aggregate reviewer scores and hallucination annotations into a report """

    scores_path = scores_path or config.path('scores') or os.path.join(DATA_DIR, 'demo_scores.jsonl')
    annotations_path = annotations_path or config.path('annotations')

    scores = EvaluationService.load_scores(scores_path)
    annotations = EvaluationService.load_annotations(annotations_path) if annotations_path else []

    report = EvaluationService.build_report(scores, annotations)
    paths = emit_report(report, fmt, config.path('reports'), config.digest,
                        rubric=EvaluationService.load_rubric(), source=os.path.basename(scores_path))

    click.echo(f'config {config.digest}')
    _table(['model', 'metric', '3-pt', '2-pt', '1-pt', 'total'], [
        [r.model_id, r.metric, r.c3, r.c2, r.c1, r.total] for r in report.aggregates
    ])
    for row in report.hallucinations:
        click.echo(f'{row.model_id}: {row.total} hallucinations in {row.affected_questions} questions')
    for row in report.audits:
        if not row.feasible:
            click.echo(f'infeasible {row.source} tuple {row.model_id}/{row.metric}: {row.reason}')
    for path in paths:
        click.echo(f'wrote {path}')
    return 0


def main():
    cli(prog_name='reta')


if __name__ == '__main__':
    main()
