import logging
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List

from lxml import etree

from reta.models.corpus import Corpus
from reta.models.custom_types import RawArticle
from reta.models.dtos.config_dto import DEFAULT_EXCLUDED_ELEMENTS, DEFAULT_EXCLUDED_SECTIONS, DEFAULT_QUERIES
from reta.models.dtos.corpus_dto import CorpusQueryDTO, DocumentDTO, QueryManifestDTO
from reta.models.utils import EmptyCorpusError, EmptyDocumentError, ParseError, PreconditionError, \
    RetaError, TransportError, timestamp
from reta.utils import normalize_whitespace

logger = logging.getLogger(__name__)

# sec-type / notes-type / fn-type values that mark disclosure-like blocks
EXCLUDED_TYPES = {
    'coi-statement', 'conflict', 'con', 'author-contribution', 'author-contributions',
    'disclosure', 'financial-disclosure', 'funding-information', 'ack', 'acknowledgment',
    'acknowledgement',
}

SKIPPED_ABSTRACTS = {'graphical', 'teaser', 'toc'}


class CorpusService():
    @staticmethod
    def default_query_set() -> List[CorpusQueryDTO]:
        """ The six corpus queries, 500 articles each """

        return [CorpusQueryDTO({'text': text, 'retmax': 500}) for text in DEFAULT_QUERIES]

    @staticmethod
    def preprocess(raw: RawArticle, excluded_elements: Iterable[str] = None,
                   excluded_sections: Iterable[str] = None) -> DocumentDTO:
        """
        Turn a JATS payload into a document: abstract first, then body paragraphs
        in source order, with figures, tables, references and disclosure blocks removed
        :params raw, excluded_elements, excluded_sections

        :raises ParseError, EmptyDocumentError
        :returns DocumentDTO
        """

        if excluded_elements is None:
            excluded_elements = DEFAULT_EXCLUDED_ELEMENTS
        if excluded_sections is None:
            excluded_sections = DEFAULT_EXCLUDED_SECTIONS

        parser = etree.XMLParser(resolve_entities=False, no_network=True, remove_comments=True,
                                 remove_pis=True, huge_tree=True)
        try:
            root = etree.fromstring(raw.xml, parser)
        except (etree.XMLSyntaxError, ValueError) as e:
            raise ParseError(f'{raw.pmc_id}: unparseable markup: {e}', field='xml')

        article = root if root.tag == 'article' else root.find('.//article')
        if article is None:
            raise ParseError(f'{raw.pmc_id}: no <article> element', field='article')

        title_el = article.find('front/article-meta/title-group/article-title')
        title = normalize_whitespace(''.join(title_el.itertext())) if title_el is not None else ''

        if excluded_elements:
            etree.strip_elements(article, *excluded_elements, with_tail=False)
        _drop_excluded_sections(article, [s.lower() for s in excluded_sections])

        blocks = []
        for abstract in article.findall('front/article-meta/abstract'):
            if abstract.get('abstract-type') in SKIPPED_ABSTRACTS:
                continue
            paragraphs = _paragraphs(abstract)
            if not paragraphs:
                text = normalize_whitespace(''.join(abstract.itertext()))
                paragraphs = [text] if text else []
            blocks.extend(paragraphs)

        body = article.find('body')
        if body is not None:
            blocks.extend(_paragraphs(body))

        if not blocks:
            raise EmptyDocumentError(raw.pmc_id)

        return DocumentDTO({
            'pmc_id': raw.pmc_id,
            'title': title,
            'body': '\n\n'.join(blocks),
            'source_queries': [],
            'fetched': timestamp(),
            'byte_length': len(raw.xml),
        })

    @staticmethod
    def build_corpus(queries: List[CorpusQueryDTO], client, workers: int = 3,
                     excluded_elements: Iterable[str] = None, excluded_sections: Iterable[str] = None) -> Corpus:
        """
        Union of per-query fetches, deduplicated by PMC id
        :params queries, client (EntrezClient), workers

        :raises PreconditionError when no queries are given
        :raises EmptyCorpusError when nothing could be fetched
        :returns Corpus
        """

        if not queries:
            raise PreconditionError('at least one query is required')

        corpus = Corpus()
        failed = {}
        transport_failures = 0
        failures = 0

        def fetch(pmc_id):
            try:
                raw = client.fetch_article(pmc_id)
                return CorpusService.preprocess(raw, excluded_elements, excluded_sections), None
            except RetaError as e:
                return None, e

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for query in queries:
                if query.text in corpus.manifest:
                    logger.info('query %r already processed, skipping', query.text)
                    continue

                entry = QueryManifestDTO({'query': query.text, 'retmax': query.retmax, 'started': timestamp()})

                try:
                    ids = client.search_pmc(query)
                except (TransportError, ParseError) as e:
                    logger.error('search for %r failed: %s', query.text, e)
                    entry.error = str(e)
                    entry.error_kind = _kind(e)
                    entry.finished = timestamp()
                    corpus.record(entry)
                    failures += 1
                    transport_failures += isinstance(e, TransportError)
                    continue

                ids = list(dict.fromkeys(ids))
                entry.hits = len(ids)

                pending = [i for i in ids if i not in corpus and i not in failed]
                results = dict(zip(pending, pool.map(fetch, pending)))

                # single writer: merge in service order
                for pmc_id in ids:
                    if pmc_id in results:
                        document, error = results[pmc_id]
                        if error is not None:
                            logger.warning('skipping %s: %s', pmc_id, error)
                            failed[pmc_id] = error
                            failures += 1
                            transport_failures += isinstance(error, TransportError)
                        else:
                            corpus.add(document)

                    if pmc_id in failed:
                        entry.skipped.append({'pmc_id': pmc_id, 'error': str(failed[pmc_id]),
                                              'kind': _kind(failed[pmc_id])})
                    else:
                        corpus.add(corpus.get(pmc_id), query.text)
                        entry.fetched += 1

                entry.finished = timestamp()
                corpus.record(entry)
                logger.info('query %r: %d hits, %d documents', query.text, entry.hits, entry.fetched)

        if len(corpus) == 0 and failures:
            e = EmptyCorpusError('every query failed, the corpus is empty',
                                 transport_failure=transport_failures == failures)
            e.corpus = corpus
            raise e

        return corpus


def _paragraphs(element) -> List[str]:
    """ Text of the outermost <p> elements under element, in document order """

    paragraphs = []
    for p in element.iter('p'):
        if any(ancestor.tag == 'p' for ancestor in p.iterancestors()):
            continue
        text = normalize_whitespace(''.join(p.itertext()))
        if text:
            paragraphs.append(text)
    return paragraphs


def _section_title(element) -> str:
    title = element.find('title')
    if title is None:
        return ''
    text = normalize_whitespace(''.join(title.itertext())).lower()
    return re.sub(r'^[\d.\s]+', '', text)


def _drop_excluded_sections(article, titles: List[str]):
    candidates = article.xpath('.//sec | .//notes | .//fn')
    for element in candidates:
        kind = (element.get('sec-type') or element.get('notes-type') or element.get('fn-type') or '').lower()
        title = _section_title(element)

        if kind in EXCLUDED_TYPES or any(title.startswith(t) for t in titles):
            parent = element.getparent()
            if parent is not None:
                parent.remove(element)


def _kind(error: Exception) -> str:
    return 'transport' if isinstance(error, TransportError) else 'data'
