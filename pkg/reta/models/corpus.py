import os
from collections import OrderedDict

from schematics.exceptions import DataError

from reta.models.dtos.corpus_dto import DocumentDTO, QueryManifestDTO
from reta.models.utils import DataIntegrityError
from reta.utils import read_jsonl, write_jsonl

DOCUMENTS_FILE = 'documents.jsonl'
MANIFEST_FILE = 'manifest.jsonl'
QUERIES_FILE = 'queries.jsonl'


class Corpus:
    """ Deduplicated set of documents keyed by PMC id, plus the fetch manifest """

    def __init__(self):
        self.documents = OrderedDict()
        self.manifest = OrderedDict()

    def __len__(self):
        return len(self.documents)

    def __contains__(self, pmc_id: str):
        return pmc_id in self.documents

    def __iter__(self):
        return iter(self.documents.values())

    def get(self, pmc_id: str):
        return self.documents.get(pmc_id)

    def add(self, document: DocumentDTO, query: str = None):
        """ Insert a document, or record one more query that surfaced it """

        existing = self.documents.get(document.pmc_id)
        if existing is None:
            self.documents[document.pmc_id] = document
            existing = document

        if query is not None and query not in existing.source_queries:
            existing.source_queries.append(query)

        return existing

    def record(self, entry: QueryManifestDTO):
        self.manifest[entry.query] = entry

    def manifest_rows(self) -> list:
        """ One record per document: pmc_id, title, source_queries, fetch timestamp, byte length """

        return [
            document.to_primitive(role='manifest')
            for document in self.documents.values()
        ]

    def failures(self) -> list:
        rows = []
        for entry in self.manifest.values():
            if entry.error:
                rows.append({'query': entry.query, 'pmc_id': '', 'error': entry.error,
                             'kind': entry.error_kind or 'data'})
            for skipped in entry.skipped:
                rows.append({'query': entry.query, 'pmc_id': skipped['pmc_id'], 'error': skipped['error'],
                             'kind': skipped.get('kind', 'data')})
        return rows

    def save(self, directory: str):
        os.makedirs(directory, exist_ok=True)

        write_jsonl(os.path.join(directory, DOCUMENTS_FILE), [
            document.to_primitive(role='corpus') for document in self.documents.values()
        ])
        write_jsonl(os.path.join(directory, MANIFEST_FILE), self.manifest_rows())
        write_jsonl(os.path.join(directory, QUERIES_FILE), [
            entry.to_primitive() for entry in self.manifest.values()
        ])

    @staticmethod
    def load(directory: str):
        """
        Load a corpus written by `save`
        :raises DataIntegrityError naming the offending file
        """

        path = os.path.join(directory, DOCUMENTS_FILE)
        corpus = Corpus()

        fetch_info = {}
        manifest_path = os.path.join(directory, MANIFEST_FILE)
        if os.path.exists(manifest_path):
            for row in read_jsonl(manifest_path):
                fetch_info[row.get('pmc_id')] = {
                    'fetched': row.get('fetched'),
                    'byte_length': row.get('byte_length'),
                }

        for lineno, row in enumerate(read_jsonl(path), start=1):
            if not isinstance(row, dict):
                raise DataIntegrityError(f'{path}:{lineno}: expected an object')
            try:
                document = DocumentDTO(dict(row, **fetch_info.get(row.get('pmc_id'), {})))
                document.validate()
            except DataError as e:
                raise DataIntegrityError(f'{path}:{lineno}: {e}')

            if document.pmc_id in corpus:
                raise DataIntegrityError(f'{path}:{lineno}: duplicate document {document.pmc_id}')
            corpus.documents[document.pmc_id] = document

        queries_path = os.path.join(directory, QUERIES_FILE)
        if os.path.exists(queries_path):
            for row in read_jsonl(queries_path):
                corpus.record(QueryManifestDTO(row))

        return corpus
