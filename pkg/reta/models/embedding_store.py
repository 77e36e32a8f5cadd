"""
Embedding store: one record per segment, exhaustive cosine retrieval.

File layout (all little-endian):

    header   magic "RETA", format version (3 x uint16), dim (uint32),
             provider name (64 bytes, NUL padded), record count (uint32)
    records  count x [pmc_id (32 bytes), segment index (uint32),
                      provider name (64 bytes, NUL padded),
                      text hash (64 hex chars), dim x float32]
    trailer  SHA-256 of everything above (32 bytes)

Segment texts live in a JSON-lines sidecar, `<path>.segments.jsonl`.
"""
import hashlib
import logging
import os
import struct
import threading
from typing import Dict, List, Optional, Tuple

import numpy as np

from reta.models.custom_types import Segment, SegmentKey
from reta.models.utils import AssetIntegrityError, DimensionMismatchError, PreconditionError, \
    StoreIntegrityError
from reta.utils import check_format_version, read_jsonl, text_digest, version_to_array, write_jsonl

logger = logging.getLogger(__name__)

MAGIC = b'RETA'
FORMAT_VERSION = '2.0.0'
HEADER = struct.Struct('<4s3HI64sI')
DIGEST_SIZE = 32
KEY_BYTES = 32
PROVIDER_BYTES = 64
MAX_DIM = 1 << 16


def record_dtype(dim: int) -> np.dtype:
    return np.dtype([
        ('pmc_id', f'S{KEY_BYTES}'),
        ('segment_index', '<u4'),
        ('provider', f'S{PROVIDER_BYTES}'),
        ('text_hash', 'S64'),
        ('vector', '<f4', (dim,)),
    ])


class EmbeddingRecord(object):
    """ A segment's vector plus provenance """

    def __init__(self, pmc_id: str, segment_index: int, vector, provider_name: str, text_hash: str):
        super(EmbeddingRecord, self).__init__()

        self.pmc_id = pmc_id
        self.segment_index = int(segment_index)
        self.vector = np.asarray(vector, dtype='<f4')
        self.provider_name = provider_name
        self.text_hash = text_hash

    @property
    def key(self) -> SegmentKey:
        return (self.pmc_id, self.segment_index)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def __eq__(self, other):
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return self.key == other.key \
            and self.provider_name == other.provider_name \
            and self.text_hash == other.text_hash \
            and self.vector.tobytes() == other.vector.tobytes()

    def __repr__(self):
        return f'<EmbeddingRecord {self.pmc_id}#{self.segment_index} dim={self.dim}>'


class EmbeddingStore(object):
    """
    In-memory store keyed by (pmc_id, segment_index).
    Writers take the lock; readers work on an immutable snapshot.
    """

    def __init__(self, dim: int = None, provider_name: str = None):
        super(EmbeddingStore, self).__init__()

        self.dim = dim
        self.provider_name = provider_name
        self._records: Dict[SegmentKey, EmbeddingRecord] = {}
        self._segments: Dict[SegmentKey, Segment] = {}
        self._snapshot = None
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._records)

    def __contains__(self, key: SegmentKey):
        return key in self._records

    def __eq__(self, other):
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return self.dim == other.dim \
            and (self.provider_name or '') == (other.provider_name or '') \
            and self._records == other._records \
            and self._segments == other._segments

    def keys(self) -> List[SegmentKey]:
        return sorted(self._records)

    def get(self, key: SegmentKey) -> Optional[EmbeddingRecord]:
        return self._records.get(key)

    def segment(self, key: SegmentKey) -> Segment:
        """ Stored segment, or a text-less placeholder when none was kept """

        segment = self._segments.get(key)
        if segment is None:
            return Segment(key[0], key[1], '', 0)
        return segment

    def upsert(self, record: EmbeddingRecord, segment: Segment = None):
        """
        Insert or replace a record
        :raises DimensionMismatchError, PreconditionError
        """

        vector = record.vector
        if vector.ndim != 1 or vector.shape[0] < 1:
            raise PreconditionError(f'{record.key}: vector must be one-dimensional and non-empty')
        if not np.all(np.isfinite(vector)):
            raise PreconditionError(f'{record.key}: vector has non-finite components')
        if not np.any(vector):
            raise PreconditionError(f'{record.key}: vector has zero norm')
        if len(record.pmc_id.encode('utf-8')) > KEY_BYTES:
            raise PreconditionError(f'{record.key}: pmc_id longer than {KEY_BYTES} bytes')
        if len((record.provider_name or '').encode('utf-8')) > PROVIDER_BYTES:
            raise PreconditionError(f'{record.key}: provider name longer than {PROVIDER_BYTES} bytes')
        if vector.shape[0] > MAX_DIM:
            raise PreconditionError(f'{record.key}: dim {vector.shape[0]} above {MAX_DIM}')

        with self._lock:
            if self.dim is not None and record.dim != self.dim:
                raise DimensionMismatchError(f'{record.key}: dim {record.dim} does not match store dim {self.dim}')

            if self.provider_name is None:
                self.provider_name = record.provider_name
            elif record.provider_name != self.provider_name:
                logger.warning('%s embedded by %s, store holds %s vectors',
                               record.key, record.provider_name, self.provider_name)

            self.dim = record.dim
            self._records[record.key] = record
            if segment is not None:
                self._segments[record.key] = segment
            self._snapshot = None

    def snapshot(self) -> Tuple[List[SegmentKey], np.ndarray, np.ndarray]:
        """ (sorted keys, float64 matrix, row norms) for the current contents """

        with self._lock:
            if self._snapshot is None:
                keys = sorted(self._records)
                if keys:
                    matrix = np.vstack([self._records[k].vector for k in keys]).astype(np.float64)
                else:
                    matrix = np.zeros((0, self.dim or 0), dtype=np.float64)
                norms = np.linalg.norm(matrix, axis=1)
                self._snapshot = (keys, matrix, norms)
            return self._snapshot

    def persist(self, path: str):
        keys = self.keys()
        dim = self.dim or 0
        provider = (self.provider_name or '').encode('utf-8')
        if len(provider) > PROVIDER_BYTES:
            raise PreconditionError(f'provider name longer than {PROVIDER_BYTES} bytes')

        records = np.zeros(len(keys), dtype=record_dtype(dim))
        if keys:
            rows = [self._records[key] for key in keys]
            records['pmc_id'] = [r.pmc_id.encode('utf-8') for r in rows]
            records['segment_index'] = [r.segment_index for r in rows]
            records['provider'] = [(r.provider_name or '').encode('utf-8') for r in rows]
            records['text_hash'] = [r.text_hash.encode('ascii') for r in rows]
            records['vector'] = np.vstack([r.vector for r in rows])

        major, minor, patch = version_to_array(FORMAT_VERSION)
        payload = HEADER.pack(MAGIC, major, minor, patch, dim, provider, len(keys)) + records.tobytes()

        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, 'wb') as f:
            f.write(payload)
            f.write(hashlib.sha256(payload).digest())

        write_jsonl(segments_path(path), [
            {'pmc_id': s.pmc_id, 'index': s.index, 'text': s.text, 'token_count': s.token_count}
            for _, s in sorted(self._segments.items())
        ])

    @staticmethod
    def load(path: str):
        """
        Read a store written by `persist`
        :raises StoreIntegrityError naming the failing record
        """

        if not os.path.exists(path):
            raise StoreIntegrityError(f'{path}: index file not found')

        with open(path, 'rb') as f:
            data = f.read()

        if len(data) < HEADER.size + DIGEST_SIZE:
            raise StoreIntegrityError(f'{path}: truncated header')

        magic, major, minor, patch, dim, provider, count = HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise StoreIntegrityError(f'{path}: not an embedding store')
        try:
            check_format_version(f'{major}.{minor}.{patch}', FORMAT_VERSION, path)
        except AssetIntegrityError as e:
            raise StoreIntegrityError(str(e))
        if dim > MAX_DIM or (dim == 0 and count > 0):
            raise StoreIntegrityError(f'{path}: corrupt header, dim {dim} for {count} records')

        try:
            dtype = record_dtype(dim)
            provider_name = provider.rstrip(b'\0').decode('utf-8') or None
        except (ValueError, MemoryError):
            raise StoreIntegrityError(f'{path}: corrupt header')

        expected = HEADER.size + count * dtype.itemsize + DIGEST_SIZE
        if len(data) < expected:
            complete = (len(data) - HEADER.size) // dtype.itemsize
            if complete < count:
                raise StoreIntegrityError(f'{path}: truncated at record {complete} of {count}')
            raise StoreIntegrityError(f'{path}: truncated integrity digest')
        if len(data) > expected:
            raise StoreIntegrityError(f'{path}: {len(data) - expected} unexpected trailing bytes')

        body_end = expected - DIGEST_SIZE
        if hashlib.sha256(data[:body_end]).digest() != data[body_end:]:
            raise StoreIntegrityError(f'{path}: integrity digest mismatch')

        records = np.frombuffer(data, dtype=dtype, count=count, offset=HEADER.size)
        store = EmbeddingStore(dim or None, provider_name)

        for i, row in enumerate(records):
            try:
                pmc_id = row['pmc_id'].decode('utf-8')
                record_provider = row['provider'].decode('utf-8') or None
                text_hash = row['text_hash'].decode('ascii')
            except UnicodeDecodeError:
                raise StoreIntegrityError(f'{path}: record {i} has an undecodable field')

            key = (pmc_id, int(row['segment_index']))
            vector = np.array(row['vector'], dtype='<f4')
            if not pmc_id or not np.all(np.isfinite(vector)) or not np.any(vector):
                raise StoreIntegrityError(f'{path}: record {i} {key} is corrupt')
            if key in store._records:
                raise StoreIntegrityError(f'{path}: record {i} {key} is a duplicate')

            store._records[key] = EmbeddingRecord(pmc_id, key[1], vector, record_provider, text_hash)

        sidecar = segments_path(path)
        if os.path.exists(sidecar):
            for row in read_jsonl(sidecar):
                key = (row.get('pmc_id'), row.get('index'))
                record = store._records.get(key)
                if record is None or text_digest(row.get('text', '')) != record.text_hash:
                    raise StoreIntegrityError(f'{sidecar}: segment {key} does not match its record')
                store._segments[key] = Segment(key[0], key[1], row['text'], row.get('token_count', 0))

        return store


def segments_path(path: str) -> str:
    return path + '.segments.jsonl'
