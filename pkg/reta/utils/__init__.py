import hashlib
import json
import os
import re

import semver

from reta.models.utils import AssetIntegrityError, DataIntegrityError


def version_to_array(version: str):
    """ Convert a semver string into it's components as integers """

    info = semver.VersionInfo.parse(version)
    return [info.major, info.minor, info.patch]


def check_format_version(found: str, supported: str, what: str):
    """
    Accept an asset whose major version matches the supported one
    :raises AssetIntegrityError
    """

    try:
        found_major = version_to_array(found)[0]
    except (ValueError, TypeError):
        raise AssetIntegrityError(f'{what}: invalid format version {found!r}')

    if found_major != version_to_array(supported)[0]:
        raise AssetIntegrityError(f'{what}: unsupported format version {found}, expected {supported}')


def text_digest(text: str) -> str:
    """ SHA-256 hex digest of utf-8 text """
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def config_digest(primitive: dict) -> str:
    """ Short stable digest of a config dictionary """

    canonical = json.dumps(primitive, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:12]


def file_digest(path: str) -> str:
    sha = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            sha.update(chunk)
    return sha.hexdigest()


def slugify(text: str) -> str:
    """ Filesystem safe name for a query string """
    return re.sub(r'[^a-z0-9]+', '-', text.lower()).strip('-')


def normalize_whitespace(text: str) -> str:
    return re.sub(r'\s+', ' ', text).strip()


def read_jsonl(path: str) -> list:
    """
    Read a line-delimited JSON file
    :raises DataIntegrityError naming the file and line
    """

    if not os.path.exists(path):
        raise DataIntegrityError(f'{path}: file not found')

    rows = []
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DataIntegrityError(f'{path}:{lineno}: {e.msg}')

    return rows


def write_jsonl(path: str, rows, append: bool = False):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)

    with open(path, 'a' if append else 'w', encoding='utf-8') as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            f.write('\n')
