import csv
import logging
import os
from collections import OrderedDict
from typing import Dict, List, Tuple

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from reta.models.custom_types import AggregateReport, AggregateRow, AuditRow, CategoryRow, GridRow, \
    HallucinationRow, ScopeRow
from reta.models.utils import DataIntegrityError, UsageError

logger = logging.getLogger(__name__)

FORMATS = ['csv', 'text']
TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'templates')

_env = Environment(loader=FileSystemLoader(TEMPLATE_DIR), undefined=StrictUndefined, autoescape=False)

TABLES = OrderedDict([
    ('aggregates', ['model_id', 'metric', 'c1', 'c2', 'c3', 'total', 'feasible']),
    ('categories', ['model_id', 'metric', 'group', 'total']),
    ('scopes', ['model_id', 'metric', 'scope', 'total']),
    ('hallucinations', ['model_id', 'total', 'affected_questions']),
    ('grid', ['question_id', 'group', 'scope']),
    ('audits', ['source', 'model_id', 'metric', 'n_questions', 'c3', 'c1', 'total', 'feasible',
                'implied_c2', 'implied_total', 'residual', 'reason']),
])

ROW_TYPES = {
    'aggregates': AggregateRow,
    'categories': CategoryRow,
    'scopes': ScopeRow,
    'hallucinations': HallucinationRow,
    'audits': AuditRow,
}

INT_FIELDS = {'c1', 'c2', 'c3', 'total', 'affected_questions', 'question_id', 'n_questions',
              'implied_c2', 'implied_total', 'residual'}
BOOL_FIELDS = {'feasible'}


def _cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return str(value)


def _parse(field: str, value: str):
    if field in BOOL_FIELDS:
        if value not in ('true', 'false'):
            raise ValueError(f'{field} must be true or false')
        return value == 'true'
    if field in INT_FIELDS:
        return int(value) if value != '' else None
    return value


def _grid_columns(report: AggregateReport) -> List[str]:
    return list(report.grid[0].scores) if report.grid else []


def _table_rows(report: AggregateReport, name: str) -> Tuple[List[str], List[list]]:
    headers = list(TABLES[name])
    if name == 'grid':
        columns = _grid_columns(report)
        return headers + columns, [
            [row.question_id, row.group, row.scope] + [row.scores[c] for c in columns] for row in report.grid
        ]
    return headers, [list(row) for row in getattr(report, name)]


def _aligned(headers: List[str], rows: List[List]) -> List[str]:
    cells = [headers] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ['  '.join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, '  '.join('-' * w for w in widths))
    return lines


def report_paths(out_dir: str, stamp: str, fmt: str) -> Dict[str, str]:
    if fmt == 'csv':
        return OrderedDict((name, os.path.join(out_dir, f'{name}-{stamp}.csv')) for name in TABLES)
    if fmt == 'text':
        return OrderedDict([('report', os.path.join(out_dir, f'report-{stamp}.txt'))])
    raise UsageError(f'unknown report format {fmt!r}, expected one of {", ".join(FORMATS)}')


def emit_report(report: AggregateReport, fmt: str, out_dir: str, stamp: str, rubric: dict = None,
                source: str = None) -> List[str]:
    """
    Write the report as delimiter-separated tables or one aligned-text file
    :params report, fmt (csv | text), out_dir, stamp (config digest), rubric, source

    :raises UsageError on an unknown format
    :returns paths written
    """

    paths = report_paths(out_dir, stamp, fmt)
    os.makedirs(out_dir, exist_ok=True)

    if fmt == 'csv':
        for name, path in paths.items():
            headers, rows = _table_rows(report, name)
            with open(path, 'w', encoding='utf-8', newline='') as f:
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(headers)
                for row in rows:
                    writer.writerow([_cell(v) for v in row])
    else:
        sections = []
        for name in TABLES:
            headers, rows = _table_rows(report, name)
            sections.append({'title': name.capitalize(), 'lines': _aligned(headers, rows)})

        text = _env.get_template('report.txt.j2').render(
            stamp=stamp, source=source, sections=sections, rubric=rubric)
        with open(paths['report'], 'w', encoding='utf-8', newline='') as f:
            f.write(text + '\n')

    logger.info('wrote %s report to %s', fmt, out_dir)
    return list(paths.values())


def read_report_csv(out_dir: str, stamp: str) -> AggregateReport:
    """
    Parse the tables written by emit_report(fmt='csv')
    :raises DataIntegrityError naming the file and line
    """

    tables = {}
    for name, path in report_paths(out_dir, stamp, 'csv').items():
        if not os.path.exists(path):
            raise DataIntegrityError(f'{path}: file not found')

        with open(path, 'r', encoding='utf-8', newline='') as f:
            reader = csv.reader(f)
            headers = next(reader, None)
            if headers is None or headers[:len(TABLES[name])] != TABLES[name]:
                raise DataIntegrityError(f'{path}:1: unexpected header {headers}')

            rows = []
            for lineno, values in enumerate(reader, start=2):
                if len(values) != len(headers):
                    raise DataIntegrityError(f'{path}:{lineno}: expected {len(headers)} fields')
                try:
                    if name == 'grid':
                        rows.append(GridRow(int(values[0]), values[1], values[2], OrderedDict(
                            (c, int(v)) for c, v in zip(headers[3:], values[3:]))))
                    else:
                        rows.append(ROW_TYPES[name](*[_parse(h, v) for h, v in zip(headers, values)]))
                except ValueError as e:
                    raise DataIntegrityError(f'{path}:{lineno}: {e}')
            tables[name] = rows

    return AggregateReport(**tables)
