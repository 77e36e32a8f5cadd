import json
import logging
import os
from collections import OrderedDict
from typing import Dict, Iterable, List, Tuple

from schematics.exceptions import BaseError, DataError

from reta.models.custom_types import AggregateReport, AggregateRow, AuditRow, CategoryRow, FeasibilityResult, \
    GridRow, HallucinationRow, HallucinationSummary, LevelCounts, ReportedTuple, ScopeRow
from reta.models.dtos.eval_dto import GROUPS, METRICS, SCOPES, HallucinationDTO, ModelEntryDTO, QuestionDTO, \
    ScoreRecordDTO
from reta.models.utils import AssetIntegrityError, CoverageError, DataIntegrityError, PreconditionError, \
    UnresolvedConflictError
from reta.utils import check_format_version, read_jsonl

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'data')
ASSET_VERSION = '1.0.0'
N_QUESTIONS = 19

# Published figures where the question count, 3-point count, 1-point count and total are all stated
REPORTED_TUPLES = [
    ReportedTuple('reta', 'accuracy', 19, 12, 3, 47),
    ReportedTuple('gpt-4', 'accuracy', 19, 8, 1, 43),
    ReportedTuple('bing', 'accuracy', 19, 7, 10, 34),
]

ScoreKey = Tuple[int, str, str]


def _load_asset(name: str, path: str = None) -> dict:
    path = path or os.path.join(DATA_DIR, name)
    if not os.path.exists(path):
        raise AssetIntegrityError(f'{path}: asset missing')

    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except ValueError as e:
        raise AssetIntegrityError(f'{path}: {e}')

    if not isinstance(data, dict):
        raise AssetIntegrityError(f'{path}: top level must be an object')
    check_format_version(str(data.get('version')), ASSET_VERSION, path)
    return data


def _validated(dto_class, row, where: str):
    try:
        dto = dto_class(row)
        dto.validate()
    except (DataError, BaseError) as e:
        raise DataIntegrityError(f'{where}: {e}')
    return dto


def feasibility_audit(n_questions: int, c3: int, c1: int, total: int) -> FeasibilityResult:
    """
    Check whether a (n, c3, c1, total) tuple can come from integer 1-3 scores
    :raises PreconditionError on negative input
    :returns FeasibilityResult with the implied 2-point count and residual
    """

    if min(n_questions, c3, c1, total) < 0:
        raise PreconditionError('reported figures must be non-negative')

    c2 = n_questions - c3 - c1
    if c2 < 0:
        return FeasibilityResult(False, None, None, None,
                                 f'3-point and 1-point counts ({c3} + {c1}) exceed {n_questions} questions')

    implied = 3 * c3 + 2 * c2 + c1
    residual = total - implied
    if residual:
        return FeasibilityResult(False, c2, implied, residual,
                                 f'implied total 3*{c3} + 2*{c2} + {c1} = {implied} != {total}')

    return FeasibilityResult(True, c2, implied, 0, '')


class EvaluationService():
    @staticmethod
    def load_question_set(path: str = None) -> List[QuestionDTO]:
        """
        The benchmark questions, ordered by id
        :raises AssetIntegrityError when the asset is missing, malformed or incomplete
        """

        data = _load_asset('questions.json', path)
        questions = []
        for i, row in enumerate(data.get('questions') or []):
            try:
                question = QuestionDTO(row)
                question.validate()
            except (DataError, BaseError) as e:
                raise AssetIntegrityError(f'questions.json: question {i}: {e}')
            questions.append(question)

        ids = [q.id for q in questions]
        if sorted(ids) != list(range(1, N_QUESTIONS + 1)):
            raise AssetIntegrityError(f'questions.json: ids must be unique and cover 1..{N_QUESTIONS}')

        return sorted(questions, key=lambda q: q.id)

    @staticmethod
    def load_model_registry(path: str = None) -> List[ModelEntryDTO]:
        data = _load_asset('models.json', path)
        models = []
        for i, row in enumerate(data.get('models') or []):
            try:
                model = ModelEntryDTO(row)
                model.validate()
            except (DataError, BaseError) as e:
                raise AssetIntegrityError(f'models.json: model {i}: {e}')
            models.append(model)

        ids = [m.model_id for m in models]
        if len(set(ids)) != len(ids):
            raise AssetIntegrityError('models.json: model ids must be unique')

        return models

    @staticmethod
    def load_rubric(path: str = None) -> Dict[str, Dict[int, str]]:
        """ Level descriptions per metric """

        rubric = _load_asset('rubric.json', path).get('rubric') or {}
        result = OrderedDict()
        for metric in METRICS:
            levels = rubric.get(metric) or {}
            if sorted(levels) != ['1', '2', '3']:
                raise AssetIntegrityError(f'rubric.json: {metric} must describe levels 1, 2 and 3')
            result[metric] = {int(level): text for level, text in sorted(levels.items())}
        return result

    @staticmethod
    def load_scores(path: str) -> List[ScoreRecordDTO]:
        """
        Score records, one JSON object per line
        :raises DataIntegrityError naming the file and line
        """

        return [_validated(ScoreRecordDTO, row, f'{path}:{i}') for i, row in enumerate(read_jsonl(path), start=1)]

    @staticmethod
    def load_annotations(path: str) -> List[HallucinationDTO]:
        return [_validated(HallucinationDTO, row, f'{path}:{i}') for i, row in enumerate(read_jsonl(path), start=1)]

    @staticmethod
    def adjudicate(records: List[ScoreRecordDTO]) -> ScoreRecordDTO:
        """
        Final score for one (question, model, metric): the adjudicator's record
        when there is one, else the reviewers' common score
        :raises PreconditionError, DataIntegrityError, UnresolvedConflictError
        """

        if not records:
            raise PreconditionError('adjudication needs at least one record')

        keys = {r.key() for r in records}
        if len(keys) != 1:
            raise PreconditionError(f'records span several triples: {sorted(keys)}')

        adjudicated = [r for r in records if r.adjudicated]
        if len(adjudicated) > 1:
            raise DataIntegrityError(f'{records[0].key()}: {len(adjudicated)} adjudicated records')

        if adjudicated:
            chosen = adjudicated[0]
        else:
            scores = {r.score for r in records}
            if len(scores) > 1:
                raise UnresolvedConflictError(
                    f'{records[0].key()}: reviewers disagree ({sorted(scores)}) and nobody adjudicated',
                    reviewers=sorted(r.reviewer_id for r in records))
            chosen = records[0]

        final = ScoreRecordDTO(chosen.to_primitive())
        final.adjudicated = True
        return final

    @staticmethod
    def resolve_scores(records: Iterable[ScoreRecordDTO]) -> Dict[ScoreKey, ScoreRecordDTO]:
        """ Group raw records by (question, model, metric) and adjudicate each group """

        groups = OrderedDict()
        for record in records:
            groups.setdefault(record.key(), []).append(record)

        return OrderedDict((key, EvaluationService.adjudicate(group)) for key, group in groups.items())

    @staticmethod
    def score_vector(scores: Iterable[ScoreRecordDTO], model_id: str, metric: str,
                     question_ids: Iterable[int] = None) -> Dict[int, int]:
        """
        Adjudicated score per question for one model and metric
        :raises CoverageError naming the questions without a score
        """

        question_ids = list(question_ids or range(1, N_QUESTIONS + 1))
        relevant = [r for r in scores if r.model_id == model_id and r.metric == metric]
        resolved = EvaluationService.resolve_scores(relevant)
        vector = {key[0]: record.score for key, record in resolved.items()}

        missing = [q for q in question_ids if q not in vector]
        if missing:
            raise CoverageError(f'{model_id}/{metric}: no score for questions {missing}',
                                missing=[(q, model_id, metric) for q in missing])

        return OrderedDict((q, vector[q]) for q in question_ids)

    @staticmethod
    def count_by_level(scores, model_id: str, metric: str, question_ids=None) -> LevelCounts:
        vector = EvaluationService.score_vector(scores, model_id, metric, question_ids)
        values = list(vector.values())
        return LevelCounts(values.count(1), values.count(2), values.count(3))

    @staticmethod
    def total_score(scores, model_id: str, metric: str, question_ids=None) -> int:
        return sum(EvaluationService.score_vector(scores, model_id, metric, question_ids).values())

    @staticmethod
    def category_summary(scores, model_id: str, metric: str, questions: List[QuestionDTO] = None) -> Dict[str, int]:
        """ Summed score per question group; the sums add up to the total """

        questions = questions or EvaluationService.load_question_set()
        vector = EvaluationService.score_vector(scores, model_id, metric, [q.id for q in questions])

        sums = OrderedDict((group, 0) for group in GROUPS)
        for question in questions:
            sums[question.group] += vector[question.id]
        return sums

    @staticmethod
    def scope_summary(scores, model_id: str, metric: str, questions: List[QuestionDTO] = None) -> Dict[str, int]:
        questions = questions or EvaluationService.load_question_set()
        vector = EvaluationService.score_vector(scores, model_id, metric, [q.id for q in questions])

        sums = OrderedDict((scope, 0) for scope in SCOPES)
        for question in questions:
            sums[question.scope] += vector[question.id]
        return sums

    @staticmethod
    def hallucination_summary(annotations: Iterable[HallucinationDTO], model_id: str) -> HallucinationSummary:
        """
        (total hallucinations, questions with at least one) for a model
        :raises DataIntegrityError on a repeated (question, model) annotation
        """

        seen = set()
        total = 0
        affected = 0
        for annotation in annotations:
            if annotation.model_id != model_id:
                continue
            if annotation.question_id in seen:
                raise DataIntegrityError(f'question {annotation.question_id}/{model_id} annotated twice')
            seen.add(annotation.question_id)

            total += annotation.count
            affected += annotation.count >= 1

        return HallucinationSummary(total, affected)

    @staticmethod
    def audit_rows(source: str, tuples: Iterable[ReportedTuple]) -> List[AuditRow]:
        rows = []
        for t in tuples:
            result = feasibility_audit(t.n_questions, t.c3, t.c1, t.total)
            if not result.feasible:
                logger.warning('%s %s/%s tuple is infeasible: %s', source, t.model_id, t.metric, result.reason)
            rows.append(AuditRow(source, t.model_id, t.metric, t.n_questions, t.c3, t.c1, t.total,
                                 result.feasible, result.c2, result.implied_total, result.residual, result.reason))
        return rows

    @staticmethod
    def build_report(scores: List[ScoreRecordDTO], annotations: List[HallucinationDTO] = None,
                     questions: List[QuestionDTO] = None, models: List[ModelEntryDTO] = None,
                     reported: List[ReportedTuple] = None) -> AggregateReport:
        """
        Every aggregate for the (model, metric) pairs present in the scores
        :params scores, annotations, questions, models, reported

        :raises CoverageError listing every missing (question, model, metric)
        :returns AggregateReport
        """

        annotations = annotations or []
        questions = questions or EvaluationService.load_question_set()
        models = models or EvaluationService.load_model_registry()
        reported = REPORTED_TUPLES if reported is None else reported
        question_ids = [q.id for q in questions]

        registry = [m.model_id for m in models]
        present = {r.model_id for r in scores} | {a.model_id for a in annotations}
        unknown = sorted(present - set(registry))
        if unknown:
            logger.warning('models outside the registry: %s', ', '.join(unknown))
        model_ids = [m for m in registry if m in present] + unknown

        pairs = [(m, metric) for m in model_ids for metric in METRICS
                 if any(r.model_id == m and r.metric == metric for r in scores)]

        vectors = OrderedDict()
        missing = []
        for model_id, metric in pairs:
            try:
                vectors[(model_id, metric)] = EvaluationService.score_vector(scores, model_id, metric, question_ids)
            except CoverageError as e:
                missing.extend(e.missing)
        if missing:
            listed = ', '.join(f'{q}/{m}/{metric}' for q, m, metric in missing)
            raise CoverageError(f'{len(missing)} (question, model, metric) triples have no score: {listed}',
                                missing=missing)

        aggregates, categories, scopes, computed = [], [], [], []
        for (model_id, metric), vector in vectors.items():
            values = list(vector.values())
            counts = LevelCounts(values.count(1), values.count(2), values.count(3))
            total = sum(values)
            feasible = feasibility_audit(len(values), counts.c3, counts.c1, total).feasible
            aggregates.append(AggregateRow(model_id, metric, counts.c1, counts.c2, counts.c3, total, feasible))
            computed.append(ReportedTuple(model_id, metric, len(values), counts.c3, counts.c1, total))

            for group in GROUPS:
                categories.append(CategoryRow(model_id, metric, group, sum(
                    vector[q.id] for q in questions if q.group == group)))
            for scope in SCOPES:
                scopes.append(ScopeRow(model_id, metric, scope, sum(
                    vector[q.id] for q in questions if q.scope == scope)))

        hallucinations = []
        for model_id in model_ids:
            summary = EvaluationService.hallucination_summary(annotations, model_id)
            hallucinations.append(HallucinationRow(model_id, summary.total, summary.affected_questions))

        grid = []
        for question in sorted(questions, key=lambda q: (GROUPS.index(q.group), q.id)):
            grid.append(GridRow(question.id, question.group, question.scope, OrderedDict(
                (f'{model_id}/{metric}', vector[question.id]) for (model_id, metric), vector in vectors.items()
            )))

        audits = EvaluationService.audit_rows('computed', computed) + EvaluationService.audit_rows('reported', reported)

        return AggregateReport(aggregates, categories, scopes, hallucinations, grid, audits)
