from typing import Dict, List, NamedTuple, Optional, Tuple

SegmentKey = Tuple[str, int]


class RawArticle(NamedTuple):
    """ efetch payload for one article, bytes exactly as served """

    pmc_id: str
    xml: bytes


class Segment(NamedTuple):
    pmc_id: str
    index: int
    text: str
    token_count: int

    @property
    def key(self) -> SegmentKey:
        return (self.pmc_id, self.index)


class RetrievedSegment(NamedTuple):
    segment: Segment
    score: float


class StageOneAnswer(NamedTuple):
    key: SegmentKey
    text: str
    is_refusal: bool


class FinalAnswer(NamedTuple):
    query: str
    answer: str
    provenance: List[SegmentKey]
    stage_one_answers: List[StageOneAnswer]


class LevelCounts(NamedTuple):
    c1: int
    c2: int
    c3: int

    @property
    def total(self) -> int:
        return 3 * self.c3 + 2 * self.c2 + self.c1


class HallucinationSummary(NamedTuple):
    total: int
    affected_questions: int


class FeasibilityResult(NamedTuple):
    """ Outcome of checking a reported (n, c3, c1, total) tuple

        c2 - implied two-point count, None when negative
        implied_total - 3*c3 + 2*c2 + c1 for the implied c2
        residual - reported total minus implied total
    """

    feasible: bool
    c2: Optional[int]
    implied_total: Optional[int]
    residual: Optional[int]
    reason: str


class AggregateRow(NamedTuple):
    model_id: str
    metric: str
    c1: int
    c2: int
    c3: int
    total: int
    feasible: bool


class CategoryRow(NamedTuple):
    model_id: str
    metric: str
    group: str
    total: int


class HallucinationRow(NamedTuple):
    model_id: str
    total: int
    affected_questions: int


class GridRow(NamedTuple):
    question_id: int
    group: str
    scope: str
    scores: Dict[str, int]


class ScopeRow(NamedTuple):
    model_id: str
    metric: str
    scope: str
    total: int


class ReportedTuple(NamedTuple):
    """ A published (n, 3-point count, 1-point count, total) figure """

    model_id: str
    metric: str
    n_questions: int
    c3: int
    c1: int
    total: int


class AuditRow(NamedTuple):
    source: str
    model_id: str
    metric: str
    n_questions: int
    c3: int
    c1: int
    total: int
    feasible: bool
    implied_c2: Optional[int]
    implied_total: Optional[int]
    residual: Optional[int]
    reason: str


class AggregateReport(NamedTuple):
    aggregates: List[AggregateRow]
    categories: List[CategoryRow]
    scopes: List[ScopeRow]
    hallucinations: List[HallucinationRow]
    grid: List[GridRow]
    audits: List[AuditRow]
