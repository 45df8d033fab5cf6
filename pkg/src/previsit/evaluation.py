"""Computable questionnaire metrics: key fact coverage and generation time.

Expert relevance and understandability scores are never computed here; when
supplied they are carried through to the report unchanged.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .errors import EmptyFacts, SubjectMismatch
from .models import Questionnaire

ANNOTATED = "annotated"
DERIVED = "derived_from_assertions"
DEFAULT_TAU = 0.80
MATCHING_NOTE = "coverage uses embedding matching (max cosine >= tau), a stand-in for expert judgement"


@dataclass(frozen=True)
class KeyFactSet:
    subject: str
    facts: tuple[str, ...]
    source: str = ANNOTATED

    def to_dict(self) -> dict[str, Any]:
        return {"subject": self.subject, "facts": list(self.facts), "source": self.source}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "KeyFactSet":
        return cls(str(d["subject"]), tuple(d["facts"]), d.get("source", ANNOTATED))


@dataclass(frozen=True)
class EvalReport:
    subject: str
    coverage: float
    matched: int
    total: int
    generation_time_sec: float | None = None
    relevance: float | None = None
    understandability: float | None = None
    kind: str | None = None

    def __post_init__(self):
        if not 0 <= self.matched <= self.total:
            raise ValueError(f"matched={self.matched} must lie in [0, total={self.total}]")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"subject": self.subject}
        if self.kind is not None:
            d["kind"] = self.kind
        d.update(coverage=self.coverage, matched=self.matched, total=self.total)
        for key in ("generation_time_sec", "relevance", "understandability"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        return d


def coverage_fraction(matched: int, total: int) -> float:
    if total <= 0:
        raise EmptyFacts("coverage needs at least one key fact")
    return matched / total


def best_matches(facts: Sequence[str], q: Questionnaire, embedder) -> list[float]:
    """For each fact, the highest cosine similarity to any question."""
    texts = [x.match_text() for x in q.questions]
    fv = np.stack([v.array() for v in embedder.embed_batch(list(facts))])
    qv = np.stack([v.array() for v in embedder.embed_batch(texts)])
    fn = np.linalg.norm(fv, axis=1)
    qn = np.linalg.norm(qv, axis=1)
    # elementwise products keep each fact's scores independent of question order
    sims = (fv[:, None, :] * qv[None, :, :]).sum(-1) / (fn[:, None] * qn[None, :])
    same = (fv[:, None, :] == qv[None, :, :]).all(-1)
    sims = np.where(same, 1.0, np.clip(sims, -1.0, 1.0))
    return [float(x) for x in sims.max(axis=1)]


def key_fact_coverage(facts: KeyFactSet, q: Questionnaire, embedder, tau: float = DEFAULT_TAU) -> EvalReport:
    """Share of key facts whose best-matching question reaches ``tau``."""
    if not facts.facts:
        raise EmptyFacts(f"{facts.subject}: no key facts")
    if not (0.0 < tau <= 1.0):
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    best = best_matches(facts.facts, q, embedder)
    matched = sum(1 for s in best if s >= tau)
    return EvalReport(facts.subject, coverage_fraction(matched, len(best)), matched, len(best), kind=q.kind)


@dataclass
class Timing:
    subject: str
    elapsed_sec: float
    ok: bool = True


@dataclass
class TimedResult:
    value: Any
    timing: Timing


def measure_generation(
    task: Callable[[], Any],
    subject: str = "",
    sink: list[Timing] | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> TimedResult:
    """Run ``task`` and time it on a monotonic clock.

    On failure the timing is still appended to ``sink`` (marked not ok) and
    attached to the exception as ``timing`` before it propagates.
    """
    start = clock()
    try:
        value = task()
    except BaseException as exc:
        t = Timing(subject, clock() - start, ok=False)
        if sink is not None:
            sink.append(t)
        exc.timing = t
        raise
    t = Timing(subject, clock() - start)
    if sink is not None:
        sink.append(t)
    return TimedResult(value, t)


@dataclass
class CorpusSummary:
    subjects: int
    mean_coverage: float
    total_matched: int
    total_facts: int
    mean_generation_time_sec: float | None = None
    mean_relevance: float | None = None
    mean_understandability: float | None = None
    note: str = MATCHING_NOTE
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        d = {
            "subjects": self.subjects,
            "mean_coverage": self.mean_coverage,
            "total_matched": self.total_matched,
            "total_facts": self.total_facts,
        }
        for key in ("mean_generation_time_sec", "mean_relevance", "mean_understandability"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        d["note"] = self.note
        d.update(self.extra)
        return d


def _mean(xs: Sequence[float]) -> float | None:
    return math.fsum(xs) / len(xs) if xs else None


def build_report(
    subjects: Sequence[str],
    questionnaires: Mapping[str, Questionnaire],
    fact_sets: Mapping[str, KeyFactSet],
    timings: Mapping[str, float] | None = None,
    external_scores: Mapping[str, Mapping[str, float]] | None = None,
    embedder=None,
    tau: float = DEFAULT_TAU,
) -> tuple[list[EvalReport], CorpusSummary]:
    """Per-subject reports plus corpus means.

    Every subject must have both a questionnaire and a fact set. Timings and
    external relevance/understandability scores are optional per subject.
    """
    timings = timings or {}
    external_scores = external_scores or {}
    for s in subjects:
        if s not in questionnaires:
            raise SubjectMismatch(f"{s}: key facts but no questionnaire")
        if s not in fact_sets:
            raise SubjectMismatch(f"{s}: questionnaire but no key facts")
    extra = (set(questionnaires) | set(fact_sets)) - set(subjects)
    if extra:
        raise SubjectMismatch(f"unlisted subjects: {sorted(extra)}")
    reports = []
    for s in subjects:
        r = key_fact_coverage(fact_sets[s], questionnaires[s], embedder, tau)
        ext = external_scores.get(s, {})
        reports.append(
            EvalReport(
                s,
                r.coverage,
                r.matched,
                r.total,
                generation_time_sec=timings.get(s),
                relevance=ext.get("relevance"),
                understandability=ext.get("understandability"),
                kind=questionnaires[s].kind,
            )
        )
    return reports, summarize(reports)


def summarize(reports: Sequence[EvalReport]) -> CorpusSummary:
    return CorpusSummary(
        subjects=len(reports),
        mean_coverage=_mean([r.coverage for r in reports]) or 0.0,
        total_matched=sum(r.matched for r in reports),
        total_facts=sum(r.total for r in reports),
        mean_generation_time_sec=_mean([r.generation_time_sec for r in reports if r.generation_time_sec is not None]),
        mean_relevance=_mean([r.relevance for r in reports if r.relevance is not None]),
        mean_understandability=_mean([r.understandability for r in reports if r.understandability is not None]),
    )


def render_table(reports: Sequence[EvalReport], summary: CorpusSummary) -> str:
    """Plain-text table: one row per subject, then the corpus means."""

    def fmt(v, spec):
        return "-" if v is None else format(v, spec)

    head = f"{'subject':<16} {'kind':<9} {'C':>7} {'matched':>9} {'R':>5} {'U':>5} {'T (s)':>8}"
    lines = [head, "-" * len(head)]
    for r in reports:
        lines.append(
            f"{r.subject:<16} {r.kind or '-':<9} {r.coverage * 100:>6.1f}% {f'{r.matched}/{r.total}':>9} "
            f"{fmt(r.relevance, '.1f'):>5} {fmt(r.understandability, '.1f'):>5} {fmt(r.generation_time_sec, '.2f'):>8}"
        )
    lines.append("-" * len(head))
    lines.append(
        f"{'mean':<16} {'':<9} {summary.mean_coverage * 100:>6.1f}% "
        f"{f'{summary.total_matched}/{summary.total_facts}':>9} "
        f"{fmt(summary.mean_relevance, '.1f'):>5} {fmt(summary.mean_understandability, '.1f'):>5} "
        f"{fmt(summary.mean_generation_time_sec, '.2f'):>8}"
    )
    lines.append(f"note: {summary.note}")
    return "\n".join(lines)
