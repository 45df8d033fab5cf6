"""Domain types shared by every pipeline stage.

All types are frozen dataclasses; collections are stored as tuples so a value
can be handed to concurrent workers without copying.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

# corpus files spell the timing key with a space
ASSERT_KEY = "assert"
TIME_KEY = "relative time"

# top-level conjunctions that usually mean two facts were fused into one assertion
DEFAULT_CONJUNCTIONS = ("and", "as well as", "along with", "together with")

PERSONAL = "personal"
DISEASE = "disease"
MULTIPLE_CHOICE = "multiple_choice"
FREE_TEXT = "free_text"


@dataclass(frozen=True)
class EmrDocument:
    id: str
    text: str
    disease_code: str = ""
    department: str | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.id, "disease_code": self.disease_code, "text": self.text}
        if self.department is not None:
            d["department"] = self.department
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EmrDocument":
        emr = cls(
            id=str(d["id"]),
            text=str(d["text"]),
            disease_code=str(d.get("disease_code") or ""),
            department=d.get("department"),
        )
        if not emr.text.strip():
            raise ValueError(f"EMR {emr.id!r} has empty text")
        return emr


@dataclass(frozen=True)
class AtomicAssertion:
    id: int
    assert_: str
    relative_time: str = ""

    def text(self, with_timing: bool = True) -> str:
        """Text used for embedding: the fact, plus its timing when stated."""
        if with_timing and self.relative_time:
            return f"{self.assert_}, {self.relative_time}"
        return self.assert_

    def to_dict(self) -> dict[str, Any]:
        return {ASSERT_KEY: self.assert_, TIME_KEY: self.relative_time}

    @classmethod
    def from_dict(cls, d: dict[str, Any], id: int) -> "AtomicAssertion":
        t = d.get(TIME_KEY, d.get("relative_time", ""))
        return cls(id=id, assert_=str(d[ASSERT_KEY]), relative_time="" if t is None else str(t))


@dataclass(frozen=True)
class CausalNetwork:
    emr_id: str
    nodes: tuple[AtomicAssertion, ...]
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple((int(s), int(d)) for s, d in self.edges))

    def to_dict(self) -> dict[str, Any]:
        return {
            "emr_id": self.emr_id,
            "nodes": [a.to_dict() for a in self.nodes],
            "edges": [[s, d] for s, d in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CausalNetwork":
        nodes = tuple(AtomicAssertion.from_dict(n, i) for i, n in enumerate(d["nodes"]))
        return cls(emr_id=str(d["emr_id"]), nodes=nodes, edges=tuple(tuple(e) for e in d["edges"]))


@dataclass(frozen=True)
class SimilarityMatrix:
    network_ids: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]

    def __len__(self) -> int:
        return len(self.network_ids)

    def __getitem__(self, ij: tuple[int, int]) -> float:
        i, j = ij
        return self.values[i][j]

    def to_dict(self) -> dict[str, Any]:
        return {"ids": list(self.network_ids), "values": [list(r) for r in self.values]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SimilarityMatrix":
        return cls(tuple(d["ids"]), tuple(tuple(float(x) for x in r) for r in d["values"]))


@dataclass(frozen=True)
class ClusterResult:
    assignments: dict[str, int]
    cluster_count: int
    cutoff: float

    def members(self) -> list[list[str]]:
        groups: list[list[str]] = [[] for _ in range(self.cluster_count)]
        for net_id, c in self.assignments.items():
            groups[c].append(net_id)
        return groups

    def sizes(self) -> list[int]:
        return [len(g) for g in self.members()]

    def to_dict(self) -> dict[str, Any]:
        return {"assignments": dict(self.assignments), "cluster_count": self.cluster_count, "cutoff": self.cutoff}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ClusterResult":
        return cls(dict(d["assignments"]), int(d["cluster_count"]), float(d["cutoff"]))


@dataclass(frozen=True)
class KnowledgeEntry:
    medoid: CausalNetwork
    weight: float
    member_count: int


@dataclass(frozen=True)
class DiseaseKnowledge:
    disease_code: str
    entries: tuple[KnowledgeEntry, ...]
    cutoff: float = 0.5

    def to_dict(self) -> dict[str, Any]:
        return {
            "disease_code": self.disease_code,
            "cutoff": self.cutoff,
            "entries": [
                {
                    "weight": e.weight,
                    "member_count": e.member_count,
                    "medoid_emr_id": e.medoid.emr_id,
                    "network": e.medoid.to_dict(),
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DiseaseKnowledge":
        entries = tuple(
            KnowledgeEntry(CausalNetwork.from_dict(e["network"]), float(e["weight"]), int(e["member_count"]))
            for e in d["entries"]
        )
        return cls(str(d["disease_code"]), entries, float(d.get("cutoff", 0.5)))


@dataclass(frozen=True)
class Question:
    id: int
    text: str
    kind: str = MULTIPLE_CHOICE
    options: tuple[str, ...] = ()
    allows_free_text: bool = True
    source_assertion_ids: tuple[int | str, ...] = ()
    rationale: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        object.__setattr__(self, "source_assertion_ids", tuple(self.source_assertion_ids))

    def match_text(self) -> str:
        """Question text followed by its options, as compared against key facts."""
        if self.options:
            return f"{self.text} {'; '.join(self.options)}"
        return self.text

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "kind": self.kind,
            "options": list(self.options),
            "allows_free_text": self.allows_free_text,
            "source_assertion_ids": list(self.source_assertion_ids),
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Question":
        return cls(
            id=int(d["id"]),
            text=d["text"],
            kind=d["kind"],
            options=tuple(d.get("options") or ()),
            allows_free_text=bool(d.get("allows_free_text", True)),
            source_assertion_ids=tuple(d.get("source_assertion_ids") or ()),
            rationale=d.get("rationale"),
        )


@dataclass(frozen=True)
class Questionnaire:
    kind: str
    subject: str
    questions: tuple[Question, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "questions", tuple(self.questions))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "subject": self.subject, "questions": [q.to_dict() for q in self.questions]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Questionnaire":
        return cls(d["kind"], d["subject"], tuple(Question.from_dict(q) for q in d["questions"]))

    def render(self) -> str:
        """Plain-text export for reading or printing."""
        title = "Personal" if self.kind == PERSONAL else "Disease-specific"
        lines = [f"{title} pre-consultation questionnaire: {self.subject}", ""]
        for n, q in enumerate(self.questions, 1):
            lines.append(f"{n}. {q.text}")
            for letter, opt in zip("ABCDEFGHIJKLMNOPQRSTUVWXYZ", q.options):
                lines.append(f"   {letter}. {opt}")
            if q.kind == FREE_TEXT:
                lines.append("   Answer: ____________")
            elif q.allows_free_text:
                lines.append("   Other (please describe): ____________")
            lines.append("")
        return "\n".join(lines)


def validate_assertions(
    assertions: Sequence[AtomicAssertion],
    conjunctions: Iterable[str] = DEFAULT_CONJUNCTIONS,
) -> list[str]:
    """Return a list of violation messages; an empty list means the input is valid.

    Fused facts ("headache and fever") are reported with a ``warning:`` prefix
    and do not make the list invalid by themselves; use :func:`errors_only`.
    """
    problems: list[str] = []
    seen: set[int] = set()
    pattern = _conjunction_pattern(tuple(conjunctions))
    for a in assertions:
        if a.id in seen:
            problems.append(f"duplicate assertion id {a.id}")
        seen.add(a.id)
        if not a.assert_.strip():
            problems.append(f"assertion {a.id}: empty assert")
        elif pattern is not None and pattern.search(a.assert_):
            problems.append(f"warning: assertion {a.id} may combine several facts: {a.assert_!r}")
    return problems


def errors_only(report: Sequence[str]) -> list[str]:
    return [p for p in report if not p.startswith("warning:")]


def _conjunction_pattern(words: tuple[str, ...]) -> re.Pattern[str] | None:
    if not words:
        return None
    alts = "|".join(re.escape(w) for w in words)
    return re.compile(rf"\s(?:{alts})\s", re.IGNORECASE)


def validate_network(net: CausalNetwork) -> list[str]:
    """Report dangling edge endpoints, self-loops and duplicate edges."""
    problems: list[str] = []
    n = len(net.nodes)
    seen: set[tuple[int, int]] = set()
    for s, d in net.edges:
        if not (0 <= s < n and 0 <= d < n):
            problems.append(f"edge ({s}, {d}) references a missing node")
        if s == d:
            problems.append(f"self-loop on node {s}")
        if (s, d) in seen:
            problems.append(f"duplicate edge ({s}, {d})")
        seen.add((s, d))
    return problems
