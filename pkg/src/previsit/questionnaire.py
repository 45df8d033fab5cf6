"""Stage 3: personal and disease-specific questionnaire generation."""

from __future__ import annotations

import heapq
import logging
from typing import Any, Sequence

from .errors import EmptyInput, EmptyKnowledge, EmptyQuestionnaire, GenerationFailed
from .jsonscan import iter_json
from .models import (
    DISEASE,
    FREE_TEXT,
    MULTIPLE_CHOICE,
    PERSONAL,
    AtomicAssertion,
    CausalNetwork,
    DiseaseKnowledge,
    Question,
    Questionnaire,
)
from .prompts import PromptTemplate, edge_lines, enumerate_assertions, get_template, repair_suffix, tagged
from .providers import GenerationRequest, Generator

logger = logging.getLogger(__name__)


def _strongly_connected(n: int, succ: list[list[int]]) -> list[int]:
    """Component label per node (iterative Tarjan)."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            if i < len(succ[v]):
                work.append((v, i + 1))
                w = succ[v][i]
                if index[w] == -1:
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return comp


def order_assertions(net: CausalNetwork) -> list[int]:
    """Question order for a network's assertions.

    Linked assertions come first in topological order, lowest id first among
    the ready ones. A cycle is emitted as a block, ascending by id, once
    everything leading into it has been emitted. Unlinked assertions follow in
    ascending id order.
    """
    n = len(net.nodes)
    succ: list[list[int]] = [[] for _ in range(n)]
    linked = [False] * n
    for s, d in net.edges:
        succ[s].append(d)
        linked[s] = linked[d] = True
    comp = _strongly_connected(n, succ)
    ncomp = max(comp, default=-1) + 1
    members: list[list[int]] = [[] for _ in range(ncomp)]
    for v in range(n):
        if linked[v]:
            members[comp[v]].append(v)
    indeg = [0] * ncomp
    csucc: list[set[int]] = [set() for _ in range(ncomp)]
    for s, d in net.edges:
        cs, cd = comp[s], comp[d]
        if cs != cd and cd not in csucc[cs]:
            csucc[cs].add(cd)
            indeg[cd] += 1
    heap = [(members[c][0], c) for c in range(ncomp) if members[c] and indeg[c] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        _, c = heapq.heappop(heap)
        order.extend(members[c])
        for d in csucc[c]:
            indeg[d] -= 1
            if indeg[d] == 0:
                heapq.heappush(heap, (members[d][0], d))
    order.extend(v for v in range(n) if not linked[v])
    return [net.nodes[v].id for v in order]


def build_personal_prompt(
    assertions: Sequence[AtomicAssertion],
    net: CausalNetwork,
    template: PromptTemplate | None = None,
) -> str:
    if not assertions:
        raise EmptyInput("no assertions to ask about")
    template = template or get_template("personal_questionnaire")
    order = order_assertions(net) if len(net.nodes) == len(assertions) else [a.id for a in assertions]
    payload = (
        tagged("assertions", enumerate_assertions(assertions, order))
        + "\n\n"
        + tagged("edges", edge_lines(net.edges))
    )
    return template.render(payload)


def build_disease_prompt(dk: DiseaseKnowledge, template: PromptTemplate | None = None) -> str:
    if not dk.entries:
        raise EmptyKnowledge(f"{dk.disease_code}: no representative networks")
    template = template or get_template("disease_questionnaire")
    entries = sorted(dk.entries, key=lambda e: (-e.weight, e.medoid.emr_id))
    blocks = [f"Disease (ICD-10): {dk.disease_code}"]
    for rank, e in enumerate(entries, 1):
        net = e.medoid
        body = (
            tagged("assertions", enumerate_assertions(net.nodes, order_assertions(net)))
            + "\n"
            + tagged("edges", edge_lines(net.edges))
        )
        blocks.append(tagged("pathway", body, rank=rank, weight=f"{e.weight:.4f}", members=e.member_count))
    return template.render("\n\n".join(blocks))


def _question_objects(raw: str) -> list[Any]:
    loose: list[dict] = []
    for value in iter_json(raw):
        if isinstance(value, list):
            return value
        if isinstance(value, dict):
            if isinstance(value.get("questions"), list):
                return value["questions"]
            loose.append(value)
    return loose


def _clean_question(obj: Any, qid: int) -> Question | None:
    if not isinstance(obj, dict):
        return None
    text = obj.get("text", obj.get("question"))
    if not isinstance(text, str) or not text.strip():
        return None
    options = obj.get("options") or []
    if not isinstance(options, list) or not all(isinstance(o, str) and o.strip() for o in options):
        return None
    options = [o.strip() for o in options]
    kind = obj.get("kind") or obj.get("type") or (MULTIPLE_CHOICE if options else FREE_TEXT)
    if kind == MULTIPLE_CHOICE:
        if len(options) < 2:
            return None
    elif kind == FREE_TEXT:
        if options:
            return None
    else:
        return None
    allows = obj.get("allows_free_text", True)
    if not isinstance(allows, bool):
        allows = True
    if kind == FREE_TEXT:
        allows = True
    refs = obj.get("source_assertion_ids") or []
    if not isinstance(refs, list):
        refs = []
    refs = [r for r in refs if (isinstance(r, int) and not isinstance(r, bool)) or (isinstance(r, str) and r)]
    rationale = obj.get("rationale")
    if not isinstance(rationale, str) or not rationale.strip():
        rationale = None
    return Question(qid, text.strip(), kind, tuple(options), allows, tuple(refs), rationale)


def parse_questionnaire(raw: str, kind: str, subject: str) -> Questionnaire:
    questions: list[Question] = []
    for obj in _question_objects(raw):
        q = _clean_question(obj, len(questions))
        if q is None:
            logger.warning("%s %s: dropping malformed question %r", kind, subject, obj)
            continue
        questions.append(q)
    if not questions:
        raise EmptyQuestionnaire(f"{kind} {subject}: no valid questions in model output")
    return Questionnaire(kind, subject, tuple(questions))


def _generate(prompt: str, template: PromptTemplate, kind: str, subject: str, gen: Generator, retries: int, temperature: float) -> Questionnaire:
    for attempt in range(retries + 1):
        text = prompt if attempt == 0 else prompt + repair_suffix(template.locale)
        raw = gen.generate(GenerationRequest(text, temperature=temperature))
        try:
            return parse_questionnaire(raw, kind, subject)
        except EmptyQuestionnaire as exc:
            logger.info("%s: attempt %d unusable: %s", subject, attempt + 1, exc)
    raise GenerationFailed(f"{kind} questionnaire for {subject}: no usable output after {retries + 1} attempts")


def generate_personal(
    emr_id: str,
    assertions: Sequence[AtomicAssertion],
    net: CausalNetwork,
    gen: Generator,
    template: PromptTemplate | None = None,
    retries: int = 2,
    temperature: float = 0.0,
) -> Questionnaire:
    template = template or get_template("personal_questionnaire")
    prompt = build_personal_prompt(assertions, net, template)
    q = _generate(prompt, template, PERSONAL, emr_id, gen, retries, temperature)
    valid = {a.id for a in assertions}
    questions = tuple(
        Question(
            x.id, x.text, x.kind, x.options, x.allows_free_text,
            tuple(r for r in x.source_assertion_ids if r in valid), x.rationale,
        )
        for x in q.questions
    )
    return Questionnaire(PERSONAL, emr_id, questions)


def generate_disease(
    dk: DiseaseKnowledge,
    gen: Generator,
    template: PromptTemplate | None = None,
    retries: int = 2,
    temperature: float = 0.0,
) -> Questionnaire:
    template = template or get_template("disease_questionnaire")
    prompt = build_disease_prompt(dk, template)
    return _generate(prompt, template, DISEASE, dk.disease_code, gen, retries, temperature)
