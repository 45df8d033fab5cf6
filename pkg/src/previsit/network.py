"""Stage 2a: personal causal network construction."""

from __future__ import annotations

import logging
from typing import Sequence

from .errors import EmptyInput, NetworkFailed
from .jsonscan import iter_json
from .models import AtomicAssertion, CausalNetwork, EmrDocument, validate_network
from .prompts import PromptTemplate, enumerate_assertions, get_template, repair_suffix, tagged
from .providers import GenerationRequest, Generator

logger = logging.getLogger(__name__)


def build_network_prompt(
    emr: EmrDocument,
    assertions: Sequence[AtomicAssertion],
    template: PromptTemplate | None = None,
) -> str:
    if not assertions:
        raise EmptyInput(f"EMR {emr.id}: no assertions to link")
    template = template or get_template("network")
    payload = tagged("emr", emr.text.strip()) + "\n\n" + tagged("assertions", enumerate_assertions(assertions))
    return template.render(payload)


def _as_index(v) -> int | None:
    # bool is an int subclass; "true" is not an index
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    return None


def _scan_edges(raw: str, n: int) -> tuple[list[tuple[int, int]], bool]:
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    interpretable = False
    for value in iter_json(raw):
        if isinstance(value, list):
            if not value:
                interpretable = True
            objs = [v for v in value if isinstance(v, dict)]
        elif isinstance(value, dict):
            objs = [value]
        else:
            continue
        for obj in objs:
            if "from" not in obj or "to" not in obj:
                continue
            interpretable = True
            s, d = _as_index(obj["from"]), _as_index(obj["to"])
            if s is None or d is None:
                logger.warning("dropping edge with non-integer endpoints: %r", obj)
                continue
            if not (0 <= s < n and 0 <= d < n):
                logger.warning("dropping out-of-range edge (%d, %d), %d assertions", s, d, n)
                continue
            if s == d:
                logger.warning("dropping self-loop on %d", s)
                continue
            if (s, d) in seen:
                logger.warning("dropping duplicate edge (%d, %d)", s, d)
                continue
            seen.add((s, d))
            edges.append((s, d))
    return edges, interpretable


def parse_edges(raw: str, n_assertions: int) -> list[tuple[int, int]]:
    """Directed index pairs from ``{"from": i, "to": j}`` objects, in first-seen order."""
    if n_assertions < 1:
        raise ValueError("n_assertions must be >= 1")
    return _scan_edges(raw, n_assertions)[0]


def build_personal_network(
    emr: EmrDocument,
    assertions: Sequence[AtomicAssertion],
    gen: Generator,
    template: PromptTemplate | None = None,
    retries: int = 2,
    temperature: float = 0.0,
) -> CausalNetwork:
    template = template or get_template("network")
    prompt = build_network_prompt(emr, assertions, template)
    nodes = tuple(assertions)
    for attempt in range(retries + 1):
        text = prompt if attempt == 0 else prompt + repair_suffix(template.locale)
        raw = gen.generate(GenerationRequest(text, temperature=temperature))
        edges, interpretable = _scan_edges(raw, len(nodes))
        if interpretable or not raw.strip():
            net = CausalNetwork(emr.id, nodes, tuple(edges))
            problems = validate_network(net)
            if problems:  # parse_edges already filters these; guard against regressions
                raise NetworkFailed(f"EMR {emr.id}: invalid network: {problems}")
            if not edges:
                logger.info("EMR %s: network has no edges", emr.id)
            return net
        logger.info("EMR %s: network attempt %d had no edge objects", emr.id, attempt + 1)
    raise NetworkFailed(f"EMR {emr.id}: no interpretable edge list after {retries + 1} attempts")
