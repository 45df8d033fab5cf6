"""Stage 1: atomic assertion extraction."""

from __future__ import annotations

import logging

from .errors import EmptyExtraction, ExtractionFailed
from .jsonscan import iter_objects
from .models import ASSERT_KEY, TIME_KEY, AtomicAssertion, EmrDocument, errors_only, validate_assertions
from .prompts import PromptTemplate, get_template, repair_suffix, tagged
from .providers import GenerationRequest, Generator

logger = logging.getLogger(__name__)


def build_extraction_prompt(emr: EmrDocument, template: PromptTemplate | None = None) -> str:
    if not emr.text.strip():
        raise ValueError(f"EMR {emr.id!r} has empty text")
    template = template or get_template("extraction")
    return template.render(tagged("emr", emr.text.strip()))


def parse_assertions(raw: str) -> list[AtomicAssertion]:
    """Pull assertion objects out of model output.

    Accepts JSON Lines, a JSON array, fenced blocks, or objects mixed with
    prose. Objects without a non-empty string ``assert`` are skipped; a
    missing timing becomes ``""``.
    """
    out: list[AtomicAssertion] = []
    for obj in iter_objects(raw):
        fact = obj.get(ASSERT_KEY)
        if not isinstance(fact, str) or not fact.strip():
            continue
        when = obj.get(TIME_KEY, obj.get("relative_time", ""))
        if when is None:
            when = ""
        if not isinstance(when, str):
            continue
        out.append(AtomicAssertion(id=len(out), assert_=fact.strip(), relative_time=when.strip()))
    if not out:
        raise EmptyExtraction("no assertion objects found in model output")
    return out


def extract_assertions(
    emr: EmrDocument,
    gen: Generator,
    template: PromptTemplate | None = None,
    retries: int = 2,
    temperature: float = 0.0,
) -> list[AtomicAssertion]:
    """Prompt, generate, parse and validate; retry with a repair note on failure."""
    template = template or get_template("extraction")
    prompt = build_extraction_prompt(emr, template)
    last = "no attempts made"
    for attempt in range(retries + 1):
        text = prompt if attempt == 0 else prompt + repair_suffix(template.locale)
        raw = gen.generate(GenerationRequest(text, temperature=temperature))
        try:
            assertions = parse_assertions(raw)
        except EmptyExtraction as exc:
            last = str(exc)
            logger.info("EMR %s: extraction attempt %d unusable: %s", emr.id, attempt + 1, exc)
            continue
        report = validate_assertions(assertions)
        for w in report:
            if w.startswith("warning:"):
                logger.debug("EMR %s: %s", emr.id, w)
        problems = errors_only(report)
        if not problems:
            return assertions
        last = "; ".join(problems)
        logger.info("EMR %s: extraction attempt %d invalid: %s", emr.id, attempt + 1, last)
    raise ExtractionFailed(f"EMR {emr.id}: extraction failed after {retries + 1} attempts ({last})")

