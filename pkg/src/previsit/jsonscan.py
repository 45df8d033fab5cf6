"""Recover JSON values embedded in free-form model output."""

from __future__ import annotations

import json
from typing import Any, Iterator

_decoder = json.JSONDecoder()


def iter_json(text: str, openers: str = "{[") -> Iterator[Any]:
    """Yield every top-level JSON object/array found in ``text``, left to right.

    Code fences, prose, trailing commas between values and line wrapping
    inside a value are all tolerated; a malformed value is skipped and the
    scan resumes at the next opening bracket.
    """
    i, n = 0, len(text)
    while i < n:
        if text[i] not in openers:
            i += 1
            continue
        try:
            value, end = _decoder.raw_decode(text, i)
        except (ValueError, RecursionError):
            i += 1
            continue
        yield value
        i = end


def iter_objects(text: str) -> Iterator[dict]:
    for v in iter_json(text, "{"):
        if isinstance(v, dict):
            yield v
