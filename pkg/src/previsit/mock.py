"""Rule-based stand-in for the language model, used in offline runs and tests.

:func:`cooperative_responder` reads the tagged input block of any stage prompt
and answers in that stage's output format: sentence-split assertions, a
seeded tree of causal links, and one question per assertion. Every reply is
a pure function of (prompt, seed).
"""

from __future__ import annotations

import hashlib
import json
import re

_EMR = re.compile(r"<emr>\n(.*?)\n</emr>", re.S)
_ASSERTIONS = re.compile(r"<assertions>\n(.*?)\n</assertions>", re.S)
_PATHWAY = re.compile(r"<pathway rank=(\d+)[^>]*>\n(.*?)\n</pathway>", re.S)
_ITEM = re.compile(r"^\[(\d+)\] (.*?)(?: \(relative time: (.*)\))?$")
_SENTENCE_END = re.compile(r"(?<!\d)\.|\.(?!\d)|[;!?。；！？\n]")
_TIMING = re.compile(
    r"\s*,?\s*\b((?:over |about |approximately |nearly |more than )?"
    r"(?:\d+(?:\.\d+)?|one|two|three|four|five|six|seven|eight|nine|ten|several|a few)\s+"
    r"(?:days?|weeks?|months?|years?)\s+ago)\b",
    re.I,
)
_FOR_SPAN = re.compile(r"\s+for\s+((?:\d+(?:\.\d+)?|several|a few)\s+(?:days?|weeks?|months?|years?))\b", re.I)


def _h(seed: int, *parts: str) -> int:
    data = "\x00".join([str(seed), *parts]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big")


def _split_facts(text: str) -> list[tuple[str, str]]:
    facts = []
    for chunk in _SENTENCE_END.split(text):
        sentence = chunk.strip(" ,\t")
        if not re.search(r"\w", sentence):
            continue
        when = ""
        m = _TIMING.search(sentence)
        if m:
            when = m.group(1)
            sentence = (sentence[: m.start()] + sentence[m.end() :]).strip(" ,")
        else:
            m = _FOR_SPAN.search(sentence)
            if m:
                when = f"{m.group(1)} ago"
                sentence = (sentence[: m.start()] + sentence[m.end() :]).strip(" ,")
        if re.search(r"\w", sentence):
            facts.append((sentence[0].upper() + sentence[1:], when[0].upper() + when[1:] if when else ""))
    return facts


def _items(block: str) -> list[tuple[int, str, str]]:
    out = []
    for line in block.splitlines():
        m = _ITEM.match(line.strip())
        if m:
            out.append((int(m.group(1)), m.group(2), m.group(3) or ""))
    return out


def _respond_extraction(emr: str) -> str:
    facts = _split_facts(emr)
    if not facts:
        return "I cannot identify any medical facts in this record."
    return "\n".join(json.dumps({"assert": a, "relative time": t}, ensure_ascii=False) for a, t in facts)


def _respond_network(items: list[tuple[int, str, str]], seed: int) -> str:
    lines = []
    ids = [i for i, _, _ in items]
    for pos in range(1, len(ids)):
        child = ids[pos]
        parent = ids[_h(seed, "parent", items[pos][1], str(pos)) % pos]
        lines.append(json.dumps({"from": parent, "to": child, "relation": "leads to"}))
    return "\n".join(lines) if lines else "[]"


def _question(label, fact: str, when: str) -> list[dict]:
    qs = [
        {
            "text": f"Is the following true for you: {fact}?",
            "kind": "multiple_choice",
            "options": ["Yes", "No", "Not sure"],
            "allows_free_text": True,
            "source_assertion_ids": [label],
            "rationale": "Confirms a recorded fact.",
        }
    ]
    if when:
        qs.append(
            {
                "text": f"When did this start: {fact}?",
                "kind": "multiple_choice",
                "options": [when, "More recently", "Earlier", "I don't remember"],
                "allows_free_text": True,
                "source_assertion_ids": [label],
                "rationale": "Confirms the timing.",
            }
        )
    return qs


def _respond_personal(items: list[tuple[int, str, str]]) -> str:
    qs = [q for i, a, t in items for q in _question(i, a, t)]
    return "```json\n" + json.dumps(qs, ensure_ascii=False, indent=2) + "\n```"


def _respond_disease(pathways: list[tuple[int, str]]) -> str:
    qs: list[dict] = []
    seen: set[str] = set()
    for rank, body in sorted(pathways):
        block = _ASSERTIONS.search(body)
        for i, a, t in _items(block.group(1) if block else ""):
            key = a.lower()
            if key in seen:
                continue
            seen.add(key)
            qs.extend(_question(f"{rank}.{i}", a, t))
    return "```json\n" + json.dumps(qs, ensure_ascii=False, indent=2) + "\n```"


def cooperative_responder(prompt: str, seed: int) -> str:
    pathways = _PATHWAY.findall(prompt)
    if pathways:
        return _respond_disease([(int(r), b) for r, b in pathways])
    assertions = _ASSERTIONS.search(prompt)
    emr = _EMR.search(prompt)
    if assertions and emr:
        return _respond_network(_items(assertions.group(1)), seed)
    if assertions:
        return _respond_personal(_items(assertions.group(1)))
    if emr:
        return _respond_extraction(emr.group(1))
    return "I am not sure what you are asking for."
