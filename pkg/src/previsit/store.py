"""Run-directory artifacts: JSON/JSONL files written atomically.

Writers skip the write when the file already holds identical bytes, so a
re-run that reproduces an artifact leaves it untouched.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

from .models import AtomicAssertion, CausalNetwork, DiseaseKnowledge, EmrDocument, Questionnaire

EMR_FILE = "emr.jsonl"
ASSERTIONS_FILE = "assertions.jsonl"
NETWORKS_FILE = "networks.jsonl"
KNOWLEDGE_DIR = "knowledge"
QUESTIONNAIRE_DIR = "questionnaires"
TIMINGS_FILE = "timings.json"
REPORT_FILE = "report.json"
REPORT_TEXT = "report.txt"
MANIFEST_FILE = "manifest.json"


def dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def dumps_line(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False)


def write_text(path: Path, text: str) -> bool:
    """Atomically replace ``path`` with ``text``; return False if nothing changed."""
    path = Path(path)
    data = text.encode("utf-8")
    if path.exists() and path.read_bytes() == data:
        return False
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return True


def write_json(path: Path, obj: Any) -> bool:
    return write_text(path, dumps(obj))


def write_jsonl(path: Path, rows: Iterable[Any]) -> bool:
    return write_text(path, "".join(dumps_line(r) + "\n" for r in rows))


def read_json(path: Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_jsonl(path: Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{n}: {exc}") from exc


def digest(obj: Any) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, ensure_ascii=False).encode("utf-8")).hexdigest()


def safe_name(s: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in s)


# ---------------------------------------------------------------------------
# typed readers and writers


def load_corpus(path: Path) -> list[EmrDocument]:
    docs = [EmrDocument.from_dict(d) for d in read_jsonl(path)]
    seen: set[str] = set()
    for d in docs:
        if d.id in seen:
            raise ValueError(f"{path}: duplicate EMR id {d.id!r}")
        seen.add(d.id)
    return docs


def load_assertions(path: Path) -> dict[str, list[AtomicAssertion]]:
    out: dict[str, list[AtomicAssertion]] = {}
    for row in read_jsonl(path):
        out.setdefault(str(row["emr_id"]), []).append(AtomicAssertion.from_dict(row, int(row["index"])))
    return out


def assertion_rows(emr_id: str, assertions: Iterable[AtomicAssertion]) -> Iterator[dict]:
    for a in assertions:
        yield {"emr_id": emr_id, "index": a.id, **a.to_dict()}


def load_networks(path: Path) -> dict[str, CausalNetwork]:
    return {n.emr_id: n for n in (CausalNetwork.from_dict(d) for d in read_jsonl(path))}


def knowledge_path(run_dir: Path, code: str) -> Path:
    return Path(run_dir) / KNOWLEDGE_DIR / f"{safe_name(code)}.json"


def load_knowledge(path: Path) -> DiseaseKnowledge:
    return DiseaseKnowledge.from_dict(read_json(path))


def questionnaire_path(run_dir: Path, kind: str, subject: str, suffix: str = ".json") -> Path:
    return Path(run_dir) / QUESTIONNAIRE_DIR / kind / f"{safe_name(subject)}{suffix}"


def load_questionnaire(path: Path) -> Questionnaire:
    return Questionnaire.from_dict(read_json(path))


class Manifest:
    """Input fingerprints of derived artifacts, for cache checks."""

    def __init__(self, run_dir: Path):
        self.path = Path(run_dir) / MANIFEST_FILE
        self.data: dict[str, str] = read_json(self.path) if self.path.exists() else {}

    def fresh(self, artifact: Path, fingerprint: str) -> bool:
        return Path(artifact).exists() and self.data.get(self._key(artifact)) == fingerprint

    def record(self, artifact: Path, fingerprint: str) -> None:
        self.data[self._key(artifact)] = fingerprint

    def save(self) -> bool:
        return write_json(self.path, dict(sorted(self.data.items())))

    def _key(self, artifact: Path) -> str:
        return Path(artifact).resolve().relative_to(self.path.parent.resolve()).as_posix()
