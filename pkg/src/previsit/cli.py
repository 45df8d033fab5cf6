"""Command-line pipeline: extract -> network -> synthesize -> generate -> evaluate.

Each command reads the previous stage's artifacts from the run directory and
writes its own. Work already present is skipped unless ``--force`` is given.

Exit codes: 0 success, 1 configuration/IO/usage error, 2 partial failure
(some records or diseases failed; the rest were written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from . import store
from .clustering import knowledge_from_matrix, usable_networks
from .config import Config, ConfigError
from .data import bundled_corpus_path
from .errors import AuthError, PrevisitError, SubjectMismatch
from .evaluation import (
    DERIVED,
    EvalReport,
    KeyFactSet,
    build_report,
    measure_generation,
    render_table,
    summarize,
)
from .extraction import extract_assertions
from .models import DISEASE, PERSONAL, Questionnaire
from .network import build_personal_network
from .prompts import get_template
from .questionnaire import generate_disease, generate_personal
from .similarity import EdgeEmbedder, similarity_matrix

logger = logging.getLogger("previsit")


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # usage errors are setup errors (1); 2 is reserved for partial failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class Run:
    cfg: Config
    run_dir: Path
    force: bool
    generator: Any
    embedder: Any
    manifest: store.Manifest = field(init=False)
    failures: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = store.Manifest(self.run_dir)

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def require(self, *names: str) -> None:
        for name in names:
            if not self.path(name).exists():
                raise CliError(f"missing artifact {self.path(name)}; run the earlier stage first")

    def fail(self, what: str, exc: BaseException) -> None:
        if isinstance(exc, AuthError):
            raise CliError(f"provider rejected the credential: {exc}")
        msg = f"{what}: {type(exc).__name__}: {exc}"
        self.failures.append(msg)
        print(f"FAILED {msg}", file=sys.stderr)

    def exit_code(self) -> int:
        self.manifest.save()
        return 2 if self.failures else 0


def _parallel(items: Sequence[Any], fn: Callable[[Any], Any], workers: int) -> list[tuple[Any, Any, BaseException | None]]:
    def call(item):
        try:
            return item, fn(item), None
        except PrevisitError as exc:
            return item, None, exc

    if workers <= 1 or len(items) <= 1:
        return [call(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(call, items))


# ---------------------------------------------------------------------------
# commands


def cmd_extract(run: Run, args) -> int:
    if args.demo:
        corpus = bundled_corpus_path()
    elif args.corpus:
        corpus = Path(args.corpus)
    else:
        raise CliError("extract needs a corpus path (or --demo for the bundled corpus)")
    try:
        docs = store.load_corpus(corpus)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read corpus {corpus}: {exc}")
    store.write_jsonl(run.path(store.EMR_FILE), (d.to_dict() for d in docs))

    existing = store.load_assertions(run.path(store.ASSERTIONS_FILE)) if run.path(store.ASSERTIONS_FILE).exists() else {}
    todo = [d for d in docs if run.force or d.id not in existing]
    template = get_template("extraction", run.cfg.locale)
    done = dict(existing)
    for doc, result, exc in _parallel(
        todo,
        lambda d: extract_assertions(d, run.generator, template, run.cfg.retries, run.cfg.temperature),
        run.cfg.workers,
    ):
        if exc is not None:
            done.pop(doc.id, None)
            run.fail(f"extract {doc.id}", exc)
        else:
            done[doc.id] = result
    rows = [r for d in docs if d.id in done for r in store.assertion_rows(d.id, done[d.id])]
    store.write_jsonl(run.path(store.ASSERTIONS_FILE), rows)
    print(f"extract: {len(todo)} processed, {len(docs) - len(todo)} cached, {len(run.failures)} failed", file=sys.stderr)
    return run.exit_code()


def cmd_network(run: Run, args) -> int:
    run.require(store.EMR_FILE, store.ASSERTIONS_FILE)
    docs = store.load_corpus(run.path(store.EMR_FILE))
    assertions = store.load_assertions(run.path(store.ASSERTIONS_FILE))
    net_path = run.path(store.NETWORKS_FILE)
    existing = store.load_networks(net_path) if net_path.exists() else {}
    todo = [d for d in docs if d.id in assertions and (run.force or d.id not in existing)]
    template = get_template("network", run.cfg.locale)
    done = {k: v for k, v in existing.items() if k in assertions}
    for doc, net, exc in _parallel(
        todo,
        lambda d: build_personal_network(d, assertions[d.id], run.generator, template, run.cfg.retries, run.cfg.temperature),
        run.cfg.workers,
    ):
        if exc is not None:
            done.pop(doc.id, None)
            run.fail(f"network {doc.id}", exc)
        else:
            done[doc.id] = net
    store.write_jsonl(net_path, (done[d.id].to_dict() for d in docs if d.id in done))
    print(f"network: {len(todo)} processed, {len(run.failures)} failed", file=sys.stderr)
    return run.exit_code()


def _groups(run: Run) -> dict[str, list]:
    run.require(store.EMR_FILE, store.NETWORKS_FILE)
    docs = store.load_corpus(run.path(store.EMR_FILE))
    nets = store.load_networks(run.path(store.NETWORKS_FILE))
    groups: dict[str, list] = {}
    for d in docs:
        if d.disease_code and d.id in nets:
            groups.setdefault(d.disease_code, []).append(nets[d.id])
    return groups


def cmd_synthesize(run: Run, args) -> int:
    cutoff = run.cfg.cluster_cutoff if args.cutoff is None else args.cutoff
    if not 0.0 <= cutoff <= 2.0:
        raise CliError(f"cutoff must lie in [0, 2], got {cutoff}")
    groups = _groups(run)
    if args.disease is not None:
        if args.disease not in groups:
            raise CliError(f"disease code {args.disease!r} not found in the corpus")
        codes = [args.disease]
    else:
        codes = sorted(groups)
    ee = EdgeEmbedder(run.embedder, run.cfg.embed_timing, run.cfg.normalize_nodes)
    settings = run.cfg.fingerprint("provider", "seed", "embedding_model", "embedding_dim", "embed_timing", "normalize_nodes")
    for code in codes:
        out = store.knowledge_path(run.run_dir, code)
        fp = store.digest({"networks": [n.to_dict() for n in groups[code]], "cutoff": cutoff, **settings})
        if not run.force and run.manifest.fresh(out, fp):
            continue
        try:
            usable = usable_networks(groups[code], code)
            matrix = similarity_matrix(usable, ee)
            dk = knowledge_from_matrix(code, usable, matrix, cutoff)
        except PrevisitError as exc:
            run.fail(f"synthesize {code}", exc)
            continue
        store.write_json(out.with_suffix(".similarity.json"), matrix.to_dict())
        store.write_json(out, dk.to_dict())
        run.manifest.record(out, fp)
        print(f"synthesize: {code}: {len(dk.entries)} pathway(s) from {len(usable)} network(s)", file=sys.stderr)
    return run.exit_code()


def cmd_generate(run: Run, args) -> int:
    run.require(store.NETWORKS_FILE)
    nets = store.load_networks(run.path(store.NETWORKS_FILE))
    jobs: list[tuple[str, str]] = []
    if args.personal is not None:
        if args.personal not in nets:
            raise CliError(f"no network for EMR {args.personal!r}; run extract and network first")
        jobs.append((PERSONAL, args.personal))
    elif args.disease is not None:
        if not store.knowledge_path(run.run_dir, args.disease).exists():
            raise CliError(f"no knowledge file for disease {args.disease!r}; run synthesize first")
        jobs.append((DISEASE, args.disease))
    else:
        jobs += [(PERSONAL, emr_id) for emr_id in nets]
        kdir = run.path(store.KNOWLEDGE_DIR)
        if kdir.exists():
            for p in sorted(kdir.glob("*.json")):
                if not p.name.endswith(".similarity.json"):
                    jobs.append((DISEASE, store.load_knowledge(p).disease_code))

    timings_path = run.path(store.TIMINGS_FILE)
    timings: dict[str, dict[str, float]] = store.read_json(timings_path) if timings_path.exists() else {}
    settings = run.cfg.fingerprint("provider", "seed", "model", "temperature", "locale", "retries")
    pending = []
    for kind, subject in jobs:
        if kind == PERSONAL:
            payload = nets[subject].to_dict()
        else:
            payload = store.read_json(store.knowledge_path(run.run_dir, subject))
        out = store.questionnaire_path(run.run_dir, kind, subject)
        fp = store.digest({"input": payload, **settings})
        if run.force or not run.manifest.fresh(out, fp):
            pending.append((kind, subject, out, fp))

    def work(job):
        kind, subject, _, _ = job
        if kind == PERSONAL:
            net = nets[subject]
            template = get_template("personal_questionnaire", run.cfg.locale)
            task = lambda: generate_personal(subject, list(net.nodes), net, run.generator, template, run.cfg.retries, run.cfg.temperature)
        else:
            dk = store.load_knowledge(store.knowledge_path(run.run_dir, subject))
            template = get_template("disease_questionnaire", run.cfg.locale)
            task = lambda: generate_disease(dk, run.generator, template, run.cfg.retries, run.cfg.temperature)
        return measure_generation(task, subject)

    for (kind, subject, out, fp), timed, exc in _parallel(pending, work, run.cfg.workers):
        if exc is not None:
            run.fail(f"generate {kind} {subject}", exc)
            continue
        q: Questionnaire = timed.value
        store.write_json(out, q.to_dict())
        store.write_text(out.with_suffix(".txt"), q.render())
        timings.setdefault(kind, {})[subject] = timed.timing.elapsed_sec
        run.manifest.record(out, fp)
        print(f"generate: {kind} {subject}: {len(q.questions)} questions in {timed.timing.elapsed_sec:.3f}s", file=sys.stderr)
    if pending:
        store.write_json(timings_path, {k: dict(sorted(v.items())) for k, v in sorted(timings.items())})
    return run.exit_code()


def _questionnaires(run: Run) -> dict[str, Questionnaire]:
    out: dict[str, Questionnaire] = {}
    for kind in (PERSONAL, DISEASE):
        d = run.path(store.QUESTIONNAIRE_DIR) / kind
        if not d.exists():
            continue
        for p in sorted(d.glob("*.json")):
            q = store.load_questionnaire(p)
            if q.subject in out:
                raise CliError(f"subject {q.subject!r} names both an EMR and a disease")
            out[q.subject] = q
    return out


def _derived_facts(run: Run, questionnaires: dict[str, Questionnaire]) -> dict[str, KeyFactSet]:
    nets = store.load_networks(run.path(store.NETWORKS_FILE)) if run.path(store.NETWORKS_FILE).exists() else {}
    docs = store.load_corpus(run.path(store.EMR_FILE)) if run.path(store.EMR_FILE).exists() else []
    facts: dict[str, KeyFactSet] = {}
    for subject, q in questionnaires.items():
        if q.kind == PERSONAL:
            if subject in nets:
                facts[subject] = KeyFactSet(subject, tuple(a.assert_ for a in nets[subject].nodes), DERIVED)
        else:
            texts = [a.assert_ for d in docs if d.disease_code == subject and d.id in nets for a in nets[d.id].nodes]
            if texts:
                facts[subject] = KeyFactSet(subject, tuple(dict.fromkeys(texts)), DERIVED)
    return facts


def cmd_evaluate(run: Run, args) -> int:
    tau = run.cfg.tau if args.tau is None else args.tau
    if not 0.0 < tau <= 1.0:
        raise CliError(f"tau must lie in (0, 1], got {tau}")
    questionnaires = _questionnaires(run)
    if not questionnaires:
        raise CliError(f"no questionnaires under {run.path(store.QUESTIONNAIRE_DIR)}; run generate first")
    try:
        facts = _derived_facts(run, questionnaires)
        if args.keyfacts:
            for row in store.read_jsonl(Path(args.keyfacts)):
                kf = KeyFactSet.from_dict(row)
                facts[kf.subject] = kf
        scores = {}
        if args.scores:
            for row in store.read_jsonl(Path(args.scores)):
                scores[str(row["subject"])] = {k: float(row[k]) for k in ("relevance", "understandability") if row.get(k) is not None}
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read evaluation inputs: {exc}")
    timings_path = run.path(store.TIMINGS_FILE)
    flat_timings: dict[str, float] = {}
    if timings_path.exists():
        for per_kind in store.read_json(timings_path).values():
            flat_timings.update(per_kind)

    subjects = sorted(questionnaires, key=lambda s: (questionnaires[s].kind != PERSONAL, s))
    facts = {s: f for s, f in facts.items() if s in questionnaires}
    out = run.path(store.REPORT_FILE)
    fp = store.digest(
        {
            "q": [questionnaires[s].to_dict() for s in subjects],
            "facts": {s: f.to_dict() for s, f in sorted(facts.items())},
            "scores": scores,
            "timings": flat_timings,
            "tau": tau,
            **run.cfg.fingerprint("provider", "seed", "embedding_model", "embedding_dim"),
        }
    )
    if not run.force and run.manifest.fresh(out, fp):
        print(run.path(store.REPORT_TEXT).read_text(encoding="utf-8"), end="")
        return run.exit_code()
    try:
        reports, summary = build_report(subjects, questionnaires, facts, flat_timings, scores, run.embedder, tau)
    except SubjectMismatch as exc:
        raise CliError(str(exc))
    summary.extra["tau"] = tau
    report = {"tau": tau, "reports": [r.to_dict() for r in reports], "summary": summary.to_dict()}
    store.write_json(out, report)
    table = render_table(reports, summary)
    store.write_text(run.path(store.REPORT_TEXT), table + "\n")
    run.manifest.record(out, fp)
    print(table)
    return run.exit_code()


def cmd_report(run: Run, args) -> int:
    run.require(store.REPORT_FILE)
    data = store.read_json(run.path(store.REPORT_FILE))
    reports = [EvalReport(**r) for r in data["reports"]]
    summary = summarize(reports)
    print(render_table(reports, summary))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--run-dir", default="run", help="artifact directory (default: ./run)")
    common.add_argument("--force", action="store_true", help="redo work even when artifacts exist")
    common.add_argument("--workers", type=int, help="concurrent records per stage")
    common.add_argument("--seed", type=int, help="seed for the mock providers")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="previsit", description="EMR to pre-consultation questionnaire pipeline")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", parents=[common], help="extract atomic assertions from an EMR corpus")
    p.add_argument("corpus", nargs="?", help="emr.jsonl with {id, disease_code, text} per line")
    p.add_argument("--demo", action="store_true", help="use the bundled 12-record synthetic corpus")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("network", parents=[common], help="build personal causal networks")
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("synthesize", parents=[common], help="cluster networks into disease knowledge")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--disease", metavar="CODE")
    g.add_argument("--all", action="store_true")
    p.add_argument("--cutoff", type=float, help="dendrogram cut distance in [0, 2]")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("generate", parents=[common], help="generate questionnaires")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--personal", metavar="EMR_ID")
    g.add_argument("--disease", metavar="CODE")
    g.add_argument("--all", action="store_true", help="every EMR network and every knowledge file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", parents=[common], help="key fact coverage and generation time report")
    p.add_argument("--tau", type=float, help="cosine threshold for a fact to count as covered")
    p.add_argument("--keyfacts", help="keyfacts.jsonl with annotated {subject, facts}")
    p.add_argument("--scores", help="external_scores.jsonl with {subject, relevance, understandability}")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", parents=[common], help="print the evaluation table")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None, generator=None, embedder=None) -> int:
    """Entry point. ``generator``/``embedder`` replace the configured providers (tests)."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = Config.load(args.config, workers=args.workers, seed=args.seed)
        run = Run(
            cfg,
            Path(args.run_dir),
            args.force,
            generator if generator is not None else cfg.generator(),
            embedder if embedder is not None else cfg.embedder(),
        )
        return args.func(run, args)
    except ConfigError as exc:
        print(f"previsit: config error: {exc}", file=sys.stderr)
        return 1
    except CliError as exc:
        print(f"previsit: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, ValueError) as exc:
        print(f"previsit: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
