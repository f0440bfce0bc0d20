"""Command-line entry point: ``codemie <command> ...``.

Every command writes its artifacts under ``--run-dir`` and records the
config hash, input hashes and toolkit version in ``manifest.json`` there.
Exit status: 0 ok, 1 data error, 2 transport error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import re
import sys
from collections.abc import Iterable
from pathlib import Path

from . import __version__
from .config import Config
from .core import AnnotationSet, AttributeRecord, SceneGraph
from .corpus import Corpus, CorpusError, load_corpus, write_corpus
from .evaluation import evaluate_corpus, hallucination_rate
from .evaluation.taxonomy import ErrorBreakdown, error_taxonomy
from .ingest import ADAPTERS
from .knowledge import (
    CachingClient,
    Decision,
    HttpChatClient,
    MockClient,
    ReviewSession,
    TransportError,
    generate_attributes,
    generate_scene_graphs,
)
from .knowledge.review import DROP, EDIT, KEEP
from .parser import DeviationReport, parse_output
from .template import TemplateError, build_input_template, render_gold_output
from .visual import fuse, fuse_with_default_positions, load_embeddings, write_embeddings

log = logging.getLogger("codemie")

EXIT_OK, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2

ATTRS_FILE = "attributes.jsonl"
REVIEWED_FILE = "attributes.reviewed.jsonl"
SG_FILE = "scene_graphs.jsonl"
TEMPLATES_FILE = "templates.jsonl"
GOLD_FILE = "gold_outputs.jsonl"
PRED_FILE = "predictions.jsonl"
DEV_FILE = "deviations.jsonl"


class DataError(Exception):
    pass


# --- helpers ---------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_jsonl(path: Path) -> list[dict]:
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def _write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")


def _safe_name(doc_id: str) -> str:
    return re.sub(r"[^\w.\-]", "_", doc_id)


class Run:
    """Run directory plus manifest bookkeeping for one command invocation."""

    def __init__(self, root: Path, config: Config, command: str, argv: list[str]):
        self.root = root
        self.config = config
        self.command = command
        self.argv = argv
        self.inputs: dict[str, str] = {}
        self.outputs: list[Path] = []
        root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.root / name

    def input(self, path: Path) -> Path:
        if not path.exists():
            raise DataError(f"{path}: no such file")
        if path.is_file():
            self.inputs[str(path)] = _sha256(path)
        return path

    def output(self, path: Path) -> Path:
        self.outputs.append(path)
        return path

    def cache_dir(self) -> Path:
        cache = Path(self.config.cache_dir)
        return cache if cache.is_absolute() else self.root / cache

    def write_manifest(self) -> None:
        manifest_path = self.root / "manifest.json"
        manifest = {"toolkit_version": __version__, "commands": {}}
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        manifest["toolkit_version"] = __version__
        manifest["commands"][self.command] = {
            "argv": self.argv,
            "config_hash": self.config.digest(),
            "config": self.config.to_dict(),
            "inputs": self.inputs,
            "outputs": {
                str(p.relative_to(self.root) if p.is_relative_to(self.root) else p): _sha256(p)
                for p in self.outputs
                if p.is_file()
            },
        }
        _write_json(manifest_path, manifest)


def _corpus(run: Run, path: str) -> Corpus:
    p = run.input(Path(path))
    schema_path = p.parent / "schema.json"
    if schema_path.exists():
        run.input(schema_path)
    return load_corpus(p)


def _client(run: Run, mock: str | None):
    if mock:
        inner = MockClient.from_file(run.input(Path(mock)))
    else:
        inner = HttpChatClient(run.config.endpoint)
    return CachingClient(inner, run.cache_dir())


def _load_attrs(path: Path) -> dict[str, list[AttributeRecord]]:
    return {row["doc_id"]: [AttributeRecord.from_dict(r) for r in row["records"]] for row in _read_jsonl(path)}


def _load_graphs(path: Path) -> dict[str, list[SceneGraph]]:
    return {row["doc_id"]: [SceneGraph.from_dict(g) for g in row["graphs"]] for row in _read_jsonl(path)}


def _load_outputs(path: Path) -> dict[str, str]:
    """Model outputs as ``{doc_id: text}`` from a JSONL file or a directory of ``<doc_id>.txt`` files."""
    if path.is_dir():
        return {p.stem: p.read_bytes().decode("utf-8", errors="replace") for p in sorted(path.glob("*.txt"))}
    return {row["doc_id"]: row["output"] for row in _read_jsonl(path)}


def _load_predictions(path: Path) -> dict[str, AnnotationSet]:
    return {row["doc_id"]: AnnotationSet.from_dict(row["prediction"]) for row in _read_jsonl(path)}


def _pairs(corpus: Corpus, preds: dict[str, AnnotationSet]) -> list[tuple[AnnotationSet, AnnotationSet]]:
    unknown = set(preds) - set(corpus.by_id())
    if unknown:
        raise DataError(f"predictions for unknown documents: {', '.join(sorted(unknown)[:5])}")
    return [(preds.get(d.id, AnnotationSet()), d.gold or AnnotationSet()) for d in corpus]


def _reports_near(path: Path) -> list[DeviationReport] | None:
    dev = path.parent / DEV_FILE
    if not dev.exists():
        return None
    return [DeviationReport.from_dict(r) for r in _read_jsonl(dev)]


# --- commands --------------------------------------------------------------


def cmd_ingest(args, run: Run) -> dict:
    adapter = ADAPTERS[args.format]
    docs, schema = adapter(run.input(Path(args.input)))
    out = Path(args.output) if args.output else run.path("corpus.jsonl")
    write_corpus(out, docs, schema)
    run.output(out)
    run.output(out.parent / "schema.json")
    return {"documents": len(docs), "output": str(out)}


def cmd_gen_attrs(args, run: Run) -> dict:
    corpus = _corpus(run, args.corpus)
    client = _client(run, args.mock)
    records = generate_attributes(list(corpus), corpus.schema, client, run.config.generation())
    out = run.output(run.path(ATTRS_FILE))
    _write_jsonl(out, ({"doc_id": d, "records": [r.to_dict() for r in rs]} for d, rs in records.items()))
    return {
        "documents": len(records),
        "records": sum(map(len, records.values())),
        "cache_hits": client.hits,
        "cache_misses": client.misses,
    }


def cmd_gen_sg(args, run: Run) -> dict:
    corpus = _corpus(run, args.corpus)
    client = _client(run, args.mock)
    image_dir = Path(args.images) if args.images else None

    def load_image(ref: str) -> bytes | None:
        if image_dir is None:
            return None
        p = image_dir / ref
        return p.read_bytes() if p.is_file() else None

    graphs = generate_scene_graphs(list(corpus), client, run.config.generation(), load_image)
    out = run.output(run.path(SG_FILE))
    _write_jsonl(out, ({"doc_id": d, "graphs": [g.to_dict() for g in gs]} for d, gs in graphs.items()))
    return {
        "documents": len(graphs),
        "triples": sum(len(g.triples) for gs in graphs.values() for g in gs),
        "cache_hits": client.hits,
        "cache_misses": client.misses,
    }


_HELP = "[k]eep  [d]rop  [e]dit field=value (empty value removes)  [q]uit"


def _interactive_decisions(session: ReviewSession, doc_id: str, stdin, stdout):
    while not session.done:
        rec = session.current
        shown = ", ".join(f"{k}: {v}" for k, v in rec.values.items())
        flags = f"  flags: {', '.join(rec.flags)}" if rec.flags else ""
        stdout.write(f"\n[{doc_id} {session.cursor + 1}/{len(session.records)}] {rec.etype}: {shown}{flags}\n> ")
        stdout.flush()
        line = stdin.readline()
        if not line:
            return
        cmd = line.strip()
        if cmd in ("k", "keep"):
            yield KEEP
        elif cmd in ("d", "drop"):
            yield DROP
        elif cmd in ("q", "quit"):
            raise KeyboardInterrupt
        elif cmd.startswith(("e ", "edit ")) and "=" in cmd:
            field, _, value = cmd.split(" ", 1)[1].partition("=")
            yield EDIT(field.strip(), value.strip() or None)
        else:
            stdout.write(_HELP + "\n")


def cmd_review(args, run: Run) -> dict:
    src = run.input(Path(args.attributes) if args.attributes else run.path(ATTRS_FILE))
    schema = _corpus(run, args.corpus).schema if args.corpus else None
    by_doc = _load_attrs(src)
    scripted = None
    if args.decisions:
        scripted = {}
        for row in _read_jsonl(run.input(Path(args.decisions))):
            scripted.setdefault(row["doc_id"], []).append(Decision.from_dict(row))
    journal_dir = run.path("review")
    result, rejected, stopped = {}, 0, False
    for doc_id, records in by_doc.items():
        session = ReviewSession(records, schema, journal_dir / f"{_safe_name(doc_id)}.jsonl")
        if not stopped:
            decisions = (
                scripted.get(doc_id, []) if scripted is not None
                else _interactive_decisions(session, doc_id, sys.stdin, sys.stderr)
            )
            try:
                for d in decisions:
                    if session.done:
                        break
                    session.apply(d)
            except KeyboardInterrupt:
                stopped = True
        rejected += len(session.rejected)
        result[doc_id] = session.result()
    out = run.output(run.path(REVIEWED_FILE))
    _write_jsonl(out, ({"doc_id": d, "records": [r.to_dict() for r in rs]} for d, rs in result.items()))
    return {"documents": len(result), "records": sum(map(len, result.values())), "rejected_edits": rejected}


def cmd_build(args, run: Run) -> dict:
    corpus = _corpus(run, args.corpus)
    attrs_path = Path(args.attributes) if args.attributes else None
    if attrs_path is None:
        for name in (REVIEWED_FILE, ATTRS_FILE):
            if run.path(name).exists():
                attrs_path = run.path(name)
                break
    sg_path = Path(args.scene_graphs) if args.scene_graphs else run.path(SG_FILE)
    attrs = _load_attrs(run.input(attrs_path)) if attrs_path else {}
    graphs = _load_graphs(run.input(sg_path)) if sg_path.exists() else {}
    templates, golds = [], []
    for doc in corpus:
        tpl = build_input_template(
            doc, attrs.get(doc.id, []), graphs.get(doc.id, []), corpus.schema, run.config.max_images
        )
        templates.append({"doc_id": doc.id, "input": tpl.text, "metadata": tpl.metadata})
        if doc.gold is not None:
            try:
                golds.append({"doc_id": doc.id, "output": render_gold_output(doc.gold, doc, corpus.schema).text})
            except TemplateError as exc:
                raise DataError(f"document {doc.id!r}: {exc}") from exc
    _write_jsonl(run.output(run.path(TEMPLATES_FILE)), templates)
    _write_jsonl(run.output(run.path(GOLD_FILE)), golds)
    return {
        "templates": len(templates),
        "gold_outputs": len(golds),
        "truncated_images": sum(t["metadata"]["truncated_images"] for t in templates),
    }


def cmd_fuse(args, run: Run) -> dict:
    patches = load_embeddings(run.input(Path(args.embeddings)))
    if args.positions:
        fused = fuse(patches, load_embeddings(run.input(Path(args.positions))))
    else:
        fused = fuse_with_default_positions(patches)
    out = Path(args.output) if args.output else run.path("fused.emb")
    write_embeddings(out, fused.data, kind="fused")
    run.output(out)
    return {"q": fused.data.shape[0], "d_g": fused.data.shape[1], "output": str(out)}


def cmd_parse(args, run: Run) -> dict:
    corpus = _corpus(run, args.corpus)
    outputs = _load_outputs(run.input(Path(args.outputs)))
    docs = corpus.by_id()
    unknown = set(outputs) - set(docs)
    if unknown:
        raise DataError(f"outputs for unknown documents: {', '.join(sorted(unknown)[:5])}")
    preds, reports = [], []
    for doc in corpus:
        if doc.id not in outputs:
            continue
        ann, report = parse_output(
            outputs[doc.id], corpus.schema, document_id=doc.id, image_refs=doc.image_refs, strict=run.config.strict
        )
        preds.append({"doc_id": doc.id, "prediction": ann.to_dict()})
        reports.append(report.to_dict())
    _write_jsonl(run.output(run.path(PRED_FILE)), preds)
    _write_jsonl(run.output(run.path(DEV_FILE)), reports)
    return {"documents": len(preds), "with_deviations": sum(1 for r in reports if r["deviations"])}


def cmd_score(args, run: Run) -> dict:
    corpus = _corpus(run, args.corpus)
    pred_path = run.input(Path(args.predictions) if args.predictions else run.path(PRED_FILE))
    pairs = _pairs(corpus, _load_predictions(pred_path))
    score = evaluate_corpus(
        pairs,
        _reports_near(pred_path),
        threshold=run.config.grounding_threshold,
        hallucination_kinds=run.config.hallucination_kinds,
        max_workers=run.config.max_concurrency,
    )
    report = score.to_dict()
    out = Path(args.output) if args.output else run.path("score.json")
    _write_json(out, report)
    run.output(out)
    return {"f1": score.f1(), "hallucination_rate": score.hallucination_rate, "output": str(out)}


def cmd_errors(args, run: Run) -> dict:
    corpus = _corpus(run, args.corpus)
    pred_path = run.input(Path(args.predictions) if args.predictions else run.path(PRED_FILE))
    total = ErrorBreakdown()
    for pred, gold in _pairs(corpus, _load_predictions(pred_path)):
        total = total + error_taxonomy(pred, gold, run.config.grounding_threshold)
    out = run.output(run.path("errors.json"))
    _write_json(out, total.to_dict())
    return {t: e.to_dict()["counts"] for t, e in total.tasks.items()}


def cmd_halluc(args, run: Run) -> dict:
    path = run.input(Path(args.deviations) if args.deviations else run.path(DEV_FILE))
    reports = [DeviationReport.from_dict(r) for r in _read_jsonl(path)]
    if not reports:
        raise DataError(f"{path}: no samples")
    rate = hallucination_rate(reports, run.config.hallucination_kinds)
    kinds: dict[str, int] = {}
    for r in reports:
        for k in r.kinds():
            kinds[k.value] = kinds.get(k.value, 0) + 1
    result = {
        "samples": len(reports),
        "hallucination_rate": rate,
        "kinds": sorted(k.value for k in run.config.hallucination_kinds),
        "documents_per_kind": dict(sorted(kinds.items())),
    }
    _write_json(run.output(run.path("halluc.json")), result)
    return result


# --- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="codemie", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--run-dir", default="run", help="artifact directory (default: ./run)")
    p.add_argument("--version", action="version", version=f"codemie {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="convert a dataset dump to interchange JSONL")
    s.add_argument("format", choices=sorted(ADAPTERS))
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_ingest)

    for name, func, what in (("gen-attrs", cmd_gen_attrs, "entity attributes"), ("gen-sg", cmd_gen_sg, "scene graphs")):
        s = sub.add_parser(name, help=f"generate {what} with the completion backend")
        s.add_argument("corpus")
        s.add_argument("--mock", metavar="RESPONSES", help="answer from a canned-response JSON file")
        if name == "gen-sg":
            s.add_argument("--images", help="directory holding the corpus images")
        s.set_defaults(func=func)

    s = sub.add_parser("review", help="curate generated attributes (resumable)")
    s.add_argument("--attributes", help=f"attribute file (default: <run-dir>/{ATTRS_FILE})")
    s.add_argument("--corpus", help="corpus whose schema validates edits")
    s.add_argument("--decisions", help="JSONL of scripted decisions instead of prompting")
    s.set_defaults(func=cmd_review)

    s = sub.add_parser("build", help="emit input templates and gold outputs")
    s.add_argument("corpus")
    s.add_argument("--attributes")
    s.add_argument("--scene-graphs")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("fuse", help="fuse patch embeddings into per-image features")
    s.add_argument("embeddings")
    s.add_argument("--positions", help="position table (default: sinusoidal)")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("parse", help="parse model outputs into predictions and deviation reports")
    s.add_argument("corpus")
    s.add_argument("outputs", help="JSONL of {doc_id, output} or a directory of <doc_id>.txt")
    s.set_defaults(func=cmd_parse)

    for name, func in (("score", cmd_score), ("errors", cmd_errors)):
        s = sub.add_parser(name, help="score predictions" if name == "score" else "classify prediction errors")
        s.add_argument("corpus")
        s.add_argument("--predictions", help=f"default: <run-dir>/{PRED_FILE}")
        if name == "score":
            s.add_argument("-o", "--output")
        s.set_defaults(func=func)

    s = sub.add_parser("halluc", help="hallucination rate over deviation reports")
    s.add_argument("deviations", nargs="?", help=f"default: <run-dir>/{DEV_FILE}")
    s.set_defaults(func=cmd_halluc)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = Config.load(args.config).with_seed(args.seed)
        run = Run(Path(args.run_dir), config, args.command, argv)
        result = args.func(args, run)
        run.write_manifest()
    except TransportError as exc:
        print(f"codemie: transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (DataError, CorpusError, TemplateError, ValueError, KeyError, OSError, NotImplementedError) as exc:
        print(f"codemie: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(result, ensure_ascii=False, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
