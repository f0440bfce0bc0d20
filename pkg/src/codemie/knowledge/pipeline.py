"""Attribute and scene-graph generation: triplicate runs, dedup, post-processing."""

from __future__ import annotations

import base64
import logging
import mimetypes
import re
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..core import (
    AttributeRecord,
    Document,
    EntityTypeSchema,
    SceneGraph,
    is_not_mentioned,
    normalize,
)
from .client import CompletionClient, CompletionRequest, TransportError
from .prompts import build_attribute_prompt, build_scene_graph_prompt

log = logging.getLogger(__name__)

RUNS = 3

# Works of art and media filed as organizations.
DEFAULT_BLOCKLIST: dict[str, dict[str, tuple[str, ...]]] = {
    "ORG": {
        "type": (
            "film",
            "movie",
            "tv show",
            "television show",
            "television series",
            "tv series",
            "novel",
            "book",
            "literary work",
            "album",
            "song",
            "play",
        )
    }
}


@dataclass(frozen=True)
class RawTupleRow:
    values: tuple[str, ...]
    source_run: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("tuple row must have at least one value")
        if self.source_run not in (1, 2, 3):
            raise ValueError("source_run must be 1, 2 or 3")

    def key(self) -> tuple[str, ...]:
        return tuple(normalize(v) for v in self.values)


@dataclass
class TupleLines:
    rows: list[RawTupleRow] = field(default_factory=list)
    skipped: int = 0
    arity_dropped: int = 0


_ROW_RE = re.compile(r"^(?:[-*•]\s*|\d+[.)]\s*)?[(（]([^()（）]*)[)）]\s*[,.;，。；]?$")
_SPLIT_RE = re.compile(r"[,，]")


def parse_tuple_lines(raw: str, expected_arity: int | None = None, source_run: int = 1) -> TupleLines:
    """Pull ``(v1, v2, ...)`` rows out of a completion, one per line."""
    out = TupleLines()
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        m = _ROW_RE.match(line)
        if not m or not m.group(1).strip():
            out.skipped += 1
            continue
        values = tuple(v.strip().strip("\"'“”").strip() for v in _SPLIT_RE.split(m.group(1)))
        if expected_arity is not None and len(values) != expected_arity:
            out.arity_dropped += 1
            continue
        out.rows.append(RawTupleRow(values, source_run))
    return out


def dedup_rows(rows: Iterable[RawTupleRow]) -> list[RawTupleRow]:
    seen = set()
    out = []
    for row in rows:
        k = row.key()
        if k not in seen:
            seen.add(k)
            out.append(row)
    return out


def run_triplicate(
    request_builder: Callable[[int], CompletionRequest],
    client: CompletionClient,
    parse: Callable[[str, int], Sequence[RawTupleRow]],
    runs: int = RUNS,
) -> list[RawTupleRow]:
    """Issue the same job ``runs`` times, union the rows, drop normalized duplicates."""
    rows: list[RawTupleRow] = []
    failed = 0
    for run in range(1, runs + 1):
        request = request_builder(run)
        try:
            raw = client.complete(request)
        except TransportError as exc:
            failed += 1
            log.warning("run %d of %s failed, counting it as empty: %s", run, request.tag or "job", exc)
            continue
        rows.extend(parse(raw, run))
    if failed == runs:
        raise TransportError(f"all {runs} runs failed")
    return dedup_rows(rows)


def _known_types(known_entities: Mapping[str, Iterable[str]] | None) -> dict[str, set[str]]:
    if not known_entities:
        return {}
    return {normalize(k): set(v) for k, v in known_entities.items()}


def _suspicion_flags(
    etype: str,
    values: Mapping[str, str],
    known: Mapping[str, set[str]],
    blocklist: Mapping[str, Mapping[str, Iterable[str]]],
) -> list[str]:
    flags = []
    other = sorted(known.get(values["name"], set()) - {etype})
    if other:
        flags.append(f"name {values['name']!r} is annotated as {'/'.join(other)}")
    for attr, banned in blocklist.get(etype, {}).items():
        value = values.get(attr)
        if value and value.casefold() in {b.casefold() for b in banned}:
            flags.append(f"{attr} {value!r} is not a plausible {etype}")
    return flags


def postprocess_attributes(
    rows: Sequence[RawTupleRow],
    etype: str,
    attrs: Sequence[str],
    schema: EntityTypeSchema,
    *,
    known_entities: Mapping[str, Iterable[str]] | None = None,
    blocklist: Mapping[str, Mapping[str, Iterable[str]]] | None = None,
) -> list[AttributeRecord]:
    """Turn raw rows into attribute records.

    Not-mentioned values are dropped, then records without a name or with
    fewer than two attributes. Suspicious records (name annotated as another
    type in ``known_entities``, or a blocklisted value) are kept but carry
    flags so the review step can remove them.
    """
    attrs = tuple(attrs)
    allowed = schema.attributes(etype)
    unknown = [a for a in attrs if a not in allowed]
    if unknown:
        raise ValueError(f"attributes {unknown} not defined for {etype}")
    known = _known_types(known_entities)
    blocklist = DEFAULT_BLOCKLIST if blocklist is None else blocklist
    records = []
    seen = set()
    for row in rows:
        if len(row.values) != len(attrs):
            raise ValueError(f"row has {len(row.values)} values, expected {len(attrs)}")
        values = {}
        for attr, raw in zip(attrs, row.values):
            value = normalize(raw)
            if value and not is_not_mentioned(value):
                values[attr] = value
        if "name" not in values or len(values) < 2:
            continue
        key = tuple(values.items())
        if key in seen:
            continue
        seen.add(key)
        flags = _suspicion_flags(etype, values, known, blocklist)
        records.append(AttributeRecord(etype, values, flags=tuple(flags)))
    return records


def postprocess_scene_graph(rows: Sequence[RawTupleRow], image_ref: str) -> SceneGraph:
    triples = []
    seen = set()
    for row in rows:
        if len(row.values) != 3:
            raise ValueError(f"scene-graph row has {len(row.values)} values, expected 3")
        key = row.key()
        if not all(key) or key in seen:
            continue
        seen.add(key)
        triples.append(key)
    return SceneGraph(image_ref, tuple(triples))


# --- corpus drivers --------------------------------------------------------


@dataclass(frozen=True)
class GenerationSettings:
    text_model: str = "qwen3-max"
    vision_model: str = "qwen3-vl-235b"
    temperature: float = 0.7
    max_tokens: int = 2048
    seed: int | None = 0
    vary_seed: bool = True
    max_concurrency: int = 4

    def seed_for(self, run: int) -> int | None:
        if self.seed is None:
            return None
        return self.seed + run - 1 if self.vary_seed else self.seed


def _gold_types(doc: Document) -> dict[str, set[str]]:
    known: dict[str, set[str]] = {}
    if doc.gold is not None:
        for e in doc.gold.entities:
            known.setdefault(e.surface, set()).add(e.etype)
    return known


def generate_attributes(
    docs: Sequence[Document],
    schema: EntityTypeSchema,
    client: CompletionClient,
    settings: GenerationSettings = GenerationSettings(),
    blocklist: Mapping[str, Mapping[str, Iterable[str]]] | None = None,
) -> dict[str, list[AttributeRecord]]:
    """Attribute records per document id, in schema type order."""
    jobs = [(doc, etype) for doc in docs for etype in schema.types if schema.attributes(etype)]

    def work(job):
        doc, etype = job
        attrs = schema.attributes(etype)
        prompt = build_attribute_prompt(doc.text, etype, attrs, doc.language)

        def request(run):
            return CompletionRequest(
                prompt,
                settings.text_model,
                settings.temperature,
                settings.max_tokens,
                settings.seed_for(run),
                tag=f"attr/{doc.id}/{etype}/run{run}",
            )

        rows = run_triplicate(
            request, client, lambda raw, run: parse_tuple_lines(raw, len(attrs), run).rows
        )
        return postprocess_attributes(
            rows, etype, attrs, schema, known_entities=_gold_types(doc), blocklist=blocklist
        )

    with ThreadPoolExecutor(max_workers=settings.max_concurrency) as pool:
        results = list(pool.map(work, jobs))
    out: dict[str, list[AttributeRecord]] = {doc.id: [] for doc in docs}
    for (doc, _), records in zip(jobs, results):
        out[doc.id].extend(records)
    return out


def image_data_url(data: bytes, name: str = "") -> str:
    mime = mimetypes.guess_type(name)[0] or "image/jpeg"
    return f"data:{mime};base64,{base64.b64encode(data).decode('ascii')}"


def generate_scene_graphs(
    docs: Sequence[Document],
    client: CompletionClient,
    settings: GenerationSettings = GenerationSettings(),
    load_image: Callable[[str], bytes | None] = lambda ref: None,
) -> dict[str, list[SceneGraph]]:
    """Scene graphs per document id, one per image reference."""
    jobs = [(doc, ref) for doc in docs for ref in doc.image_refs]

    def work(job):
        doc, ref = job
        prompt = build_scene_graph_prompt(doc.language)
        data = load_image(ref)
        images = (image_data_url(data, ref),) if data is not None else ()
        if not images:
            log.debug("no image bytes for %s; sending prompt only", ref)

        def request(run):
            return CompletionRequest(
                prompt,
                settings.vision_model,
                settings.temperature,
                settings.max_tokens,
                settings.seed_for(run),
                images=images,
                tag=f"sg/{doc.id}/{ref}/run{run}",
            )

        rows = run_triplicate(request, client, lambda raw, run: parse_tuple_lines(raw, 3, run).rows)
        return postprocess_scene_graph(rows, ref)

    with ThreadPoolExecutor(max_workers=settings.max_concurrency) as pool:
        results = list(pool.map(work, jobs))
    out: dict[str, list[SceneGraph]] = {doc.id: [] for doc in docs}
    for (doc, _), graph in zip(jobs, results):
        out[doc.id].append(graph)
    return out
