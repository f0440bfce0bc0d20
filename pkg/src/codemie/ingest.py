"""Adapters from public dataset dumps to the JSONL interchange format."""

from __future__ import annotations

import json
from collections.abc import Callable
from pathlib import Path

from .core import AnnotationSet, Document, Entity, EntityChain, EntityTypeSchema, RelationTriple

Adapter = Callable[[Path], tuple[list[Document], EntityTypeSchema]]

TWITTER_TYPES = ("PER", "LOC", "ORG", "OTHER")
MNRE_ENTITY_TYPE = "OTHER"


def _bio_spans(tokens: list[str], tags: list[str]) -> list[Entity]:
    out: list[Entity] = []
    cur: list[str] = []
    cur_type = None

    def flush():
        nonlocal cur, cur_type
        if cur:
            out.append(Entity(" ".join(cur), cur_type))
        cur, cur_type = [], None

    for tok, tag in zip(tokens, tags):
        if tag.startswith("B-") or (tag.startswith("I-") and tag[2:] != cur_type):
            flush()
            cur, cur_type = [tok], tag[2:]
        elif tag.startswith("I-"):
            cur.append(tok)
        else:
            flush()
    flush()
    return out


def _twitter_type(t: str) -> str:
    return "OTHER" if t in ("MISC", "OTHER") else t


def ingest_twitter_conll(path: Path) -> tuple[list[Document], EntityTypeSchema]:
    """Twitter-15/17 style: ``IMGID:<id>`` header, then ``token<TAB>tag`` lines, blank-line separated."""
    docs = []
    blocks = Path(path).read_text(encoding="utf-8").split("\n\n")
    for n, block in enumerate(blocks):
        lines = [ln for ln in block.splitlines() if ln.strip()]
        if not lines:
            continue
        image = None
        if lines[0].startswith("IMGID:"):
            image = lines[0][len("IMGID:") :].strip()
            lines = lines[1:]
        tokens, tags = [], []
        for ln in lines:
            parts = ln.split("\t") if "\t" in ln else ln.split()
            if len(parts) < 2:
                raise ValueError(f"{path}: block {n + 1}: expected 'token<TAB>tag', got {ln!r}")
            tokens.append(parts[0])
            tags.append(parts[-1])
        if not tokens:
            continue
        entities = [Entity(e.surface, _twitter_type(e.etype)) for e in _bio_spans(tokens, tags)]
        images = (image if "." in image else f"{image}.jpg",) if image else ()
        doc_id = image or f"twitter-{n}"
        docs.append(Document(doc_id, " ".join(tokens), image_refs=images, gold=AnnotationSet(tuple(entities))))
    return docs, EntityTypeSchema.with_defaults(TWITTER_TYPES)


def ingest_mnre(path: Path) -> tuple[list[Document], EntityTypeSchema]:
    """MNRE JSONL: ``token``, ``h``/``t`` with ``name``, ``img_id`` and ``relation`` per line.

    Lines sharing the same text and image are merged into one document whose
    chains each hold the single head or tail mention.
    """
    grouped: dict[tuple[str, str], list[tuple[str, str, str]]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            text = " ".join(row["token"])
            fields = (row["h"]["name"], row["t"]["name"], row["relation"])
            grouped.setdefault((text, row.get("img_id", "")), []).append(fields)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed MNRE row: {exc}") from exc
    docs = []
    rel_types: list[str] = []
    for n, ((text, img), rows) in enumerate(grouped.items()):
        chain_of: dict[str, int] = {}
        relations = []
        for head, tail, rtype in rows:
            ids = []
            for name in (head, tail):
                if name not in chain_of:
                    chain_of[name] = len(chain_of)
                ids.append(chain_of[name])
            if rtype not in rel_types:
                rel_types.append(rtype)
            triple = RelationTriple(rtype, ids[0], ids[1])
            if triple not in relations:
                relations.append(triple)
        entities = tuple(Entity(name, MNRE_ENTITY_TYPE) for name in chain_of)
        chains = tuple(EntityChain(i, (name,), MNRE_ENTITY_TYPE) for name, i in chain_of.items())
        gold = AnnotationSet(entities, chains, tuple(relations))
        docs.append(Document(f"mnre-{n}", text, image_refs=(img,) if img else (), gold=gold))
    return docs, EntityTypeSchema.with_defaults((MNRE_ENTITY_TYPE,), rel_types)


def ingest_m3d(path: Path) -> tuple[list[Document], EntityTypeSchema]:
    raise NotImplementedError(
        "the M3D release format is not public yet; convert it to the interchange JSONL by hand (docs/format.md)"
    )


ADAPTERS: dict[str, Adapter] = {
    "twitter-conll": ingest_twitter_conll,
    "mnre": ingest_mnre,
    "m3d": ingest_m3d,
}
