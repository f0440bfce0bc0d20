"""JSONL interchange corpus: one document per line, schema in ``schema.json`` beside it."""

from __future__ import annotations

import enum
import json
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path

from .core import AnnotationSet, Document, EntityTypeSchema, validate_annotation_set

SCHEMA_FILENAME = "schema.json"
_SENTENCE_END = re.compile(r"[.!?]+(?=\s|$)|[。！？]+")


class Split(str, enum.Enum):
    TRAIN = "TRAIN"
    DEV = "DEV"
    TEST = "TEST"

    @classmethod
    def infer(cls, path: str | Path) -> Split | None:
        stem = Path(path).stem.lower()
        for split, names in ((cls.TRAIN, ("train",)), (cls.DEV, ("dev", "valid", "val")), (cls.TEST, ("test",))):
            if any(re.search(rf"(^|[^a-z]){n}([^a-z]|$)", stem) for n in names):
                return split
        return None


class CorpusError(ValueError):
    """Malformed or invalid corpus input."""


def count_sentences(text: str) -> int:
    stripped = text.strip()
    if not stripped:
        return 0
    parts = [p for p in _SENTENCE_END.split(stripped) if p.strip()]
    return max(len(parts), 1)


@dataclass(frozen=True)
class CorpusCounts:
    docs: int = 0
    sentences: int = 0
    entities: int = 0
    chains: int = 0
    relations: int = 0
    groundings: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    schema: EntityTypeSchema
    split: Split | None = None

    def __post_init__(self):
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise CorpusError(f"duplicate document id {dup!r}")

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def by_id(self) -> dict[str, Document]:
        return {d.id: d for d in self.documents}

    def counts(self) -> CorpusCounts:
        golds = [d.gold for d in self.documents if d.gold is not None]
        return CorpusCounts(
            docs=len(self.documents),
            sentences=sum(count_sentences(d.text) for d in self.documents),
            entities=sum(len(g.entities) for g in golds),
            chains=sum(len(g.chains) for g in golds),
            relations=sum(len(g.relations) for g in golds),
            groundings=sum(len(g.regions) for g in golds),
        )


def document_to_dict(doc: Document) -> dict:
    out = {"id": doc.id, "text": doc.text, "language": doc.language.value, "images": list(doc.image_refs)}
    if doc.gold is not None:
        out["gold"] = doc.gold.to_dict()
    return out


def document_from_dict(data: Mapping) -> Document:
    gold = data.get("gold")
    return Document(
        id=str(data["id"]),
        text=data["text"],
        language=data.get("language", "EN"),
        image_refs=tuple(data.get("images", ())),
        gold=AnnotationSet.from_dict(gold) if gold is not None else None,
    )


def load_schema(path: str | Path) -> EntityTypeSchema:
    return EntityTypeSchema.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_corpus(path: str | Path, schema: EntityTypeSchema | None = None, split: Split | None = None) -> Corpus:
    path = Path(path)
    if schema is None:
        schema_path = path.parent / SCHEMA_FILENAME
        if not schema_path.exists():
            raise CorpusError(f"{path}: no {SCHEMA_FILENAME} next to the corpus file")
        schema = load_schema(schema_path)
    docs = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = document_from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed document: {exc}") from exc
            if doc.gold is not None:
                report = validate_annotation_set(doc.gold, doc, schema)
                if report.errors:
                    detail = "; ".join(f"{v.code}: {v.detail}" for v in report.errors)
                    raise CorpusError(f"document {doc.id!r}: {detail}")
            docs.append(doc)
    return Corpus(tuple(docs), schema, split if split is not None else Split.infer(path))


def write_corpus(path: str | Path, docs: Iterable[Document], schema: EntityTypeSchema | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(document_to_dict(d), ensure_ascii=False) + "\n")
    if schema is not None:
        (path.parent / SCHEMA_FILENAME).write_text(
            json.dumps(schema.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
