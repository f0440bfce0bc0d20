"""Shared domain types for the toolkit and their validation rules."""

from __future__ import annotations

import enum
import math
import unicodedata
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType

NOT_MENTIONED = "not mentioned"
NOT_MENTIONED_ZH = "未提及"

# Default attribute sets per type; OTHER/MISC intentionally carry no attributes.
DEFAULT_ATTRIBUTES: dict[str, tuple[str, ...]] = {
    "PER": (
        "name",
        "occupation",
        "gender",
        "nationality",
        "marital status",
        "place of birth",
        "place of death",
    ),
    "LOC": ("name", "type", "function"),
    "ORG": ("name", "type", "establishment status", "affiliation", "domain"),
    "TIME": ("name", "incident"),
}


def normalize(text: str) -> str:
    """NFC-normalize and collapse runs of whitespace. Case is preserved."""
    return " ".join(unicodedata.normalize("NFC", text).split())


def is_not_mentioned(value: str) -> bool:
    v = normalize(value).rstrip(".。").strip()
    return v.casefold() == NOT_MENTIONED or v == NOT_MENTIONED_ZH


class Language(str, enum.Enum):
    EN = "EN"
    ZH = "ZH"


class Provenance(str, enum.Enum):
    GENERATED = "GENERATED"
    REVIEWED = "REVIEWED"


@dataclass(frozen=True)
class EntityTypeSchema:
    types: tuple[str, ...]
    attributes_per_type: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    relation_types: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "relation_types", tuple(self.relation_types))
        attrs = {k: tuple(v) for k, v in dict(self.attributes_per_type).items()}
        object.__setattr__(self, "attributes_per_type", MappingProxyType(attrs))
        if len(set(self.types)) != len(self.types):
            raise ValueError("duplicate entity type in schema")
        if len(set(self.relation_types)) != len(self.relation_types):
            raise ValueError("duplicate relation type in schema")
        for t in attrs:
            if t not in self.types:
                raise ValueError(f"attribute list given for unknown type {t!r}")

    def attributes(self, etype: str) -> tuple[str, ...]:
        return self.attributes_per_type.get(etype, ())

    @classmethod
    def with_defaults(
        cls, types: Sequence[str] = ("PER", "LOC", "ORG", "TIME"), relation_types: Sequence[str] = ()
    ) -> EntityTypeSchema:
        """Schema whose attribute lists come from the built-in table (empty for other types)."""
        attrs = {t: DEFAULT_ATTRIBUTES.get(t, ()) for t in types}
        return cls(tuple(types), attrs, tuple(relation_types))

    def to_dict(self) -> dict:
        return {
            "types": list(self.types),
            "attributes": {t: list(self.attributes(t)) for t in self.types},
            "relation_types": list(self.relation_types),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> EntityTypeSchema:
        types = tuple(data["types"])
        raw_attrs = data.get("attributes")
        if raw_attrs is None:
            attrs = {t: DEFAULT_ATTRIBUTES.get(t, ()) for t in types}
        else:
            attrs = {t: tuple(raw_attrs.get(t, ())) for t in types}
        return cls(types, attrs, tuple(data.get("relation_types", ())))


@dataclass(frozen=True)
class Entity:
    surface: str
    etype: str

    def __post_init__(self):
        object.__setattr__(self, "surface", normalize(self.surface))


@dataclass(frozen=True)
class EntityChain:
    id: int
    mentions: tuple[str, ...]
    ctype: str

    def __post_init__(self):
        object.__setattr__(self, "mentions", tuple(normalize(m) for m in self.mentions))

    @property
    def mention_set(self) -> frozenset[str]:
        return frozenset(self.mentions)


@dataclass(frozen=True)
class RelationTriple:
    rtype: str
    subject_chain_id: int
    object_chain_id: int


@dataclass(frozen=True)
class VisualRegion:
    """A typed box in center format; all coordinates normalized to the unit square."""

    image_ref: str
    rtype: str
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite number")
            object.__setattr__(self, name, float(value))
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValueError("box center outside [0, 1]")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValueError("box width/height outside (0, 1]")
        x1, y1, x2, y2 = self.corners()
        if x2 <= x1 or y2 <= y1:
            raise ValueError("box has no area inside the unit square")

    def corners(self) -> tuple[float, float, float, float]:
        """Corner coordinates (x1, y1, x2, y2) clipped to the unit square."""
        x1 = min(max(self.cx - self.w / 2, 0.0), 1.0)
        x2 = min(max(self.cx + self.w / 2, 0.0), 1.0)
        y1 = min(max(self.cy - self.h / 2, 0.0), 1.0)
        y2 = min(max(self.cy + self.h / 2, 0.0), 1.0)
        return x1, y1, x2, y2


@dataclass(frozen=True)
class AnnotationSet:
    entities: tuple[Entity, ...] = ()
    chains: tuple[EntityChain, ...] = ()
    relations: tuple[RelationTriple, ...] = ()
    regions: tuple[VisualRegion, ...] = ()

    def __post_init__(self):
        # entities behave as an ordered set: first appearance wins
        object.__setattr__(self, "entities", tuple(dict.fromkeys(self.entities)))
        object.__setattr__(self, "chains", tuple(self.chains))
        object.__setattr__(self, "relations", tuple(self.relations))
        object.__setattr__(self, "regions", tuple(self.regions))

    def is_empty(self) -> bool:
        return not (self.entities or self.chains or self.relations or self.regions)

    def chain_by_id(self) -> dict[int, EntityChain]:
        return {c.id: c for c in self.chains}

    def canonical(self, schema: EntityTypeSchema, image_refs: Sequence[str] = ()) -> AnnotationSet:
        """Reorder contents into the order the gold renderer emits them."""
        type_rank = {t: i for i, t in enumerate(schema.types)}
        rel_rank = {t: i for i, t in enumerate(schema.relation_types)}
        img_rank = {ref: i for i, ref in enumerate(image_refs)}
        big = len(type_rank) + len(rel_rank) + len(img_rank) + 1
        return AnnotationSet(
            entities=tuple(sorted(self.entities, key=lambda e: type_rank.get(e.etype, big))),
            chains=tuple(sorted(self.chains, key=lambda c: c.id)),
            relations=tuple(sorted(self.relations, key=lambda r: rel_rank.get(r.rtype, big))),
            regions=tuple(sorted(self.regions, key=lambda g: img_rank.get(g.image_ref, big))),
        )

    def to_dict(self) -> dict:
        return {
            "entities": [{"surface": e.surface, "type": e.etype} for e in self.entities],
            "chains": [{"id": c.id, "mentions": list(c.mentions), "type": c.ctype} for c in self.chains],
            "relations": [
                {"type": r.rtype, "subject": r.subject_chain_id, "object": r.object_chain_id}
                for r in self.relations
            ],
            "regions": [
                {"image": g.image_ref, "type": g.rtype, "cx": g.cx, "cy": g.cy, "w": g.w, "h": g.h}
                for g in self.regions
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> AnnotationSet:
        return cls(
            entities=tuple(Entity(e["surface"], e["type"]) for e in data.get("entities", ())),
            chains=tuple(
                EntityChain(int(c["id"]), tuple(c["mentions"]), c["type"]) for c in data.get("chains", ())
            ),
            relations=tuple(
                RelationTriple(r["type"], int(r["subject"]), int(r["object"])) for r in data.get("relations", ())
            ),
            regions=tuple(
                VisualRegion(g["image"], g["type"], g["cx"], g["cy"], g["w"], g["h"])
                for g in data.get("regions", ())
            ),
        )


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    language: Language = Language.EN
    image_refs: tuple[str, ...] = ()
    gold: AnnotationSet | None = None

    def __post_init__(self):
        object.__setattr__(self, "language", Language(self.language))
        object.__setattr__(self, "image_refs", tuple(self.image_refs))
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.text:
            raise ValueError(f"document {self.id!r}: text must be non-empty")
        if len(set(self.image_refs)) != len(self.image_refs):
            raise ValueError(f"document {self.id!r}: duplicate image reference")

    def image_key(self, image_ref: str) -> str:
        """Template key (``Img_1``, ``Img_2``, ...) for one of this document's images."""
        return f"Img_{self.image_refs.index(image_ref) + 1}"


@dataclass(frozen=True)
class AttributeRecord:
    etype: str
    values: Mapping[str, str]
    provenance: Provenance = Provenance.GENERATED
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        values = {k: normalize(v) for k, v in dict(self.values).items()}
        object.__setattr__(self, "values", MappingProxyType(values))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        object.__setattr__(self, "flags", tuple(self.flags))
        if not values.get("name"):
            raise ValueError("attribute record must have a non-empty 'name'")
        if len(values) < 2:
            raise ValueError("attribute record needs at least two attributes")
        for key, value in values.items():
            if not value or is_not_mentioned(value):
                raise ValueError(f"attribute {key!r} has no mentioned value")

    def __eq__(self, other):
        if not isinstance(other, AttributeRecord):
            return NotImplemented
        return (self.etype, list(self.values.items()), self.provenance, self.flags) == (
            other.etype,
            list(other.values.items()),
            other.provenance,
            other.flags,
        )

    def __hash__(self):
        return hash((self.etype, tuple(self.values.items()), self.provenance, self.flags))

    def to_dict(self) -> dict:
        return {
            "type": self.etype,
            "values": dict(self.values),
            "provenance": self.provenance.value,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> AttributeRecord:
        return cls(
            data["type"],
            data["values"],
            Provenance(data.get("provenance", "GENERATED")),
            tuple(data.get("flags", ())),
        )


def check_attribute_record(record: AttributeRecord, schema: EntityTypeSchema) -> list[str]:
    """Schema-dependent problems with a record (the rest is enforced on construction)."""
    allowed = schema.attributes(record.etype)
    problems = []
    if record.etype not in schema.types:
        problems.append(f"unknown entity type {record.etype!r}")
    for key in record.values:
        if key not in allowed:
            problems.append(f"attribute {key!r} not defined for {record.etype}")
    return problems


@dataclass(frozen=True)
class SceneGraph:
    image_ref: str
    triples: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self):
        cleaned = []
        for triple in self.triples:
            if len(triple) != 3:
                raise ValueError(f"scene-graph triple must have 3 parts, got {len(triple)}")
            t = tuple(normalize(x) for x in triple)
            if not all(t):
                raise ValueError(f"scene-graph triple has an empty component: {triple!r}")
            cleaned.append(t)
        if len(set(cleaned)) != len(cleaned):
            raise ValueError("duplicate scene-graph triple")
        object.__setattr__(self, "triples", tuple(cleaned))

    def to_dict(self) -> dict:
        return {"image": self.image_ref, "triples": [list(t) for t in self.triples]}

    @classmethod
    def from_dict(cls, data: Mapping) -> SceneGraph:
        return cls(data["image"], tuple(tuple(t) for t in data.get("triples", ())))


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Violation:
    severity: Severity
    code: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity is Severity.ERROR]

    @property
    def warnings(self) -> list[Violation]:
        return [v for v in self.violations if v.severity is Severity.WARNING]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self):
        return bool(self.violations)

    def __len__(self):
        return len(self.violations)


def validate_annotation_set(ann: AnnotationSet, doc: Document, schema: EntityTypeSchema) -> ValidationReport:
    """Check ``ann`` against the type invariants. Never raises; violations are returned."""
    out: list[Violation] = []

    def error(code, detail):
        out.append(Violation(Severity.ERROR, code, detail))

    for e in ann.entities:
        if not e.surface:
            error("empty surface", f"entity of type {e.etype} has an empty surface")
        if e.etype not in schema.types:
            error("unknown entity type", f"{e.surface!r}: {e.etype!r}")

    ids = [c.id for c in ann.chains]
    if len(set(ids)) != len(ids):
        error("duplicate chain id", f"chain ids {sorted(ids)}")
    elif sorted(ids) != list(range(len(ids))):
        error("non-contiguous chain ids", f"expected 0..{len(ids) - 1}, got {sorted(ids)}")
    known = {(e.surface, e.etype) for e in ann.entities}
    for c in ann.chains:
        if not c.mentions:
            error("empty chain", f"chain {c.id} has no mentions")
        if any(not m for m in c.mentions):
            error("empty surface", f"chain {c.id} has an empty mention")
        if len(set(c.mentions)) != len(c.mentions):
            error("duplicate mention", f"chain {c.id} repeats a mention")
        if c.ctype not in schema.types:
            error("unknown entity type", f"chain {c.id}: {c.ctype!r}")
        for m in c.mentions:
            if m and (m, c.ctype) not in known:
                out.append(
                    Violation(Severity.WARNING, "mention not in entities", f"chain {c.id}: {m!r} ({c.ctype})")
                )

    id_set = set(ids)
    for r in ann.relations:
        if r.rtype not in schema.relation_types:
            error("unknown relation type", repr(r.rtype))
        for cid in (r.subject_chain_id, r.object_chain_id):
            if cid not in id_set:
                error("dangling chain id", f"relation {r.rtype!r} references chain {cid}")

    for g in ann.regions:
        if g.image_ref not in doc.image_refs:
            error("unknown image", f"region references {g.image_ref!r}")
        if g.rtype not in schema.types:
            error("unknown region type", repr(g.rtype))

    return ValidationReport(tuple(out))


def annotations_equivalent(a: AnnotationSet, b: AnnotationSet, tol: float = 1e-4) -> bool:
    """Equality up to ordering of unordered parts and coordinate tolerance ``tol``."""
    if set(a.entities) != set(b.entities):
        return False
    if sorted(a.chains, key=lambda c: c.id) != sorted(b.chains, key=lambda c: c.id):
        return False
    rel_key = lambda r: (r.rtype, r.subject_chain_id, r.object_chain_id)  # noqa: E731
    if sorted(a.relations, key=rel_key) != sorted(b.relations, key=rel_key):
        return False
    if len(a.regions) != len(b.regions):
        return False
    reg_key = lambda g: (g.image_ref, g.rtype, round(g.cx, 4), round(g.cy, 4), round(g.w, 4), round(g.h, 4))  # noqa: E731
    for x, y in zip(sorted(a.regions, key=reg_key), sorted(b.regions, key=reg_key)):
        if (x.image_ref, x.rtype) != (y.image_ref, y.rtype):
            return False
        if any(abs(p - q) > tol for p, q in zip((x.cx, x.cy, x.w, x.h), (y.cx, y.cy, y.w, y.h))):
            return False
    return True


def unique_ids(docs: Iterable[Document]) -> bool:
    seen = set()
    for d in docs:
        if d.id in seen:
            return False
        seen.add(d.id)
    return True
