"""Rendering of the code-style input template and the gold output assignments.

Everything here is a pure function of its arguments; byte-for-byte output is
pinned by the golden files under ``tests/golden``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

from .core import (
    AnnotationSet,
    AttributeRecord,
    Document,
    EntityTypeSchema,
    SceneGraph,
    check_attribute_record,
    validate_annotation_set,
)

INDENT = "    "
PAYLOAD_INDENT = INDENT * 2
DEFAULT_MAX_IMAGES = 32

DOC_COMMENT = (
    '"""first , extract entities from text .\n'
    f"{PAYLOAD_INDENT}second , extract entity chains base on entities .\n"
    f"{PAYLOAD_INDENT}third , extract entity chains relation based on entity chains .\n"
    f"{PAYLOAD_INDENT}fourth , inferring the visual area coordinate and type in the image based on the scene graph ."
    '"""'
)
# spelling kept as published
TRAILING_COMMENT = "# extacted entities , entity chains , relations and visual areas"
MAP_NAMES = ("entity_dic", "chain_dic", "relation_dic", "grounding_dic")


class TemplateError(ValueError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"record {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class InputTemplate:
    text: str
    metadata: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class OutputTemplate:
    text: str


def quote(value: str) -> str:
    """Double-quoted literal; the parser's string decoder is the inverse."""
    escaped = (
        value.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )
    return f'"{escaped}"'


def format_coord(value: float) -> str:
    return f"{value:.4f}"


def _format_size(value: float) -> str:
    # sizes that would round to zero are rendered at the smallest representable step
    text = f"{value:.4f}"
    return "0.0001" if float(text) == 0.0 else text


def serialize_entity_attributes(records: Sequence[AttributeRecord], schema: EntityTypeSchema) -> str:
    """One ``TYPE: [{attr: value, ...}, ...]`` line per type that has records."""
    by_type: dict[str, list[AttributeRecord]] = {}
    for i, rec in enumerate(records):
        if not isinstance(rec, AttributeRecord):
            raise TemplateError("not an AttributeRecord", i)
        problems = check_attribute_record(rec, schema)
        if problems:
            raise TemplateError("; ".join(problems), i)
        by_type.setdefault(rec.etype, []).append(rec)

    lines = []
    for etype in schema.types:
        if etype not in by_type:
            continue
        order = schema.attributes(etype)
        maps = []
        for rec in by_type[etype]:
            pairs = [f"{a}: {rec.values[a]}" for a in order if a in rec.values]
            maps.append("{" + ", ".join(pairs) + "}")
        lines.append(f"{etype}: [" + ", ".join(maps) + "]")
    return "\n".join(lines)


def _scene_graph_lines(
    graphs: Sequence[SceneGraph], image_refs: Sequence[str] | None, max_images: int | None
) -> tuple[list[str], int]:
    if image_refs is None:
        ordered = list(enumerate(graphs, start=1))
    else:
        position = {ref: i for i, ref in enumerate(image_refs, start=1)}
        for g in graphs:
            if g.image_ref not in position:
                raise TemplateError(f"scene graph for unknown image {g.image_ref!r}")
        ordered = sorted(((position[g.image_ref], g) for g in graphs), key=lambda p: p[0])
    lines = []
    for index, graph in ordered:
        for triple in graph.triples:
            if len(triple) != 3 or not all(triple):
                raise TemplateError(f"malformed scene-graph triple {triple!r} for {graph.image_ref!r}")
        body = ", ".join("[" + ", ".join(t) + "]" for t in graph.triples)
        lines.append(f"Img_{index}: [{body}]")
    truncated = 0
    if max_images is not None and len(lines) > max_images:
        truncated = len(lines) - max_images
        lines = lines[:max_images]
    return lines, truncated


def serialize_scene_graphs(
    graphs: Sequence[SceneGraph], image_refs: Sequence[str] | None = None, max_images: int | None = None
) -> str:
    """One ``Img_i: [[s, o, r], ...]`` line per image.

    ``i`` is the 1-based position in ``image_refs`` when given, otherwise the
    position in ``graphs``.
    """
    lines, _ = _scene_graph_lines(graphs, image_refs, max_images)
    return "\n".join(lines)


def _block_literal(payload: str) -> str:
    if not payload:
        return '""'
    body = "\n".join(PAYLOAD_INDENT + line.replace("\\", "\\\\").replace('"', '\\"') for line in payload.split("\n"))
    return f'"""\n{body}\n{INDENT}"""'


def build_input_template(
    doc: Document,
    attrs: Sequence[AttributeRecord],
    graphs: Sequence[SceneGraph],
    schema: EntityTypeSchema,
    max_images: int = DEFAULT_MAX_IMAGES,
) -> InputTemplate:
    attr_payload = serialize_entity_attributes(attrs, schema)
    sg_lines, truncated = _scene_graph_lines(graphs, doc.image_refs, max_images)
    lines = [
        "def information_extraction(input_text, entity_attribute, scene_graph):",
        INDENT + DOC_COMMENT,
        f"{INDENT}input_text = {quote(doc.text)}",
        f"{INDENT}entity_attribute = {_block_literal(attr_payload)}",
        f"{INDENT}scene_graph = {_block_literal(chr(10).join(sg_lines))}",
        *(f"{INDENT}{name} = {{}}" for name in MAP_NAMES),
        INDENT + TRAILING_COMMENT,
    ]
    meta = {"scene_graph_images": len(sg_lines), "truncated_images": truncated}
    return InputTemplate("\n".join(lines) + "\n", meta)


def render_gold_output(ann: AnnotationSet, doc: Document, schema: EntityTypeSchema) -> OutputTemplate:
    report = validate_annotation_set(ann, doc, schema)
    if not report.ok:
        raise TemplateError("; ".join(f"{v.code}: {v.detail}" for v in report.errors))

    lines = []
    for etype in schema.types:
        surfaces = [e.surface for e in ann.entities if e.etype == etype]
        if surfaces:
            lines.append(f"entity_dic[{quote(etype)}] = [" + ", ".join(map(quote, surfaces)) + "]")
    for chain in sorted(ann.chains, key=lambda c: c.id):
        mentions = ", ".join(map(quote, chain.mentions))
        lines.append(f"chain_dic[{chain.id}] = [[{mentions}], {quote(chain.ctype)}]")
    for rtype in schema.relation_types:
        pairs = [f"[{r.subject_chain_id}, {r.object_chain_id}]" for r in ann.relations if r.rtype == rtype]
        if pairs:
            lines.append(f"relation_dic[{quote(rtype)}] = [" + ", ".join(pairs) + "]")
    for ref in doc.image_refs:
        boxes = [
            f"[{quote(g.rtype)}, {format_coord(g.cx)}, {format_coord(g.cy)}, {_format_size(g.w)}, {_format_size(g.h)}]"
            for g in ann.regions
            if g.image_ref == ref
        ]
        if boxes:
            lines.append(f"grounding_dic[{quote(doc.image_key(ref))}] = [" + ", ".join(boxes) + "]")
    return OutputTemplate("\n".join(lines) + "\n" if lines else "")
