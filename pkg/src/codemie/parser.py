"""Lexer and parser for code-style model output.

The accepted sublanguage is four kinds of line-delimited assignments::

    entity_dic["PER"] = ["Bob Hope", "Hope"]
    chain_dic[0] = [["Bob Hope", "Hope"], "PER"]
    relation_dic["PER-TIME_birth_time"] = [[0, 1]]
    grounding_dic["Img_1"] = [["PER", 0.5000, 0.5000, 0.4000, 0.4000]]

Parsing never fails. Anything off-grammar or off-schema is recorded as a
deviation and parsing resumes on the next line. See ``docs/grammar.md``.
"""

from __future__ import annotations

import enum
import itertools
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .core import (
    AnnotationSet,
    Entity,
    EntityChain,
    EntityTypeSchema,
    RelationTriple,
    VisualRegion,
    normalize,
)

MAX_NESTING = 8


class TokenKind(str, enum.Enum):
    IDENT = "IDENT"
    STRING = "STRING"
    INT = "INT"
    FLOAT = "FLOAT"
    LBRACKET = "LBRACKET"
    RBRACKET = "RBRACKET"
    EQUALS = "EQUALS"
    COMMA = "COMMA"
    NEWLINE = "NEWLINE"
    JUNK = "JUNK"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    line: int
    col: int


class DeviationKind(str, enum.Enum):
    UNPARSEABLE_LINE = "UNPARSEABLE_LINE"
    UNKNOWN_MAP_NAME = "UNKNOWN_MAP_NAME"
    ARITY_MISMATCH = "ARITY_MISMATCH"
    TYPE_NOT_IN_SCHEMA = "TYPE_NOT_IN_SCHEMA"
    DANGLING_CHAIN_ID = "DANGLING_CHAIN_ID"
    PROSE_CONTAMINATION = "PROSE_CONTAMINATION"
    DUPLICATE_ASSIGNMENT = "DUPLICATE_ASSIGNMENT"


DEFAULT_HALLUCINATION_KINDS = frozenset(DeviationKind) - {DeviationKind.DUPLICATE_ASSIGNMENT}


@dataclass(frozen=True)
class Deviation:
    kind: DeviationKind
    line: int
    detail: str


@dataclass(frozen=True)
class DeviationReport:
    document_id: str = ""
    deviations: tuple[Deviation, ...] = ()
    quarantine: tuple[dict, ...] = field(default=(), compare=False)

    def kinds(self) -> set[DeviationKind]:
        return {d.kind for d in self.deviations}

    def to_dict(self) -> dict:
        return {
            "document_id": self.document_id,
            "deviations": [{"kind": d.kind.value, "line": d.line, "detail": d.detail} for d in self.deviations],
            "quarantine": list(self.quarantine),
        }

    @classmethod
    def from_dict(cls, data) -> DeviationReport:
        return cls(
            data.get("document_id", ""),
            tuple(Deviation(DeviationKind(d["kind"]), int(d["line"]), d["detail"]) for d in data.get("deviations", ())),
            tuple(data.get("quarantine", ())),
        )


def has_hallucination(report: DeviationReport, kinds: Iterable[DeviationKind] | None = None) -> bool:
    flagged = DEFAULT_HALLUCINATION_KINDS if kinds is None else frozenset(DeviationKind(k) for k in kinds)
    return any(d.kind in flagged for d in report.deviations)


# --- lexer -----------------------------------------------------------------

_PUNCT = {"[": TokenKind.LBRACKET, "]": TokenKind.RBRACKET, "=": TokenKind.EQUALS, ",": TokenKind.COMMA}
_ATOM_RE = re.compile(r"[^\[\]=,\n]*")
_BLANK_RE = re.compile(r"[^\S\n]+")
_STRING_RE = {
    '"': re.compile(r'"(?:[^"\\\n]|\\[^\n])*"'),
    "'": re.compile(r"'(?:[^'\\\n]|\\[^\n])*'"),
}
_INT_RE = re.compile(r"[-+]?[0-9]+")
_FLOAT_RE = re.compile(r"[-+]?(?:[0-9]+\.[0-9]*|\.[0-9]+)(?:[eE][-+]?[0-9]+)?|[-+]?[0-9]+[eE][-+]?[0-9]+")
_IDENT_RE = re.compile(r"[^\W\d][\w\-]*")


def _classify_atom(atom: str) -> TokenKind:
    if _INT_RE.fullmatch(atom):
        return TokenKind.INT
    if _FLOAT_RE.fullmatch(atom):
        return TokenKind.FLOAT
    if _IDENT_RE.fullmatch(atom):
        return TokenKind.IDENT
    return TokenKind.JUNK


def tokenize(text: str | bytes) -> list[Token]:
    """Split ``text`` into tokens. Total: unrecognized spans become JUNK.

    Whitespace other than newlines separates tokens and is not itself a token.
    A run of characters between delimiters is one atom even if it contains
    spaces, so free prose lands in a single JUNK token.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    tokens: list[Token] = []
    n = len(text)
    i = 0
    line, line_start = 1, 0
    while i < n:
        c = text[i]
        col = i - line_start + 1
        if c == "\n":
            tokens.append(Token(TokenKind.NEWLINE, c, line, col))
            i += 1
            line, line_start = line + 1, i
        elif c.isspace():
            i = _BLANK_RE.match(text, i).end()
        elif c in _PUNCT:
            tokens.append(Token(_PUNCT[c], c, line, col))
            i += 1
        elif c in _STRING_RE:
            m = _STRING_RE[c].match(text, i)
            if m:
                tokens.append(Token(TokenKind.STRING, m.group(), line, col))
                i = m.end()
            else:
                end = text.find("\n", i)
                end = n if end < 0 else end
                tokens.append(Token(TokenKind.JUNK, text[i:end].rstrip(), line, col))
                i = end
        else:
            j = _ATOM_RE.match(text, i).end()
            atom = text[i:j].rstrip()
            tokens.append(Token(_classify_atom(atom), atom, line, col))
            i = j
    return tokens


_ESCAPES = {"n": "\n", "r": "\r", "t": "\t"}


def decode_string(lexeme: str) -> str:
    body = lexeme[1:-1]
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            out.append(_ESCAPES.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


# --- parser ----------------------------------------------------------------


class Bare(str):
    """An unquoted scalar accepted in lenient mode."""


@dataclass(frozen=True)
class Num:
    value: int | float
    lexeme: str

    @property
    def is_int(self) -> bool:
        return isinstance(self.value, int)


class _LineError(Exception):
    def __init__(self, kind: DeviationKind, detail: str):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail


class _Cursor:
    def __init__(self, tokens: Sequence[Token], strict: bool):
        self.tokens = tokens
        self.pos = 0
        self.strict = strict

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: TokenKind) -> Token:
        tok = self.peek()
        if tok is None or tok.kind is not kind:
            found = "end of line" if tok is None else repr(tok.lexeme)
            raise _LineError(DeviationKind.UNPARSEABLE_LINE, f"expected {kind.value}, found {found}")
        self.pos += 1
        return tok

    def scalar(self, tok: Token):
        if tok.kind is TokenKind.STRING:
            return decode_string(tok.lexeme)
        if tok.kind is TokenKind.INT:
            if len(tok.lexeme) > 18:
                raise _LineError(DeviationKind.UNPARSEABLE_LINE, "integer literal too long")
            return Num(int(tok.lexeme), tok.lexeme)
        if tok.kind is TokenKind.FLOAT:
            return Num(float(tok.lexeme), tok.lexeme)
        if tok.kind in (TokenKind.IDENT, TokenKind.JUNK):
            if self.strict:
                raise _LineError(DeviationKind.UNPARSEABLE_LINE, f"unquoted value {tok.lexeme!r}")
            return Bare(tok.lexeme)
        raise _LineError(DeviationKind.UNPARSEABLE_LINE, f"unexpected {tok.lexeme!r}")

    def value(self, depth: int = 0):
        tok = self.peek()
        if tok is None:
            raise _LineError(DeviationKind.UNPARSEABLE_LINE, "missing value")
        if tok.kind is not TokenKind.LBRACKET:
            self.pos += 1
            return self.scalar(tok)
        if depth >= MAX_NESTING:
            raise _LineError(DeviationKind.UNPARSEABLE_LINE, "lists nested too deeply")
        self.pos += 1
        items = []
        while True:
            tok = self.peek()
            if tok is None:
                raise _LineError(DeviationKind.UNPARSEABLE_LINE, "unclosed list")
            if tok.kind is TokenKind.RBRACKET:
                self.pos += 1
                return items
            items.append(self.value(depth + 1))
            tok = self.peek()
            if tok is not None and tok.kind is TokenKind.COMMA:
                self.pos += 1
            elif tok is None or tok.kind is not TokenKind.RBRACKET:
                raise _LineError(DeviationKind.UNPARSEABLE_LINE, "expected ',' or ']' in list")


MAP_NAMES = ("entity_dic", "chain_dic", "relation_dic", "grounding_dic")
_IMG_KEY_RE = re.compile(r"Img_([1-9][0-9]*)")
_CODE_KINDS = {TokenKind.LBRACKET, TokenKind.RBRACKET, TokenKind.EQUALS, TokenKind.STRING}


def _parse_statement(tokens: Sequence[Token], strict: bool):
    head = tokens[0]
    if head.kind is TokenKind.IDENT and head.lexeme in MAP_NAMES:
        cur = _Cursor(tokens, strict)
        cur.pos = 1
        cur.take(TokenKind.LBRACKET)
        key_tok = cur.peek()
        if key_tok is None or key_tok.kind in (TokenKind.LBRACKET, TokenKind.RBRACKET):
            raise _LineError(DeviationKind.UNPARSEABLE_LINE, "missing key")
        cur.pos += 1
        key = cur.scalar(key_tok)
        cur.take(TokenKind.RBRACKET)
        cur.take(TokenKind.EQUALS)
        if cur.peek() is None or cur.peek().kind is not TokenKind.LBRACKET:
            raise _LineError(DeviationKind.UNPARSEABLE_LINE, "assigned value must be a list")
        value = cur.value()
        if cur.peek() is not None:
            raise _LineError(DeviationKind.UNPARSEABLE_LINE, f"trailing text {cur.peek().lexeme!r}")
        return head.lexeme, key, value
    second = tokens[1] if len(tokens) > 1 else None
    if head.kind is TokenKind.IDENT and second is not None and second.kind in (TokenKind.LBRACKET, TokenKind.EQUALS):
        raise _LineError(DeviationKind.UNKNOWN_MAP_NAME, f"unknown map {head.lexeme!r}")
    if not any(t.kind in _CODE_KINDS for t in tokens):
        raise _LineError(DeviationKind.PROSE_CONTAMINATION, " ".join(t.lexeme for t in tokens)[:80])
    raise _LineError(DeviationKind.UNPARSEABLE_LINE, f"not an assignment (starts with {head.lexeme!r})")


def _as_text(value) -> str | None:
    if isinstance(value, str):
        return str(value)
    if isinstance(value, Num):
        return value.lexeme
    return None


def _text_item(value, strict: bool, what: str) -> str:
    if isinstance(value, Num) and strict:
        raise _LineError(DeviationKind.ARITY_MISMATCH, f"{what} must be a quoted string")
    text = _as_text(value)
    if text is None:
        raise _LineError(DeviationKind.ARITY_MISMATCH, f"{what} must be a string, got a list")
    text = normalize(text)
    if not text:
        raise _LineError(DeviationKind.ARITY_MISMATCH, f"{what} is empty")
    return text


def _key_text(key, strict: bool) -> str:
    if isinstance(key, Num) or (strict and isinstance(key, Bare)):
        raise _LineError(DeviationKind.ARITY_MISMATCH, "key must be a quoted string")
    return normalize(str(key))


def _int_item(value, what: str) -> int:
    if isinstance(value, Num) and value.is_int:
        return value.value
    raise _LineError(DeviationKind.ARITY_MISMATCH, f"{what} must be an integer")


def _num_item(value, what: str) -> float:
    if isinstance(value, Num):
        return float(value.value)
    raise _LineError(DeviationKind.ARITY_MISMATCH, f"{what} must be a number")


class _Builder:
    def __init__(self, schema: EntityTypeSchema, image_refs: Sequence[str] | None, strict: bool):
        self.schema = schema
        self.image_refs = image_refs
        self.strict = strict
        self.entities: dict[str, list[str]] = {}
        self.chains: dict[int, EntityChain] = {}
        self.relations: dict[str, tuple[int, list[tuple[int, int]]]] = {}
        self.regions: dict[str, list[VisualRegion]] = {}
        self.deviations: list[Deviation] = []
        self.quarantine: list[dict] = []

    def deviate(self, kind: DeviationKind, line: int, detail: str):
        self.deviations.append(Deviation(kind, line, detail))

    def hold(self, line: int, name: str, key, item, reason: DeviationKind, detail: str):
        self.deviate(reason, line, detail)
        self.quarantine.append({"line": line, "map": name, "key": key, "item": item, "reason": reason.value})

    def store(self, table: dict, key, value, line: int, name: str):
        if key in table:
            self.deviate(DeviationKind.DUPLICATE_ASSIGNMENT, line, f"{name}[{key!r}] assigned again")
        table[key] = value

    def apply(self, name: str, key, value, line: int):
        if name == "entity_dic":
            etype = _key_text(key, self.strict)
            mentions = [_text_item(v, self.strict, "entity") for v in value]
            if etype not in self.schema.types:
                self.hold(line, name, etype, mentions, DeviationKind.TYPE_NOT_IN_SCHEMA, f"entity type {etype!r}")
                return
            self.store(self.entities, etype, list(dict.fromkeys(mentions)), line, name)
        elif name == "chain_dic":
            cid = _int_item(key, "chain id")
            if cid < 0:
                raise _LineError(DeviationKind.ARITY_MISMATCH, "chain id must be non-negative")
            if len(value) != 2 or not isinstance(value[0], list):
                raise _LineError(DeviationKind.ARITY_MISMATCH, "chain must be [[mentions...], type]")
            mentions = [_text_item(v, self.strict, "mention") for v in value[0]]
            if not mentions:
                raise _LineError(DeviationKind.ARITY_MISMATCH, "chain has no mentions")
            ctype = _text_item(value[1], self.strict, "chain type")
            if ctype not in self.schema.types:
                self.hold(line, name, cid, [mentions, ctype], DeviationKind.TYPE_NOT_IN_SCHEMA, f"chain type {ctype!r}")
                return
            chain = EntityChain(cid, tuple(dict.fromkeys(mentions)), ctype)
            self.store(self.chains, cid, chain, line, name)
        elif name == "relation_dic":
            rtype = _key_text(key, self.strict)
            pairs = []
            for item in value:
                if not isinstance(item, list) or len(item) != 2:
                    raise _LineError(DeviationKind.ARITY_MISMATCH, "relation entry must be [subject_id, object_id]")
                pairs.append((_int_item(item[0], "subject id"), _int_item(item[1], "object id")))
            if rtype not in self.schema.relation_types:
                self.hold(line, name, rtype, pairs, DeviationKind.TYPE_NOT_IN_SCHEMA, f"relation type {rtype!r}")
                return
            self.store(self.relations, rtype, (line, pairs), line, name)
        else:
            image_key = _key_text(key, self.strict)
            m = _IMG_KEY_RE.fullmatch(image_key)
            if not m:
                raise _LineError(DeviationKind.UNPARSEABLE_LINE, f"bad image key {image_key!r}")
            index = int(m.group(1))
            if self.image_refs is not None:
                if index > len(self.image_refs):
                    raise _LineError(DeviationKind.UNPARSEABLE_LINE, f"no image {image_key!r} in document")
                image_ref = self.image_refs[index - 1]
            else:
                image_ref = image_key
            boxes = []
            for item in value:
                if not isinstance(item, list) or len(item) != 5:
                    raise _LineError(DeviationKind.ARITY_MISMATCH, "region must be [type, cx, cy, w, h]")
                rtype = _text_item(item[0], self.strict, "region type")
                coords = [_num_item(v, "coordinate") for v in item[1:]]
                try:
                    box = VisualRegion(image_ref, rtype, *coords)
                except ValueError as exc:
                    raise _LineError(DeviationKind.ARITY_MISMATCH, f"invalid box: {exc}") from None
                boxes.append(box)
            kept = []
            for box in boxes:
                if box.rtype in self.schema.types:
                    kept.append(box)
                else:
                    item = [box.rtype, box.cx, box.cy, box.w, box.h]
                    self.hold(line, name, image_key, item, DeviationKind.TYPE_NOT_IN_SCHEMA, f"region type {box.rtype!r}")
            self.store(self.regions, image_ref, kept, line, name)

    def finish(self) -> AnnotationSet:
        entities = [Entity(s, t) for t, surfaces in self.entities.items() for s in surfaces]
        relations = []
        for rtype, (line, pairs) in self.relations.items():
            for sub, obj in pairs:
                missing = [c for c in (sub, obj) if c not in self.chains]
                if missing:
                    self.hold(
                        line, "relation_dic", rtype, [sub, obj], DeviationKind.DANGLING_CHAIN_ID,
                        f"{rtype!r} references undefined chain {missing[0]}",
                    )
                else:
                    relations.append(RelationTriple(rtype, sub, obj))
        self.deviations.sort(key=lambda d: d.line)
        return AnnotationSet(
            entities=tuple(entities),
            chains=tuple(self.chains[k] for k in sorted(self.chains)),
            relations=tuple(relations),
            regions=tuple(r for boxes in self.regions.values() for r in boxes),
        )


def _lines(tokens: Iterable[Token]) -> Iterable[tuple[int, list[Token]]]:
    content = (t for t in tokens if t.kind is not TokenKind.NEWLINE)
    for line, group in itertools.groupby(content, key=lambda t: t.line):
        yield line, list(group)


def parse_output(
    text: str | bytes,
    schema: EntityTypeSchema,
    *,
    document_id: str = "",
    image_refs: Sequence[str] | None = None,
    strict: bool = False,
) -> tuple[AnnotationSet, DeviationReport]:
    """Parse model output into annotations plus a report of every deviation.

    ``image_refs`` maps ``Img_i`` keys back to the document's image
    identifiers; without it regions keep the raw key as ``image_ref``.
    """
    builder = _Builder(schema, None if image_refs is None else tuple(image_refs), strict)
    for line, toks in _lines(tokenize(text)):
        try:
            name, key, value = _parse_statement(toks, strict)
            builder.apply(name, key, value, line)
        except _LineError as err:
            builder.deviate(err.kind, line, err.detail)
    ann = builder.finish()
    return ann, DeviationReport(document_id, tuple(builder.deviations), tuple(builder.quarantine))
