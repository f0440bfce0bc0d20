"""Manual curation of generated attribute records, journaled for resumption."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from ..core import AttributeRecord, EntityTypeSchema, Provenance, check_attribute_record

log = logging.getLogger(__name__)


class Action(str, enum.Enum):
    KEEP = "KEEP"
    DROP = "DROP"
    EDIT = "EDIT"


@dataclass(frozen=True)
class Decision:
    """KEEP and DROP finish the current record; EDIT changes it in place.

    An EDIT with ``value=None`` removes the field.
    """

    action: Action
    field: str | None = None
    value: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "action", Action(self.action))
        if self.action is Action.EDIT and not self.field:
            raise ValueError("EDIT needs a field name")

    def to_dict(self) -> dict:
        return {"action": self.action.value, "field": self.field, "value": self.value}

    @classmethod
    def from_dict(cls, data) -> Decision:
        return cls(Action(data["action"]), data.get("field"), data.get("value"))


KEEP = Decision(Action.KEEP)
DROP = Decision(Action.DROP)


def EDIT(field: str, value: str | None) -> Decision:  # noqa: N802
    return Decision(Action.EDIT, field, value)


def _fingerprint(records: Sequence[AttributeRecord]) -> str:
    blob = json.dumps([r.to_dict() for r in records], sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ReviewSession:
    def __init__(
        self,
        records: Sequence[AttributeRecord],
        schema: EntityTypeSchema | None = None,
        journal: str | Path | None = None,
    ):
        self.records = list(records)
        self.schema = schema
        self.journal = Path(journal) if journal is not None else None
        self.cursor = 0
        self.current = self.records[0] if self.records else None
        self.kept: list[AttributeRecord] = []
        self.rejected: list[tuple[int, Decision, str]] = []
        if self.journal is not None:
            self._resume()

    @property
    def done(self) -> bool:
        return self.cursor >= len(self.records)

    def _resume(self):
        fingerprint = _fingerprint(self.records)
        if not self.journal.exists() or self.journal.stat().st_size == 0:
            self.journal.parent.mkdir(parents=True, exist_ok=True)
            self._append({"session": fingerprint, "records": len(self.records)})
            return
        with self.journal.open(encoding="utf-8") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        if not lines or lines[0].get("session") != fingerprint:
            raise ValueError(f"journal {self.journal} belongs to a different set of records")
        for entry in lines[1:]:
            self._apply(Decision.from_dict(entry), record=False)

    def _append(self, entry: dict):
        with self.journal.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")

    def _edit(self, record: AttributeRecord, field: str, value: str | None) -> AttributeRecord:
        values = dict(record.values)
        if value is None:
            values.pop(field, None)
        else:
            values[field] = value
        edited = AttributeRecord(record.etype, values, record.provenance, record.flags)
        if self.schema is not None:
            problems = check_attribute_record(edited, self.schema)
            if problems:
                raise ValueError("; ".join(problems))
        return edited

    def _apply(self, decision: Decision, record: bool = True) -> bool:
        if self.done:
            raise IndexError("no records left to review")
        accepted = True
        if decision.action is Action.EDIT:
            try:
                self.current = self._edit(self.current, decision.field, decision.value)
            except ValueError as exc:
                accepted = False
                self.rejected.append((self.cursor, decision, str(exc)))
                log.info("rejected edit on record %d: %s", self.cursor, exc)
        else:
            if decision.action is Action.KEEP:
                r = self.current
                self.kept.append(AttributeRecord(r.etype, r.values, Provenance.REVIEWED, r.flags))
            self.cursor += 1
            self.current = self.records[self.cursor] if not self.done else None
        if record and self.journal is not None:
            self._append(decision.to_dict())
        return accepted

    def apply(self, decision: Decision) -> bool:
        """Apply one decision; returns False when an EDIT was rejected."""
        return self._apply(decision)

    def result(self) -> list[AttributeRecord]:
        """Reviewed records kept so far, followed by records not yet reviewed."""
        pending = []
        if not self.done:
            pending = [self.current, *self.records[self.cursor + 1 :]]
        return self.kept + pending


def review_session(
    records: Sequence[AttributeRecord],
    decisions_in: Iterable[Decision],
    *,
    schema: EntityTypeSchema | None = None,
    journal: str | Path | None = None,
) -> list[AttributeRecord]:
    session = ReviewSession(records, schema, journal)
    for decision in decisions_in:
        if session.done:
            break
        session.apply(decision)
    return session.result()
