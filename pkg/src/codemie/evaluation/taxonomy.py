"""Classify prediction errors into the two error kinds tracked per task.

Errors that fit neither kind (a wholly spurious or wholly missed item) are
counted as ``unclassified`` and left out of the rate denominators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import AnnotationSet, Entity
from .coref import align_chains, as_clusters
from .metrics import DEFAULT_IOU_THRESHOLD, grounding_links, iou, relation_links

TASK_KINDS = {
    "entities": ("boundary_incorrect", "type_incorrect"),
    "chains": ("contains_incorrect_entities", "missing_entities"),
    "relations": ("spurious_pair", "wrong_relation_type"),
    "grounding": ("boundary_incorrect", "type_incorrect"),
}


@dataclass
class TaskErrors:
    counts: dict[str, int]
    unclassified: int = 0

    @classmethod
    def empty(cls, task: str) -> TaskErrors:
        return cls({k: 0 for k in TASK_KINDS[task]})

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def rates(self) -> dict[str, float]:
        total = self.total
        return {k: (v / total if total else 0.0) for k, v in self.counts.items()}

    def __add__(self, other: TaskErrors) -> TaskErrors:
        return TaskErrors({k: v + other.counts[k] for k, v in self.counts.items()}, self.unclassified + other.unclassified)

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "rates": self.rates, "total": self.total, "unclassified": self.unclassified}


def _empty_tasks() -> dict[str, TaskErrors]:
    return {t: TaskErrors.empty(t) for t in TASK_KINDS}


@dataclass
class ErrorBreakdown:
    tasks: dict[str, TaskErrors] = field(default_factory=_empty_tasks)

    def __getitem__(self, task: str) -> TaskErrors:
        return self.tasks[task]

    def __add__(self, other: ErrorBreakdown) -> ErrorBreakdown:
        return ErrorBreakdown({t: self.tasks[t] + other.tasks[t] for t in TASK_KINDS})

    def to_dict(self) -> dict:
        return {t: e.to_dict() for t, e in self.tasks.items()}


def shares_substring(a: str, b: str, length: int = 2) -> bool:
    if len(a) < length or len(b) < length:
        return False
    grams = {a[i : i + length] for i in range(len(a) - length + 1)}
    return any(b[i : i + length] in grams for i in range(len(b) - length + 1))


def _entity_errors(pred: tuple[Entity, ...], gold: tuple[Entity, ...]) -> TaskErrors:
    out = TaskErrors.empty("entities")
    gold_set = set(gold)
    pred_set = set(pred)
    missed = [g for g in gold if g not in pred_set]
    explained: set[Entity] = set()
    for e in pred:
        if e in gold_set:
            continue
        retyped = [g for g in gold if g.surface == e.surface and g.etype != e.etype]
        if retyped:
            out.counts["type_incorrect"] += 1
            explained.update(retyped)
            continue
        overlapping = [g for g in gold if g.etype == e.etype and shares_substring(g.surface, e.surface)]
        if overlapping:
            out.counts["boundary_incorrect"] += 1
            explained.update(overlapping)
        else:
            out.unclassified += 1
    out.unclassified += sum(1 for g in missed if g not in explained)
    return out


def _chain_errors(pred_ann: AnnotationSet, gold_ann: AnnotationSet) -> TaskErrors:
    out = TaskErrors.empty("chains")
    pred, gold = as_clusters(pred_ann.chains), as_clusters(gold_ann.chains)
    pairs, _ = align_chains(pred, gold)
    aligned_pred = {j for _, j, _ in pairs}
    aligned_gold = {i for i, _, _ in pairs}
    for i, j, _ in pairs:
        if pred[j] == gold[i]:
            continue
        if pred[j] - gold[i]:
            out.counts["contains_incorrect_entities"] += 1
        else:
            out.counts["missing_entities"] += 1
    out.counts["contains_incorrect_entities"] += sum(1 for j in range(len(pred)) if j not in aligned_pred)
    out.counts["missing_entities"] += sum(1 for i in range(len(gold)) if i not in aligned_gold)
    return out


def _relation_errors(pred_ann: AnnotationSet, gold_ann: AnnotationSet) -> TaskErrors:
    out = TaskErrors.empty("relations")
    links, pc, gc = relation_links(pred_ann.relations, pred_ann.chains, gold_ann.relations, gold_ann.chains)
    matched_gold = set(links.values())
    explained: set[int] = set()
    for i, r in enumerate(pred_ann.relations):
        if i in links:
            continue
        ps, po = pc.get(r.subject_chain_id, frozenset()), pc.get(r.object_chain_id, frozenset())
        same_pair = [
            j
            for j, g in enumerate(gold_ann.relations)
            if g.rtype != r.rtype
            and ps & gc.get(g.subject_chain_id, frozenset())
            and po & gc.get(g.object_chain_id, frozenset())
        ]
        if same_pair:
            out.counts["wrong_relation_type"] += 1
            explained.update(same_pair)
        else:
            out.counts["spurious_pair"] += 1
    out.unclassified += sum(
        1 for j in range(len(gold_ann.relations)) if j not in matched_gold and j not in explained
    )
    return out


def _grounding_errors(pred_ann: AnnotationSet, gold_ann: AnnotationSet, threshold: float) -> TaskErrors:
    out = TaskErrors.empty("grounding")
    pred, gold = pred_ann.regions, gold_ann.regions
    links = grounding_links(pred, gold, threshold)
    matched_gold = set(links.values())
    explained: set[int] = set()
    for i, p in enumerate(pred):
        if i in links:
            continue
        same_image = [(j, g, iou(p, g)) for j, g in enumerate(gold) if g.image_ref == p.image_ref]
        retyped = [j for j, g, s in same_image if s > threshold and g.rtype != p.rtype]
        if retyped:
            out.counts["type_incorrect"] += 1
            explained.update(retyped)
            continue
        shifted = [j for j, g, s in same_image if s > 0 and g.rtype == p.rtype]
        if shifted:
            out.counts["boundary_incorrect"] += 1
            explained.update(shifted)
        else:
            out.unclassified += 1
    out.unclassified += sum(1 for j in range(len(gold)) if j not in matched_gold and j not in explained)
    return out


def error_taxonomy(
    pred: AnnotationSet, gold: AnnotationSet, threshold: float = DEFAULT_IOU_THRESHOLD
) -> ErrorBreakdown:
    return ErrorBreakdown(
        {
            "entities": _entity_errors(pred.entities, gold.entities),
            "chains": _chain_errors(pred, gold),
            "relations": _relation_errors(pred, gold),
            "grounding": _grounding_errors(pred, gold, threshold),
        }
    )
