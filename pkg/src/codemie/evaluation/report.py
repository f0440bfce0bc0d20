"""Corpus-level scoring with micro aggregation and a JSON-ready report."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..core import AnnotationSet
from ..parser import DeviationKind, DeviationReport
from .coref import ChainScores, score_chains
from .metrics import (
    DEFAULT_IOU_THRESHOLD,
    grounding_links,
    hallucination_rate,
    relation_links,
    score_entities,
)
from .scores import PRF
from .taxonomy import ErrorBreakdown, error_taxonomy

METRIC_VERSION = "codemie-metrics/1 (muc,b3,ceaf-e-phi4; relations=greedy-input-order; grounding=greedy-iou>t)"


@dataclass
class DocumentScore:
    entities: PRF
    chains: ChainScores
    relations: PRF
    grounding: PRF
    entities_by_type: dict[str, PRF]
    relations_by_type: dict[str, PRF]
    grounding_by_type: dict[str, PRF]
    errors: ErrorBreakdown


def _merge(a: dict[str, PRF], b: dict[str, PRF]) -> dict[str, PRF]:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, PRF()) + v
    return dict(sorted(out.items()))


def _typed(pred_types: Iterable[tuple[str, bool]], gold_types: Iterable[str]) -> dict[str, PRF]:
    acc: dict[str, PRF] = {}
    for t, hit in pred_types:
        acc[t] = acc.get(t, PRF()) + PRF(int(hit), 1, 0)
    for t in gold_types:
        acc[t] = acc.get(t, PRF()) + PRF(0, 0, 1)
    return dict(sorted(acc.items()))


def score_document(pred: AnnotationSet, gold: AnnotationSet, threshold: float = DEFAULT_IOU_THRESHOLD) -> DocumentScore:
    gold_entities = set(gold.entities)
    rel_links, _, _ = relation_links(pred.relations, pred.chains, gold.relations, gold.chains)
    box_links = grounding_links(pred.regions, gold.regions, threshold)
    return DocumentScore(
        entities=score_entities(pred.entities, gold.entities),
        chains=score_chains(pred.chains, gold.chains),
        relations=PRF(len(rel_links), len(pred.relations), len(gold.relations)),
        grounding=PRF(len(box_links), len(pred.regions), len(gold.regions)),
        entities_by_type=_typed(
            ((e.etype, e in gold_entities) for e in pred.entities), (e.etype for e in gold.entities)
        ),
        relations_by_type=_typed(
            ((r.rtype, i in rel_links) for i, r in enumerate(pred.relations)), (r.rtype for r in gold.relations)
        ),
        grounding_by_type=_typed(
            ((b.rtype, i in box_links) for i, b in enumerate(pred.regions)), (b.rtype for b in gold.regions)
        ),
        errors=error_taxonomy(pred, gold, threshold),
    )


@dataclass
class CorpusScore:
    documents: int = 0
    entities: PRF = PRF()
    chains: ChainScores = ChainScores()
    relations: PRF = PRF()
    grounding: PRF = PRF()
    entities_by_type: dict[str, PRF] = field(default_factory=dict)
    relations_by_type: dict[str, PRF] = field(default_factory=dict)
    grounding_by_type: dict[str, PRF] = field(default_factory=dict)
    errors: ErrorBreakdown = field(default_factory=ErrorBreakdown)
    hallucination_rate: float | None = None

    def add(self, doc: DocumentScore) -> CorpusScore:
        return CorpusScore(
            documents=self.documents + 1,
            entities=self.entities + doc.entities,
            chains=self.chains + doc.chains,
            relations=self.relations + doc.relations,
            grounding=self.grounding + doc.grounding,
            entities_by_type=_merge(self.entities_by_type, doc.entities_by_type),
            relations_by_type=_merge(self.relations_by_type, doc.relations_by_type),
            grounding_by_type=_merge(self.grounding_by_type, doc.grounding_by_type),
            errors=self.errors + doc.errors,
            hallucination_rate=self.hallucination_rate,
        )

    def f1(self) -> dict[str, float]:
        return {
            "entities": self.entities.f1,
            "chains": self.chains.f1,
            "relations": self.relations.f1,
            "grounding": self.grounding.f1,
        }

    def to_dict(self) -> dict:
        def typed(d):
            return {k: v.to_dict() for k, v in d.items()}

        return {
            "metric_version": METRIC_VERSION,
            "documents": self.documents,
            "tasks": {
                "entities": self.entities.to_dict(),
                "chains": self.chains.to_dict(),
                "relations": self.relations.to_dict(),
                "grounding": self.grounding.to_dict(),
            },
            "per_type": {
                "entities": typed(self.entities_by_type),
                "relations": typed(self.relations_by_type),
                "grounding": typed(self.grounding_by_type),
            },
            "hallucination_rate": self.hallucination_rate,
            "errors": self.errors.to_dict(),
        }


def evaluate_corpus(
    pairs: Sequence[tuple[AnnotationSet, AnnotationSet]],
    reports: Sequence[DeviationReport] | None = None,
    *,
    threshold: float = DEFAULT_IOU_THRESHOLD,
    hallucination_kinds: Iterable[DeviationKind] | None = None,
    max_workers: int = 1,
) -> CorpusScore:
    """Score (prediction, gold) pairs; sums counts across documents before dividing."""
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            docs = list(pool.map(lambda pg: score_document(pg[0], pg[1], threshold), pairs))
    else:
        docs = [score_document(p, g, threshold) for p, g in pairs]
    total = CorpusScore()
    for d in docs:
        total = total.add(d)
    if reports:
        total.hallucination_rate = hallucination_rate(reports, hallucination_kinds)
    return total
