"""Scoring for entities, chains, relations and grounding."""

from .coref import ChainScores, align_chains, as_clusters, b_cubed, ceaf_e, muc, phi4, score_chains
from .metrics import (
    DEFAULT_IOU_THRESHOLD,
    grounding_links,
    hallucination_rate,
    iou,
    per_type,
    relation_links,
    score_entities,
    score_grounding,
    score_relations,
)
from .report import METRIC_VERSION, CorpusScore, DocumentScore, evaluate_corpus, score_document
from .scores import PRF, CorefScore
from .taxonomy import TASK_KINDS, ErrorBreakdown, TaskErrors, error_taxonomy

__all__ = [
    "DEFAULT_IOU_THRESHOLD",
    "METRIC_VERSION",
    "PRF",
    "TASK_KINDS",
    "ChainScores",
    "CorefScore",
    "CorpusScore",
    "DocumentScore",
    "ErrorBreakdown",
    "TaskErrors",
    "align_chains",
    "as_clusters",
    "b_cubed",
    "ceaf_e",
    "error_taxonomy",
    "evaluate_corpus",
    "grounding_links",
    "hallucination_rate",
    "iou",
    "muc",
    "per_type",
    "phi4",
    "relation_links",
    "score_chains",
    "score_document",
    "score_entities",
    "score_grounding",
    "score_relations",
]
