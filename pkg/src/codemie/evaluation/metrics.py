"""Entity, relation and grounding scoring, plus the hallucination rate."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence

from ..core import Entity, EntityChain, RelationTriple, VisualRegion, normalize
from ..parser import DeviationKind, DeviationReport, has_hallucination
from .scores import PRF

DEFAULT_IOU_THRESHOLD = 0.5


def score_entities(pred: Iterable[Entity], gold: Iterable[Entity]) -> PRF:
    p, g = set(pred), set(gold)
    return PRF(len(p & g), len(p), len(g))


def _chain_sets(chains: Iterable[EntityChain] | Mapping[int, Iterable[str]]) -> dict[int, frozenset[str]]:
    if isinstance(chains, Mapping):
        return {int(k): frozenset(normalize(m) for m in v) for k, v in chains.items()}
    return {c.id: c.mention_set for c in chains}


def relation_links(
    pred: Sequence[RelationTriple],
    pred_chains,
    gold: Sequence[RelationTriple],
    gold_chains,
) -> tuple[dict[int, int], dict[int, frozenset[str]], dict[int, frozenset[str]]]:
    """Greedy one-to-one matching in input order: ``{pred index: gold index}``.

    A prediction matches a gold triple when both argument chains share at
    least one mention and the relation types are equal. Predictions with a
    chain id that does not resolve never match.
    """
    pc, gc = _chain_sets(pred_chains), _chain_sets(gold_chains)
    used: set[int] = set()
    links: dict[int, int] = {}
    for i, r in enumerate(pred):
        ps, po = pc.get(r.subject_chain_id), pc.get(r.object_chain_id)
        if ps is None or po is None:
            continue
        for j, g in enumerate(gold):
            if j in used or g.rtype != r.rtype:
                continue
            gs, go = gc.get(g.subject_chain_id, frozenset()), gc.get(g.object_chain_id, frozenset())
            if ps & gs and po & go:
                used.add(j)
                links[i] = j
                break
    return links, pc, gc


def score_relations(
    pred: Sequence[RelationTriple],
    pred_chains,
    gold: Sequence[RelationTriple],
    gold_chains,
) -> PRF:
    links, _, _ = relation_links(pred, pred_chains, gold, gold_chains)
    return PRF(len(links), len(pred), len(gold))


def iou(a: VisualRegion, b: VisualRegion) -> float:
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union if union > 0 else 0.0


def grounding_links(
    pred: Sequence[VisualRegion], gold: Sequence[VisualRegion], threshold: float = DEFAULT_IOU_THRESHOLD
) -> dict[int, int]:
    """Greedy matching per image by descending IoU; IoU must exceed ``threshold``."""
    candidates = []
    for i, p in enumerate(pred):
        for j, g in enumerate(gold):
            if p.image_ref != g.image_ref or p.rtype != g.rtype:
                continue
            score = iou(p, g)
            if score > threshold:
                candidates.append((-score, i, j))
    candidates.sort()
    links: dict[int, int] = {}
    taken: set[int] = set()
    for _, i, j in candidates:
        if i not in links and j not in taken:
            links[i] = j
            taken.add(j)
    return links


def score_grounding(
    pred: Sequence[VisualRegion], gold: Sequence[VisualRegion], threshold: float = DEFAULT_IOU_THRESHOLD
) -> PRF:
    return PRF(len(grounding_links(pred, gold, threshold)), len(pred), len(gold))


def hallucination_rate(
    reports: Sequence[DeviationReport], kinds: Iterable[DeviationKind] | None = None
) -> float:
    if not reports:
        raise ValueError("no samples")
    kinds = None if kinds is None else frozenset(kinds)
    return sum(1 for r in reports if has_hallucination(r, kinds)) / len(reports)


def per_type(pred: Iterable[tuple[str, bool]], gold: Iterable[str]) -> dict[str, PRF]:
    """Per-type PRF from ``(type, is_true_positive)`` predictions and gold types."""
    acc: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0])
    for t, hit in pred:
        acc[t][0] += int(hit)
        acc[t][1] += 1
    for t in gold:
        acc[t][2] += 1
    return {t: PRF(*v) for t, v in sorted(acc.items())}
