"""Entity-chain metrics: MUC, B-cubed, entity-based CEAF, and their average."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core import EntityChain, normalize
from .scores import CorefScore

ChainsLike = Iterable[EntityChain] | Iterable[Iterable[str]] | Mapping[int, Iterable[str]]


def as_clusters(chains: ChainsLike) -> list[frozenset[str]]:
    """Normalize chains to disjoint mention sets.

    A mention that shows up in more than one chain stays in the first one;
    chains emptied that way are dropped.
    """
    if isinstance(chains, Mapping):
        chains = [chains[k] for k in sorted(chains)]
    seen: set[str] = set()
    out = []
    for chain in chains:
        mentions = chain.mentions if isinstance(chain, EntityChain) else chain
        cluster = frozenset(normalize(m) for m in mentions) - seen
        if cluster:
            seen |= cluster
            out.append(cluster)
    return out


def _muc_side(keys: list[frozenset[str]], responses: list[frozenset[str]]) -> tuple[int, int]:
    owner = {m: i for i, c in enumerate(responses) for m in c}
    num = den = 0
    for k in keys:
        if len(k) < 2:
            continue
        blocks = {owner[m] for m in k if m in owner}
        unaligned = sum(1 for m in k if m not in owner)
        num += len(k) - (len(blocks) + unaligned)
        den += len(k) - 1
    return num, den


def muc(pred_chains: ChainsLike, gold_chains: ChainsLike) -> CorefScore:
    pred, gold = as_clusters(pred_chains), as_clusters(gold_chains)
    r_num, r_den = _muc_side(gold, pred)
    p_num, p_den = _muc_side(pred, gold)
    return CorefScore(p_num, p_den, r_num, r_den)


def _b3_side(keys: list[frozenset[str]], responses: list[frozenset[str]]) -> tuple[Fraction, int]:
    num = Fraction(0)
    for k in keys:
        squares = sum(len(k & r) ** 2 for r in responses)
        if squares:
            num += Fraction(squares, len(k))
    return num, sum(len(k) for k in keys)


def b_cubed(pred_chains: ChainsLike, gold_chains: ChainsLike) -> CorefScore:
    """Per-mention B-cubed: recall over gold mentions, precision over predicted ones.

    A mention missing from the other side overlaps nothing and scores 0.
    """
    pred, gold = as_clusters(pred_chains), as_clusters(gold_chains)
    r_num, r_den = _b3_side(gold, pred)
    p_num, p_den = _b3_side(pred, gold)
    return CorefScore(p_num, p_den, r_num, r_den)


def phi4(g: frozenset[str], p: frozenset[str]) -> float:
    return 2 * len(g & p) / (len(g) + len(p))


def _alignment(pred: list[frozenset[str]], gold: list[frozenset[str]]) -> list[tuple[int, int]]:
    if not pred or not gold:
        return []
    sim = np.array([[phi4(g, p) for p in pred] for g in gold])
    rows, cols = linear_sum_assignment(sim, maximize=True)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if sim[i, j] > 0]


def _exact_phi4(g: frozenset[str], p: frozenset[str]) -> Fraction:
    return Fraction(2 * len(g & p), len(g) + len(p))


def align_chains(
    pred: list[frozenset[str]], gold: list[frozenset[str]]
) -> tuple[list[tuple[int, int, float]], float]:
    """Optimal one-to-one alignment under phi4: (gold_idx, pred_idx, sim) pairs and their sum."""
    pairs = [(i, j, phi4(gold[i], pred[j])) for i, j in _alignment(pred, gold)]
    return pairs, float(sum(_exact_phi4(gold[i], pred[j]) for i, j, _ in pairs))


def ceaf_e(pred_chains: ChainsLike, gold_chains: ChainsLike) -> CorefScore:
    pred, gold = as_clusters(pred_chains), as_clusters(gold_chains)
    total = sum((_exact_phi4(gold[i], pred[j]) for i, j in _alignment(pred, gold)), Fraction(0))
    return CorefScore(total, len(pred), total, len(gold))


@dataclass(frozen=True)
class ChainScores:
    """The three chain metrics; headline numbers are their arithmetic means."""

    muc: CorefScore = CorefScore()
    b_cubed: CorefScore = CorefScore()
    ceaf_e: CorefScore = CorefScore()

    def _parts(self):
        return (self.muc, self.b_cubed, self.ceaf_e)

    @property
    def precision(self) -> float:
        return float(sum(s.exact_precision for s in self._parts()) / 3)

    @property
    def recall(self) -> float:
        return float(sum(s.exact_recall for s in self._parts()) / 3)

    @property
    def f1(self) -> float:
        return float(sum(s.exact_f1 for s in self._parts()) / 3)

    def __add__(self, other: ChainScores) -> ChainScores:
        return ChainScores(self.muc + other.muc, self.b_cubed + other.b_cubed, self.ceaf_e + other.ceaf_e)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "muc": self.muc.to_dict(),
            "b_cubed": self.b_cubed.to_dict(),
            "ceaf_e": self.ceaf_e.to_dict(),
        }


def score_chains(pred_chains: ChainsLike, gold_chains: ChainsLike) -> ChainScores:
    pred, gold = as_clusters(pred_chains), as_clusters(gold_chains)
    return ChainScores(muc(pred, gold), b_cubed(pred, gold), ceaf_e(pred, gold))
