from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class PRF:
    """Count-based precision/recall/F1; zero whenever a denominator is zero."""

    tp: int = 0
    pred_count: int = 0
    gold_count: int = 0

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.pred_count)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.gold_count)

    @property
    def f1(self) -> float:
        # same value as the harmonic mean of P and R, without the extra rounding
        total = self.pred_count + self.gold_count
        return 2 * self.tp / total if total else 0.0

    def __add__(self, other: PRF) -> PRF:
        return PRF(self.tp + other.tp, self.pred_count + other.pred_count, self.gold_count + other.gold_count)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "pred_count": self.pred_count,
            "gold_count": self.gold_count,
        }


def _exact_ratio(num, den) -> Fraction:
    return Fraction(num) / Fraction(den) if den else Fraction(0)


def exact_harmonic(p: Fraction, r: Fraction) -> Fraction:
    return 2 * p * r / (p + r) if p + r else Fraction(0)


@dataclass(frozen=True)
class CorefScore:
    """Coreference metrics have separate numerators for precision and recall.

    Numerators are kept as exact rationals so corpus sums and the reported
    ratios carry no accumulated rounding.
    """

    p_num: Fraction | int = 0
    p_den: int = 0
    r_num: Fraction | int = 0
    r_den: int = 0

    @property
    def exact_precision(self) -> Fraction:
        return _exact_ratio(self.p_num, self.p_den)

    @property
    def exact_recall(self) -> Fraction:
        return _exact_ratio(self.r_num, self.r_den)

    @property
    def exact_f1(self) -> Fraction:
        return exact_harmonic(self.exact_precision, self.exact_recall)

    @property
    def precision(self) -> float:
        return float(self.exact_precision)

    @property
    def recall(self) -> float:
        return float(self.exact_recall)

    @property
    def f1(self) -> float:
        return float(self.exact_f1)

    def __add__(self, other: CorefScore) -> CorefScore:
        return CorefScore(
            self.p_num + other.p_num, self.p_den + other.p_den, self.r_num + other.r_num, self.r_den + other.r_den
        )

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}
