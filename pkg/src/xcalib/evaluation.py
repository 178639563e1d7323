"""Selective-prediction metrics: coverage-quality curves, area under the
coverage-F1 curve, quality at fixed coverage, calibration accuracy, token F1."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np


class AucRule(str, Enum):
    RECTANGLE = "rectangle"
    TRAPEZOID = "trapezoid"


@dataclass(frozen=True)
class CoverageCurve:
    """One point per answered-count k = 1..n: (k/n, mean quality of top k)."""

    points: tuple[tuple[float, float], ...]

    def __len__(self) -> int:
        return len(self.points)

    @property
    def coverages(self) -> list[float]:
        return [c for c, _ in self.points]

    @property
    def qualities(self) -> list[float]:
        return [q for _, q in self.points]


def token_f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    """Harmonic mean of token-multiset precision and recall after lowercasing.
    Both empty -> 1; exactly one empty -> 0."""
    pred = Counter(t.lower() for t in pred_tokens)
    gold = Counter(t.lower() for t in gold_tokens)
    if not pred and not gold:
        return 1.0
    if not pred or not gold:
        return 0.0
    common = sum((pred & gold).values())
    if common == 0:
        return 0.0
    precision = common / sum(pred.values())
    recall = common / sum(gold.values())
    return 2 * precision * recall / (precision + recall)


def coverage_curve(scores: list[float] | np.ndarray, quality: list[float] | np.ndarray) -> CoverageCurve:
    """Rank by score descending (stable on ties) and trace mean prefix quality."""
    scores = list(scores)
    quality = list(quality)
    if len(scores) != len(quality):
        raise ValueError("scores and quality lengths differ")
    n = len(scores)
    if n == 0:
        raise ValueError("empty input")
    order = sorted(range(n), key=lambda i: -scores[i])
    points = []
    running = 0.0
    for k, idx in enumerate(order, start=1):
        running += quality[idx]
        points.append((k / n, running / k))
    return CoverageCurve(points=tuple(points))


def auc(curve: CoverageCurve, rule: AucRule = AucRule.RECTANGLE) -> float:
    """Area under the coverage-quality curve on the uniform k/n grid, scaled
    to [0, 100].  The rectangle rule is the mean of the quality values."""
    qualities = curve.qualities
    if rule == AucRule.TRAPEZOID:
        if len(qualities) == 1:
            return 100.0 * qualities[0]
        area = np.trapezoid(qualities, curve.coverages) / (1.0 - curve.coverages[0])
        return 100.0 * float(area)
    return 100.0 * sum(qualities) / len(qualities)


def quality_at_coverage(curve: CoverageCurve, c: float) -> float:
    """Quality at answered-count k = ceil(c * n)."""
    if not 0.0 < c <= 1.0:
        raise ValueError("coverage must be in (0, 1]")
    n = len(curve)
    k = min(max(math.ceil(c * n), 1), n)
    return curve.points[k - 1][1]


def calibration_accuracy(
    scores: list[float] | np.ndarray, t: list[bool] | np.ndarray, threshold: float = 0.5
) -> float:
    """Fraction of instances where (score >= threshold) agrees with t."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(t, dtype=bool)
    if len(scores) != len(labels):
        raise ValueError("scores and labels lengths differ")
    return float(np.mean((scores >= threshold) == labels))
