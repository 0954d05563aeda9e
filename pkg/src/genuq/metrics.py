"""Evaluation metrics: prediction-rejection curves and PRR, binary AUCs,
and confidence-calibration error.

The rejection curve removes instances in order of decreasing uncertainty and
tracks the mean quality of what remains.  PRR normalizes the area under that
curve between the analytic random baseline (a flat line at the dataset mean)
and the oracle ordering (remove worst quality first), so 1.0 is a perfect
uncertainty score and 0.0 is uninformative.

Tie handling: instances that share an uncertainty value form one group.  The
retained order reported for the curve breaks ties by stable input position,
but the quality mass removed at a cut inside a group is accounted at the
group mean, matching a threshold sweep over uncertainty values.  With fully
constant uncertainty the curve is therefore exactly the random baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DegenerateQuality,
    LengthMismatch,
    NoPositives,
    RangeViolation,
    SingleClass,
)
from .text_metrics import exact_accuracy, rouge_l

__all__ = [
    "RejectionCurve",
    "PrrResult",
    "rejection_curve",
    "prr",
    "roc_auc",
    "pr_auc",
    "calibration_mse",
    "rouge_l",
    "exact_accuracy",
]

_DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class RejectionCurve:
    """Curve points ``(rejection_fraction, mean retained quality)`` plus the
    stable descending-uncertainty permutation behind them."""

    points: tuple[tuple[float, float], ...]
    ordering: tuple[int, ...]

    def fractions(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])


@dataclass(frozen=True)
class PrrResult:
    prr: float
    auc_unc: float
    auc_oracle: float
    auc_rnd: float
    max_rejection: float


def _check_pair(uncertainties, qualities) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(uncertainties, dtype=float)
    q = np.asarray(qualities, dtype=float)
    if u.ndim != 1 or q.ndim != 1 or len(u) != len(q):
        raise LengthMismatch(f"got {len(u)} uncertainties and {len(q)} qualities")
    if len(u) == 0:
        raise LengthMismatch("inputs must be non-empty")
    return u, q


def _removed_mass(u: np.ndarray, q: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Cumulative quality mass removed after each rejection step.

    Partial removals inside a tie group are charged at the group's mean
    quality, so the curve agrees with the uncertainty-threshold sweep.
    """
    n = len(order)
    removed = np.zeros(n + 1)
    start = 0
    while start < n:
        end = start + 1
        while end < n and u[order[end]] == u[order[start]]:
            end += 1
        group_mean = float(np.mean(q[order[start:end]]))
        for j in range(start, end):
            removed[j + 1] = removed[start] + (j + 1 - start) * group_mean
        start = end
    return removed


def rejection_curve(uncertainties, qualities, max_rejection: float = 1.0) -> RejectionCurve:
    """Mean retained quality as progressively more uncertain instances drop.

    Points cover rejection fractions ``0, 1/n, ...`` up to ``max_rejection``
    (never the empty-retained point).  Removal order is descending
    uncertainty with ties kept in input order.
    """
    u, q = _check_pair(uncertainties, qualities)
    if not 0.0 < max_rejection <= 1.0:
        raise ValueError("max_rejection must lie in (0, 1]")
    n = len(u)
    order = np.argsort(-u, kind="stable")
    removed = _removed_mass(u, q, order)
    total = float(np.sum(q))
    last = min(int(np.floor(max_rejection * n + 1e-9)), n - 1)
    points = tuple((j / n, (total - removed[j]) / (n - j)) for j in range(last + 1))
    return RejectionCurve(points=points, ordering=tuple(int(i) for i in order))


def prr(uncertainties, qualities, max_rejection: float = 0.5) -> PrrResult:
    """Prediction-rejection ratio of an uncertainty score against quality.

    All three areas (score, oracle, random) use the trapezoidal rule over the
    same rejection-fraction grid, so a score that reproduces the oracle
    ordering yields exactly 1.0.  ``max_rejection`` defaults to rejecting at
    most half the dataset.
    """
    u, q = _check_pair(uncertainties, qualities)
    curve_unc = rejection_curve(u, q, max_rejection)
    curve_oracle = rejection_curve(-q, q, max_rejection)
    grid = curve_unc.fractions()
    auc_unc = float(np.trapezoid(curve_unc.values(), grid))
    auc_oracle = float(np.trapezoid(curve_oracle.values(), grid))
    auc_rnd = float(np.trapezoid(np.full(len(grid), np.mean(q)), grid))
    gap = auc_oracle - auc_rnd
    if abs(gap) < _DEGENERATE_GAP:
        raise DegenerateQuality("oracle and random rejection curves coincide")
    return PrrResult(
        prr=(auc_unc - auc_rnd) / gap,
        auc_unc=auc_unc,
        auc_oracle=auc_oracle,
        auc_rnd=auc_rnd,
        max_rejection=max_rejection,
    )


def roc_auc(scores, labels) -> float:
    """Mann-Whitney ROC-AUC with half credit for tied scores.

    ``labels`` are binary with 1 as the positive class; higher scores should
    rank positives first.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if len(s) != len(y):
        raise LengthMismatch(f"got {len(s)} scores and {len(y)} labels")
    pos = int(np.sum(y == 1))
    neg = int(np.sum(y == 0))
    if pos == 0 or neg == 0:
        raise SingleClass("both classes must be present")
    ranks = rankdata(s, method="average")
    return float((np.sum(ranks[y == 1]) - pos * (pos + 1) / 2.0) / (pos * neg))


def pr_auc(scores, labels) -> float:
    """Average precision: step-wise area under the precision-recall curve.

    Tied scores are processed as one threshold group.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if len(s) != len(y):
        raise LengthMismatch(f"got {len(s)} scores and {len(y)} labels")
    total_pos = int(np.sum(y == 1))
    if total_pos == 0:
        raise NoPositives("need at least one positive label")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    area = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    n = len(s_sorted)
    while i < n:
        j = i + 1
        while j < n and s_sorted[j] == s_sorted[i]:
            j += 1
        tp += int(np.sum(y_sorted[i:j] == 1))
        seen += j - i
        recall = tp / total_pos
        precision = tp / seen
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return float(area)


def calibration_mse(confidences, qualities) -> float:
    """Mean squared error between confidence and a [0, 1] quality metric."""
    c = np.asarray(confidences, dtype=float)
    q = np.asarray(qualities, dtype=float)
    if len(c) != len(q):
        raise LengthMismatch(f"got {len(c)} confidences and {len(q)} qualities")
    if len(c) == 0:
        raise LengthMismatch("inputs must be non-empty")
    if np.any(c < 0) or np.any(c > 1):
        raise RangeViolation("confidences must lie in [0, 1]")
    if np.any(q < 0) or np.any(q > 1):
        raise RangeViolation("qualities must lie in [0, 1]")
    return float(np.mean((c - q) ** 2))
