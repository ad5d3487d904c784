"""Logarithmic scaling-law fitting and evaluation metrics.

The scaling law is y = a log2(x) + b, fit by least squares in u = log2(x).
The metrics mirror the drug-screening evaluation conventions: the Pearson r
here is the *uncentered* correlation (a cosine of the raw vectorizations,
implemented exactly as defined rather than as the classical centered
Pearson), mean R^2 and mean cosine are per-sample averages over columns, and
cosine supports optional group centering (each group's own mean column is
subtracted from each matrix before comparing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateFitError, DegenerateInputError, InputError


class CurvePoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class ScalingFit:
    a: float
    b: float
    r_squared: float

    @property
    def r_squared_defined(self) -> bool:
        return math.isfinite(self.r_squared)


@dataclass(frozen=True)
class MetricResult:
    """A metric value plus the count of degenerate samples excluded from it."""

    value: float
    excluded: int = 0

    def __float__(self) -> float:
        return self.value


def _as_points(points: Iterable) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for p in points:
        x, y = (p.x, p.y) if isinstance(p, CurvePoint) else (p[0], p[1])
        if not x > 0:
            raise InputError(f"curve points need x > 0, got x = {x}")
        xs.append(float(x))
        ys.append(float(y))
    return np.array(xs), np.array(ys)


def fit_log_law(points: Iterable) -> ScalingFit:
    """Least-squares fit of y = a log2(x) + b.

    r_squared is the coefficient of determination on the fitting points; a
    zero-variance target with zero residual yields r_squared = 1.0, and the
    (unreachable via this fit) nonzero-residual case is flagged -inf,
    reported downstream as "undefined".
    """
    xs, ys = _as_points(points)
    if len(xs) < 2 or len(np.unique(xs)) < 2:
        raise DegenerateFitError(
            "fit_log_law needs at least two points with distinct x values")
    u = np.log2(xs)
    a, b = np.polyfit(u, ys, 1)
    fitted = a * u + b
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-24 else float("-inf")
    else:
        r2 = 1.0 - ss_res / ss_tot
    return ScalingFit(float(a), float(b), r2)


def extrapolate(fit: ScalingFit, x: float) -> float:
    """Evaluate the fitted law at x > 0."""
    if not x > 0:
        raise InputError(f"extrapolation needs x > 0, got {x}")
    return fit.a * math.log2(x) + fit.b


def _check_pair(pred, truth):
    P = np.asarray(pred, dtype=float)
    T = np.asarray(truth, dtype=float)
    if P.shape != T.shape or P.ndim != 2:
        raise InputError(f"pred and truth must be 2-D with equal shapes, "
                         f"got {P.shape} and {T.shape}")
    return P, T


def accuracy(pred, labels) -> float:
    """Fraction of columns whose argmax matches the integer label.

    Ties break toward the lowest class index.
    """
    P = np.asarray(pred, dtype=float)
    lab = np.asarray(labels)
    if P.ndim != 2:
        raise InputError(f"pred must be 2-D (c, m), got shape {P.shape}")
    if lab.ndim != 1 or lab.shape[0] != P.shape[1]:
        raise InputError(
            f"labels must be 1-D with length {P.shape[1]}, got shape {lab.shape}")
    if lab.shape[0] == 0:
        raise InputError("accuracy needs at least one sample")
    if np.any(lab < 0) or np.any(lab >= P.shape[0]):
        raise InputError(f"labels must lie in [0, {P.shape[0]})")
    return float(np.mean(np.argmax(P, axis=0) == lab))


def pearson_r(pred, truth) -> float:
    """Uncentered correlation <pred, truth> / (||pred|| ||truth||) of the
    vectorized matrices."""
    P, T = _check_pair(pred, truth)
    np_, nt = np.linalg.norm(P), np.linalg.norm(T)
    if np_ == 0 or nt == 0:
        raise DegenerateInputError("pearson_r is undefined for zero-norm inputs")
    return float(np.clip(np.sum(P * T) / (np_ * nt), -1.0, 1.0))


def mean_r2(pred, truth) -> MetricResult:
    """Per-sample R^2 averaged over columns.

    For each column: 1 - sum_j (pred_j - truth_j)^2 / sum_j (truth_j - mean)^2
    with the mean taken over the column's coordinates. Zero-variance columns
    are excluded and counted rather than poisoning the mean.
    """
    P, T = _check_pair(pred, truth)
    ss_res = np.sum((P - T) ** 2, axis=0)
    ss_tot = np.sum((T - T.mean(axis=0, keepdims=True)) ** 2, axis=0)
    keep = ss_tot > 0
    excluded = int(np.sum(~keep))
    if not np.any(keep):
        raise DegenerateInputError("every sample has zero target variance")
    value = float(np.mean(1.0 - ss_res[keep] / ss_tot[keep]))
    return MetricResult(value, excluded)


def _group_center(M: np.ndarray, groups: np.ndarray) -> np.ndarray:
    out = M.copy()
    for g in np.unique(groups):
        idx = groups == g
        out[:, idx] -= M[:, idx].mean(axis=1, keepdims=True)
    return out


def mean_cosine(pred, truth, groups: Optional[Sequence] = None) -> MetricResult:
    """Mean per-sample cosine similarity between matching columns.

    When ``groups`` is supplied (one id per column), each matrix is first
    centered by its own per-group mean column. Columns with a zero norm on
    either side after centering are excluded and counted.
    """
    P, T = _check_pair(pred, truth)
    if groups is not None:
        g = np.asarray(groups)
        if g.ndim != 1 or g.shape[0] != P.shape[1]:
            raise InputError(
                f"groups must be 1-D with length {P.shape[1]}, got shape {g.shape}")
        P = _group_center(P, g)
        T = _group_center(T, g)
    pn = np.linalg.norm(P, axis=0)
    tn = np.linalg.norm(T, axis=0)
    keep = (pn > 0) & (tn > 0)
    excluded = int(np.sum(~keep))
    if not np.any(keep):
        raise DegenerateInputError("every sample has zero norm after centering")
    cos = np.sum(P[:, keep] * T[:, keep], axis=0) / (pn[keep] * tn[keep])
    return MetricResult(float(np.mean(np.clip(cos, -1.0, 1.0))), excluded)
