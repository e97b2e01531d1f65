"""Small statistics toolkit used for the per-instance and aggregate comparisons.

Functions that cannot produce a meaningful answer (too few values, zero
variance) return ``None`` instead of raising, so that aggregation code can
simply skip them.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _st

from .errors import InputError

SIGNIFICANCE = 0.05


def mode(values: Iterable[float]) -> float:
    """Most frequent value; ties go to the smallest tied value."""
    counts = Counter(values)
    if not counts:
        raise InputError("mode of an empty collection")
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def mean(values: Iterable[float]) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def std(values: Iterable[float], ddof: int = 1) -> float | None:
    vals = [v for v in values if v is not None]
    if len(vals) <= ddof:
        return None
    return float(np.std(vals, ddof=ddof))


def confidence_interval_95(values: Sequence[float]) -> tuple[float, float] | None:
    """Student-t 95% interval for the mean; ``None`` for fewer than two values."""
    x = np.asarray([v for v in values if v is not None], dtype=float)
    if x.size < 2:
        return None
    m = x.mean()
    half = _st.t.ppf(0.975, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size)
    return float(m - half), float(m + half)


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_value: float

    @property
    def significant(self) -> bool:
        return self.p_value <= SIGNIFICANCE


def _ranks(x: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties sharing the mean of their positions."""
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(x.size, dtype=float)
    boundaries = np.flatnonzero(np.diff(sx)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [x.size]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> SpearmanResult | None:
    """Rank correlation with a two-sided p-value from the t approximation.

    Returns ``None`` when either series has no rank variance.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise InputError("series must have equal lengths")
    if x.size < 3:
        raise InputError("at least three pairs are needed")
    rx, ry = _ranks(x), _ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        return None
    rho = float(np.clip((rx @ ry) / denom, -1.0, 1.0))
    dof = x.size - 2
    if abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt(dof / ((1.0 - rho) * (1.0 + rho)))
        p = float(2.0 * _st.t.sf(abs(t), dof))
    return SpearmanResult(rho, p)


@dataclass(frozen=True)
class PairedSeries:
    """Two per-instance series compared position by position."""

    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if len(self.a) != len(self.b):
            raise InputError("paired series must have equal lengths")

    @classmethod
    def dropping_missing(cls, a: Sequence[float | None], b: Sequence[float | None]) -> "PairedSeries":
        """Pair by index, keeping only positions where both sides are present."""
        if len(a) != len(b):
            raise InputError("paired series must have equal lengths")
        kept = [(x, y) for x, y in zip(a, b) if x is not None and y is not None]
        return cls(tuple(x for x, _ in kept), tuple(y for _, y in kept))

    def __len__(self) -> int:
        return len(self.a)


def mad_rmsd(series: PairedSeries) -> dict[str, float]:
    """Mean absolute difference and root mean squared difference."""
    if len(series) == 0:
        raise InputError("empty pairing")
    d = np.asarray(series.a, dtype=float) - np.asarray(series.b, dtype=float)
    return {"mad": float(np.mean(np.abs(d))), "rmsd": float(math.sqrt(np.mean(d * d)))}
