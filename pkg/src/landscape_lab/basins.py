"""Basins of attraction read off recorded walks, and the fitness/basin-size correlation.

Two basin notions are available:

``visit`` (default)
    ``B(x)`` holds every start point whose walk passes through ``x``. A walk
    from ``x`` itself always does, so ``x`` is in ``B(x)``.
``terminus``
    ``B(x)`` holds the start points whose walk ends at ``x``, plus ``x``. This
    partitions the start points among the walk termini.

With exact nearest-fitter search on a sample with a unique fittest point every
walk ends at that point, so the terminus notion gives one basin covering the
whole sample and singleton "basins" elsewhere. The visit notion keeps a
meaningful size for every intermediate point.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import InputError
from .plops import LosReport
from .problems import codes_to_strings
from .sampling import Sample
from .stats import SpearmanResult, spearman
from .walks import WalkSet

BASIN_MODES = ("visit", "terminus")


@dataclass(eq=False)
class BasinMap:
    """Basin membership as a boolean sparse matrix over sample indices.

    Row ``x`` lists the start points in ``B(x)``; a row is empty when ``x``
    holds no basin (only possible in ``terminus`` mode).
    """

    sample: Sample
    membership: sparse.csr_matrix
    mode: str = "visit"
    termini: np.ndarray | None = None

    def __post_init__(self):
        m = len(self.sample)
        if self.membership.shape != (m, m):
            raise InputError(f"membership must be {m}x{m}")
        if self.mode not in BASIN_MODES:
            raise InputError(f"unknown basin mode {self.mode!r}")

    @property
    def sizes(self) -> np.ndarray:
        """``|B(x)|`` for every sample index, 0 where there is no basin."""
        return np.diff(self.membership.indptr)

    @property
    def holders(self) -> np.ndarray:
        """Sample indices that hold a non-empty basin."""
        return np.flatnonzero(self.sizes > 0)

    def basin(self, code: int) -> set[int]:
        i = self.sample.index_of(code)
        lo, hi = self.membership.indptr[i], self.membership.indptr[i + 1]
        return {int(c) for c in self.sample.points[self.membership.indices[lo:hi]]}

    def size_of(self, code: int) -> int:
        return int(self.sizes[self.sample.index_of(code)])

    def to_csv(self, path: str | Path, report: LosReport | None = None, only_plops_and_termini: bool = True) -> None:
        """One row per basin: ``terminus_bits, terminus_fitness, basin_size, is_plop``.

        In ``visit`` mode every visited point holds a basin; by default rows are
        limited to PLOPs and walk termini to keep the file small.
        """
        sizes = self.sizes
        plop = report.plop if report is not None else np.zeros(len(self.sample), dtype=bool)
        keep = sizes > 0
        if only_plops_and_termini and self.mode == "visit":
            term = np.zeros(len(self.sample), dtype=bool)
            if self.termini is not None:
                term[self.termini] = True
            keep &= plop | term
        idx = np.flatnonzero(keep)
        bits = codes_to_strings(self.sample.points[idx], self.sample.n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["terminus_bits", "terminus_fitness", "basin_size", "is_plop"])
            for b, i in zip(bits, idx):
                w.writerow([b, repr(float(self.sample.fitness[i])), int(sizes[i]), int(plop[i])])


def build_basins(sample: Sample, walks: WalkSet, mode: str = "visit") -> BasinMap:
    """Group walk start points into basins.

    With several walks from the same start (repeats) a start belongs to the
    union of the basins its walks reach.
    """
    if mode not in BASIN_MODES:
        raise InputError(f"unknown basin mode {mode!r}; expected one of {BASIN_MODES}")
    if walks.n != sample.n:
        raise InputError("walks and sample differ in bit length")
    m = len(sample)
    pos = sample.position
    starts = pos[walks.starts]
    termini = pos[walks.termini]
    if np.any(starts < 0) or np.any(termini < 0):
        raise InputError("walks visit points outside the sample")
    if mode == "visit":
        valid = walks.paths >= 0
        rows = pos[walks.paths[valid]]
        cols = np.broadcast_to(starts[:, None], walks.paths.shape)[valid]
        if np.any(rows < 0):
            raise InputError("walks visit points outside the sample")
    else:
        ends = np.unique(termini)
        rows = np.concatenate([termini, ends])
        cols = np.concatenate([starts, ends])
    data = np.ones(rows.size, dtype=bool)
    mat = sparse.csr_matrix((data, (rows, cols)), shape=(m, m), dtype=bool)
    mat.sum_duplicates()
    mat.sort_indices()
    return BasinMap(sample, mat, mode, np.unique(termini))


def fitness_basin_correlation(basins: BasinMap, report: LosReport) -> SpearmanResult | None:
    """Spearman correlation of PLOP fitness against basin size.

    PLOPs without a basin are skipped; ``None`` when fewer than three remain or
    when either series is constant.
    """
    sel = report.plop & (basins.sizes > 0)
    if int(sel.sum()) < 3:
        return None
    return spearman(report.sample.fitness[sel], basins.sizes[sel].astype(float))
