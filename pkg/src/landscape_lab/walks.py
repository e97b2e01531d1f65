"""Slow adaptive walks over a point set.

A slow adaptive walker repeatedly moves to a nearest strictly fitter point of
the active point set (nearest in Hamming distance, ties broken uniformly at
random) and stops when nothing fitter is left. Step sizes are therefore
variable and there is no fixed move set.

Four ways of finding the "nearest fitter" point are supported:

``exhaustive``
    exact nearest-fitter sets, precomputed once per point;
``dyna``
    per point, a single uniform sample of ``budget`` fitter points, precomputed;
``rand``
    a fresh sample of ``budget`` fitter points on every visit;
``combi``
    like ``rand``, but each point remembers the nearest candidates it has
    ever sampled.

Internally a walk works on sample indices; recorded paths hold point codes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Iterator, Protocol, Sequence

import numpy as np

from .errors import InputError, InternalError
from .problems import codes_to_strings, popcount, strings_to_codes
from .sampling import Sample

STRATEGIES = ("exhaustive", "dyna", "rand", "combi")
DEFAULT_BUDGET = 1000
_CHUNK_ENTRIES = 1 << 21


@lru_cache(maxsize=None)
def _masks(n: int, d: int) -> np.ndarray:
    """All n-bit masks with exactly d set bits."""
    return np.array([sum(1 << b for b in c) for c in combinations(range(n), d)], dtype=np.int64)


def _fitter_order(sample: Sample) -> tuple[np.ndarray, np.ndarray]:
    """Indices sorted by decreasing fitness, and per point the number of strictly fitter points.

    The strictly fitter points of ``i`` are exactly ``order[:rank[i]]``.
    """
    order = np.argsort(-sample.fitness, kind="stable")
    asc = np.sort(sample.fitness)
    rank = len(sample) - np.searchsorted(asc, sample.fitness, side="right")
    return order, rank.astype(np.int64)


# -- records -------------------------------------------------------------------

@dataclass(frozen=True)
class WalkRecord:
    """One walk: visited point codes in order and the Hamming size of each step."""

    path: tuple[int, ...]
    step_sizes: tuple[int, ...]

    def __post_init__(self):
        if not self.path:
            raise InputError("a walk visits at least its start point")
        if len(self.step_sizes) != len(self.path) - 1:
            raise InputError("one step size per consecutive pair of points")

    @property
    def start(self) -> int:
        return self.path[0]

    @property
    def terminus(self) -> int:
        return self.path[-1]

    def __len__(self) -> int:
        return len(self.path)

    def to_json(self, n: int) -> dict:
        bits = codes_to_strings(self.path, n)
        return {"start": bits[0], "terminus": bits[-1], "path": bits, "step_sizes": list(self.step_sizes)}


@dataclass(eq=False)
class WalkSet:
    """A batch of walks stored as a ``-1``-padded matrix of point codes, one row per walk."""

    n: int
    paths: np.ndarray
    strategy: str = "exhaustive"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        paths = np.asarray(self.paths, dtype=np.int64)
        if paths.ndim != 2:
            raise InputError("paths must be a 2-D array")
        if paths.shape[1] == 0 and paths.shape[0]:
            raise InputError("every walk visits at least its start point")
        self.paths = paths

    @classmethod
    def from_records(cls, n: int, records: Sequence[WalkRecord], strategy: str = "exhaustive", seed=None) -> "WalkSet":
        width = max((len(r) for r in records), default=1)
        paths = np.full((len(records), width), -1, dtype=np.int64)
        for i, r in enumerate(records):
            paths[i, : len(r)] = r.path
        return cls(n, paths, strategy, seed)

    def __len__(self) -> int:
        return int(self.paths.shape[0])

    @property
    def lengths(self) -> np.ndarray:
        return (self.paths >= 0).sum(axis=1)

    @property
    def starts(self) -> np.ndarray:
        return self.paths[:, 0]

    @property
    def termini(self) -> np.ndarray:
        return self.paths[np.arange(len(self)), self.lengths - 1]

    @property
    def steps(self) -> np.ndarray:
        """Step sizes, shape ``(walks, width-1)``, zero where a walk has ended."""
        a, b = self.paths[:, :-1], self.paths[:, 1:]
        valid = b >= 0
        return np.where(valid, popcount(np.where(valid, a ^ b, 0)), 0)

    @property
    def total_steps(self) -> int:
        return int((self.lengths - 1).sum())

    def record(self, i: int) -> WalkRecord:
        row = self.paths[i]
        path = tuple(int(c) for c in row[row >= 0])
        return WalkRecord(path, tuple((a ^ b).bit_count() for a, b in zip(path, path[1:])))

    def __iter__(self) -> Iterator[WalkRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def concat(self, other: "WalkSet") -> "WalkSet":
        width = max(self.paths.shape[1], other.paths.shape[1])
        pad = lambda p: np.pad(p, ((0, 0), (0, width - p.shape[1])), constant_values=-1)
        return WalkSet(self.n, np.vstack([pad(self.paths), pad(other.paths)]), self.strategy, self.seed, dict(self.meta))


def save_walks_jsonl(walks: WalkSet, path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in walks:
            fh.write(json.dumps(rec.to_json(walks.n)) + "\n")


def load_walks_jsonl(path: str | Path, strategy: str = "exhaustive") -> WalkSet:
    records, n = [], None
    try:
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                d = json.loads(line)
                codes = strings_to_codes(d["path"])
                n = len(d["path"][0])
                records.append(WalkRecord(tuple(int(c) for c in codes), tuple(int(s) for s in d["step_sizes"])))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read walk file {path}: {exc}") from exc
    if n is None:
        raise InputError(f"walk file {path} is empty")
    return WalkSet.from_records(n, records, strategy)


def save_walks_npz(walks: WalkSet, path: str | Path) -> None:
    np.savez_compressed(path, paths=walks.paths, n=walks.n, strategy=walks.strategy,
                        seed=-1 if walks.seed is None else walks.seed, meta=json.dumps(walks.meta, sort_keys=True))


def load_walks_npz(path: str | Path) -> WalkSet:
    with np.load(path) as z:
        seed = int(z["seed"])
        return WalkSet(int(z["n"]), z["paths"], str(z["strategy"]), None if seed < 0 else seed, json.loads(str(z["meta"])))


def save_walks(walks: WalkSet, path: str | Path) -> None:
    if str(path).endswith(".npz"):
        save_walks_npz(walks, path)
    else:
        save_walks_jsonl(walks, path)


def load_walks(path: str | Path, strategy: str = "exhaustive") -> WalkSet:
    if str(path).endswith(".npz"):
        return load_walks_npz(path)
    return load_walks_jsonl(path, strategy)


# -- neighbour tables ----------------------------------------------------------------

@dataclass(eq=False)
class NeighborTable:
    """Per-point nearest-fitter candidate sets in CSR layout over sample indices.

    ``distance[i]`` is the Hamming distance shared by every candidate of ``i``
    (0 when ``i`` has no candidate, i.e. nothing in the sample is fitter).
    """

    points: np.ndarray
    offsets: np.ndarray
    targets: np.ndarray
    distance: np.ndarray
    strategy: str = "exhaustive"

    @classmethod
    def from_pairs(cls, points: np.ndarray, src: np.ndarray, dst: np.ndarray, distance: np.ndarray, strategy: str) -> "NeighborTable":
        order = np.argsort(src, kind="stable")
        counts = np.bincount(src, minlength=points.size)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return cls(points, offsets, np.asarray(dst, dtype=np.int64)[order], np.asarray(distance, dtype=np.int64), strategy)

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors(self, i: int) -> np.ndarray:
        """Sample indices of the candidates of sample index ``i``."""
        return self.targets[self.offsets[i]:self.offsets[i + 1]]

    def neighbor_codes(self, code: int, sample: Sample) -> set[int]:
        return {int(c) for c in self.points[self.neighbors(sample.index_of(code))]}

    def choose(self, cur: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """A uniformly random candidate per row, ``-1`` where there is none."""
        cnt = self.counts[cur]
        out = np.full(cur.size, -1, dtype=np.int64)
        has = cnt > 0
        pick = self.offsets[cur[has]] + (rng.random(int(has.sum())) * cnt[has]).astype(np.int64)
        out[has] = self.targets[pick]
        return out


def build_neighbor_table(sample: Sample) -> NeighborTable:
    """Exact nearest strictly-fitter sets for every sample point.

    Searches rings of growing Hamming radius around each point and switches to
    a direct scan of the fitter points once that is cheaper than the next ring.
    """
    m = len(sample)
    if m == 0:
        raise InputError("sample is empty")
    n = sample.n
    codes, fit, pos = sample.points, sample.fitness, sample.position
    full = np.full(1 << n, -np.inf)
    full[codes] = fit
    order, rank = _fitter_order(sample)
    distance = np.zeros(m, dtype=np.int64)
    srcs, dsts = [], []

    unresolved = np.flatnonzero(rank > 0)
    for d in range(1, n + 1):
        if unresolved.size == 0:
            break
        masks = _masks(n, d)
        if int(rank[unresolved].sum()) < unresolved.size * masks.size:
            break
        step = max(1, _CHUNK_ENTRIES // masks.size)
        found = np.zeros(unresolved.size, dtype=bool)
        for lo in range(0, unresolved.size, step):
            rows = unresolved[lo:lo + step]
            q = codes[rows][:, None] ^ masks[None, :]
            hit = full[q] > fit[rows][:, None]
            r, c = np.nonzero(hit)
            srcs.append(rows[r])
            dsts.append(pos[q[r, c]])
            has = hit.any(axis=1)
            distance[rows[has]] = d
            found[lo:lo + step] = has
        unresolved = unresolved[~found]

    for i in unresolved:
        cand = order[: rank[i]]
        dd = popcount(codes[i] ^ codes[cand])
        dmin = int(dd.min())
        sel = cand[dd == dmin]
        srcs.append(np.full(sel.size, i, dtype=np.int64))
        dsts.append(sel)
        distance[i] = dmin

    src = np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dsts) if dsts else np.zeros(0, dtype=np.int64)
    return NeighborTable.from_pairs(codes, src, dst, distance, "exhaustive")


# -- sampled estimators ------------------------------------------------------------

class _Chooser(Protocol):
    def choose(self, cur: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...


class _FitterSampler:
    """Nearest candidates within a uniform without-replacement sample of ``budget`` fitter points.

    The sample is never materialized. For a query point the fitter points fall
    into Hamming shells by distance; the number of sampled points in the shell at
    distance ``d`` is hypergeometric given that no nearer shell was hit, so the
    shells are examined outward until one is hit. Shell members are found by
    enumerating the ring of radius ``d`` while that is cheaper than listing the
    remaining fitter points, and by a direct scan otherwise. The candidate set is
    a uniform subset of the first hit shell of the hypergeometric size.
    """

    def __init__(self, sample: Sample, budget: int):
        if budget < 1:
            raise InputError("budget must be >= 1")
        self.sample = sample
        self.budget = budget
        self.order, self.rank = _fitter_order(sample)
        self._full = np.full(1 << sample.n, -np.inf)
        self._full[sample.points] = sample.fitness

    def nearest(self, cur: np.ndarray, rng: np.random.Generator, with_sets: bool = False):
        """For each query point: sampled minimum distance (0 if nothing is fitter), one
        uniformly chosen nearest candidate (``-1`` if none) and, if requested, all
        sampled nearest candidates as ``(row, candidate)`` pairs."""
        n = self.sample.n
        cur = np.asarray(cur, dtype=np.int64)
        dist = np.zeros(cur.size, dtype=np.int64)
        nxt = np.full(cur.size, -1, dtype=np.int64)
        pairs: list[tuple[np.ndarray, np.ndarray]] = []
        pool = self.rank[cur].copy()
        unresolved = np.flatnonzero(pool > 0)
        d = 1
        while unresolved.size and d <= n:
            masks = _masks(n, d)
            by_scan = pool[unresolved] < masks.size
            if by_scan.any():
                self._scan(cur, unresolved[by_scan], d, pool, rng, dist, nxt, pairs, with_sets)
                unresolved = unresolved[~by_scan]
            if unresolved.size:
                unresolved = self._ring(cur, unresolved, d, masks, pool, rng, dist, nxt, pairs, with_sets)
            d += 1
        if unresolved.size:
            raise InternalError("fitter points left unassigned to any shell")
        if with_sets:
            empty = np.zeros(0, dtype=np.int64)
            rows = np.concatenate([p[0] for p in pairs]) if pairs else empty
            cands = np.concatenate([p[1] for p in pairs]) if pairs else empty
            return dist, nxt, (rows, cands)
        return dist, nxt

    def _pick(self, rows, hit, cand, k, rng, nxt, pairs, with_sets):
        """Uniform ``k``-subset of the hit entries per row; one of them becomes the move."""
        keys = rng.random(hit.shape)
        keys[~hit] = 2.0
        nxt[rows] = cand[np.arange(rows.size), keys.argmin(axis=1)]
        if with_sets:
            order = np.argsort(keys, axis=1)
            sel = np.arange(hit.shape[1])[None, :] < k[:, None]
            r, c = np.nonzero(sel)
            pairs.append((rows[r], cand[r, order[r, c]]))

    def _ring(self, cur, rows_all, d, masks, pool, rng, dist, nxt, pairs, with_sets):
        codes, pos, fit = self.sample.points, self.sample.position, self.sample.fitness
        left = []
        step = max(1, _CHUNK_ENTRIES // masks.size)
        for lo in range(0, rows_all.size, step):
            rows = rows_all[lo:lo + step]
            pts = cur[rows]
            q = codes[pts][:, None] ^ masks[None, :]
            hit = self._full[q] > fit[pts][:, None]
            c = hit.sum(axis=1)
            take = np.minimum(self.budget, pool[rows])
            k = rng.hypergeometric(c, pool[rows] - c, take)
            got = k > 0
            if got.any():
                dist[rows[got]] = d
                self._pick(rows[got], hit[got], pos[q[got]], k[got], rng, nxt, pairs, with_sets)
            pool[rows[~got]] -= c[~got]
            left.append(rows[~got])
        return np.concatenate(left) if left else np.zeros(0, dtype=np.int64)

    def _scan(self, cur, rows_all, d0, pool, rng, dist, nxt, pairs, with_sets):
        n = self.sample.n
        codes = self.sample.points
        rows_all = rows_all[np.argsort(self.rank[cur[rows_all]], kind="stable")]
        widths = self.rank[cur[rows_all]]
        lo = 0
        while lo < rows_all.size:
            hi = min(rows_all.size, lo + max(1, _CHUNK_ENTRIES // int(widths[lo])))
            while hi - lo > 1 and (hi - lo) * int(widths[hi - 1]) > _CHUNK_ENTRIES:
                hi = lo + (hi - lo) // 2
            rows = rows_all[lo:hi]
            width = int(widths[hi - 1])
            lo = hi
            pts = cur[rows]
            r = self.rank[pts]
            j = np.arange(width)
            valid = j[None, :] < r[:, None]
            cand = self.order[np.where(valid, j[None, :], 0)]
            dd = popcount(codes[pts][:, None] ^ codes[cand])
            # shells nearer than d0 were already found empty
            dd[~valid | (dd < d0)] = n + 1
            counts = np.bincount((np.arange(rows.size)[:, None] * (n + 2) + dd).ravel(), minlength=rows.size * (n + 2))
            counts = counts.reshape(rows.size, n + 2)
            remaining = pool[rows].copy()
            star = np.zeros(rows.size, dtype=np.int64)
            kk = np.zeros(rows.size, dtype=np.int64)
            for dd_ in range(d0, n + 1):
                open_ = star == 0
                if not open_.any():
                    break
                c = counts[open_, dd_]
                take = np.minimum(self.budget, remaining[open_])
                k = rng.hypergeometric(c, remaining[open_] - c, take)
                idx = np.flatnonzero(open_)
                star[idx[k > 0]] = dd_
                kk[idx[k > 0]] = k[k > 0]
                remaining[idx[k == 0]] -= c[k == 0]
            if np.any(star == 0):
                raise InternalError("direct scan left a query point without a shell")
            dist[rows] = star
            self._pick(rows, dd == star[:, None], cand, kk, rng, nxt, pairs, with_sets)


class RandQuery:
    """Fresh nearest-fitter estimate on every visit."""

    strategy = "rand"

    def __init__(self, sample: Sample, budget: int = DEFAULT_BUDGET):
        self._sampler = _FitterSampler(sample, budget)

    def choose(self, cur: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self._sampler.nearest(cur, rng)[1]


class CombiQuery:
    """Fresh estimate on every visit, merged into a per-point memory of the nearest candidates seen.

    Walks advance in lock step; all visits of one step sample first, then the
    memory is updated once per point, then every walk moves using the updated
    memory. Ties with the remembered distance extend the remembered set.
    """

    strategy = "combi"

    def __init__(self, sample: Sample, budget: int = DEFAULT_BUDGET):
        self._sampler = _FitterSampler(sample, budget)
        m = len(sample)
        self.none = sample.n + 1
        self.best_distance = np.full(m, self.none, dtype=np.int64)
        self.visits = np.zeros(m, dtype=np.int64)
        self._src = np.zeros(0, dtype=np.int64)
        self._dst = np.zeros(0, dtype=np.int64)
        self.history: list[tuple[np.ndarray, np.ndarray]] = []
        self.keep_history = False

    def memory(self, i: int) -> np.ndarray:
        lo, hi = np.searchsorted(self._src, [i, i + 1])
        return self._dst[lo:hi]

    def choose(self, cur: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        m = self.best_distance.size
        dist, _, (rows, cands) = self._sampler.nearest(cur, rng, with_sets=True)
        np.add.at(self.visits, cur, 1)
        new_src = cur[rows]
        new_d = dist[rows]
        best = self.best_distance.copy()
        np.minimum.at(best, new_src, new_d)
        keep_old = self.best_distance[self._src] == best[self._src]
        keep_new = new_d == best[new_src]
        key = np.concatenate([self._src[keep_old] * m + self._dst[keep_old], new_src[keep_new] * m + cands[keep_new]])
        key = np.unique(key)
        self._src, self._dst = key // m, key % m
        self.best_distance = best
        if self.keep_history:
            self.history.append((cur.copy(), best[cur].copy()))

        out = np.full(cur.size, -1, dtype=np.int64)
        lo = np.searchsorted(self._src, cur, side="left")
        hi = np.searchsorted(self._src, cur, side="right")
        cnt = hi - lo
        has = cnt > 0
        pick = lo[has] + (rng.random(int(has.sum())) * cnt[has]).astype(np.int64)
        out[has] = self._dst[pick]
        return out

    def as_table(self) -> NeighborTable:
        """Snapshot of the memory as a neighbour table."""
        dist = np.where(self.best_distance > self._sampler.sample.n, 0, self.best_distance)
        return NeighborTable.from_pairs(self._sampler.sample.points, self._src, self._dst, dist, "combi")


def estimate_neighbors(sample: Sample, strategy: str, budget: int = DEFAULT_BUDGET, rng: np.random.Generator | None = None):
    """Sampled nearest-fitter estimator.

    ``dyna`` returns a precomputed :class:`NeighborTable`; ``rand`` and
    ``combi`` return query objects consulted at every visit during the walks.
    """
    if budget < 1:
        raise InputError("budget must be >= 1")
    if strategy == "dyna":
        rng = rng if rng is not None else np.random.default_rng()
        sampler = _FitterSampler(sample, budget)
        everyone = np.arange(len(sample), dtype=np.int64)
        dist, _, (rows, cands) = sampler.nearest(everyone, rng, with_sets=True)
        return NeighborTable.from_pairs(sample.points, rows, cands, dist, "dyna")
    if strategy == "rand":
        return RandQuery(sample, budget)
    if strategy == "combi":
        return CombiQuery(sample, budget)
    raise InputError(f"unknown estimator {strategy!r}; expected dyna, rand or combi")


def make_chooser(sample: Sample, strategy: str = "exhaustive", budget: int = DEFAULT_BUDGET, rng: np.random.Generator | None = None):
    if strategy == "exhaustive":
        return build_neighbor_table(sample)
    if strategy not in STRATEGIES:
        raise InputError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    return estimate_neighbors(sample, strategy, budget, rng)


# -- walking ---------------------------------------------------------------------

def slow_adaptive_walk(start: int, table: NeighborTable, sample: Sample, rng: np.random.Generator) -> WalkRecord:
    """Single walk from point code ``start``, one step at a time."""
    i = sample.index_of(start)
    seen = {i}
    path = [int(sample.points[i])]
    steps = []
    while True:
        # fitter-only candidates can never be revisits; the filter keeps that explicit
        cands = [c for c in table.neighbors(i) if c not in seen]
        if not cands:
            break
        j = int(cands[int(rng.integers(len(cands)))])
        if not sample.fitness[j] > sample.fitness[i]:
            raise InternalError("neighbour table offered a point that is not fitter")
        steps.append((int(sample.points[i]) ^ int(sample.points[j])).bit_count())
        path.append(int(sample.points[j]))
        seen.add(j)
        i = j
    return WalkRecord(tuple(path), tuple(steps))


def _walk_lockstep(sample: Sample, chooser: _Chooser, starts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    fit = sample.fitness
    cur = starts.copy()
    active = np.ones(cur.size, dtype=bool)
    columns = [cur.copy()]
    while True:
        a = np.flatnonzero(active)
        if a.size == 0:
            break
        nxt = chooser.choose(cur[a], rng)
        go = nxt >= 0
        moved, dest = a[go], nxt[go]
        # strictly increasing fitness along a walk is what rules out revisits
        if np.any(fit[dest] <= fit[cur[moved]]):
            raise InternalError("walker was offered a point that is not fitter")
        active[a[~go]] = False
        if moved.size == 0:
            break
        col = np.full(cur.size, -1, dtype=np.int64)
        col[moved] = dest
        cur[moved] = dest
        columns.append(col)
    idx = np.stack(columns, axis=1)
    return np.where(idx >= 0, sample.points[np.maximum(idx, 0)], -1)


def walk_all(
    sample: Sample,
    table: _Chooser | None = None,
    rng: np.random.Generator | int | None = None,
    repeats: int = 1,
    strategy: str | None = None,
    budget: int = DEFAULT_BUDGET,
) -> WalkSet:
    """``repeats`` walks from every sample point.

    ``table`` is a neighbour table or sampled query; when omitted one is built
    for ``strategy`` (default ``exhaustive``). Row ``r * len(sample) + i`` of the
    result is repeat ``r`` from sample point ``i``.
    """
    if repeats < 1:
        raise InputError("repeats must be >= 1")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    if table is None:
        table = make_chooser(sample, strategy or "exhaustive", budget, rng)
    strategy = getattr(table, "strategy", strategy or "exhaustive")
    starts = np.tile(np.arange(len(sample), dtype=np.int64), repeats)
    paths = _walk_lockstep(sample, table, starts, rng)
    return WalkSet(sample.n, paths, strategy, seed, {"repeats": repeats, "budget": budget if strategy != "exhaustive" else None})
