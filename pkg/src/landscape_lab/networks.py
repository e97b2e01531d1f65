"""Networks over PLOPs: step-size-barrier (temperature) networks and basin overlap networks.

Both are directed from less fit to fitter PLOPs. Graph statistics treat edges
as undirected for density and clustering and as directed for path lengths.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .basins import BasinMap
from .errors import InputError
from .plops import LosReport
from .problems import codes_to_strings
from .sampling import Sample
from .walks import WalkSet

EXCLUSION_MODES = ("from-walk", "same-walk", "any-walk")
PATH_SAMPLE_CAP = 1000


@dataclass(eq=False)
class WeightedDigraph:
    """Directed graph on point codes; edges are index pairs into ``nodes``."""

    n: int
    nodes: np.ndarray
    fitness: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    kind: str = ""

    def __post_init__(self):
        s = np.asarray(self.src, dtype=np.int64)
        d = np.asarray(self.dst, dtype=np.int64)
        w = np.asarray(self.weight)
        if not (s.shape == d.shape == w.shape):
            raise InputError("edge arrays must have equal lengths")
        if np.any(s == d):
            raise InputError("self-loops are not allowed")
        v = self.nodes.size
        if s.size and (s.min() < 0 or d.min() < 0 or s.max() >= v or d.max() >= v):
            raise InputError("edge endpoint out of range")
        key = s * v + d
        if np.unique(key).size != key.size:
            raise InputError("at most one edge per ordered pair")
        order = np.argsort(key, kind="stable")
        self.src, self.dst, self.weight = s[order], d[order], w[order]

    @property
    def V(self) -> int:
        return int(self.nodes.size)

    @property
    def E(self) -> int:
        return int(self.src.size)

    def edges(self) -> list[tuple[int, int, float]]:
        """Edges as ``(src_code, dst_code, weight)``."""
        return [(int(self.nodes[a]), int(self.nodes[b]), w.item()) for a, b, w in zip(self.src, self.dst, self.weight)]

    def edge_weight(self, x: int, y: int):
        """Weight of the edge between two point codes, ``None`` if absent."""
        i, j = np.searchsorted(self.nodes, [x, y])
        if i >= self.V or j >= self.V or self.nodes[i] != x or self.nodes[j] != y:
            return None
        k = np.searchsorted(self.src * self.V + self.dst, i * self.V + j)
        if k < self.E and self.src[k] == i and self.dst[k] == j:
            return self.weight[k].item()
        return None

    def adjacency(self) -> sparse.csr_matrix:
        return sparse.csr_matrix((np.ones(self.E, dtype=np.int8), (self.src, self.dst)), shape=(self.V, self.V))

    @property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.V)

    @property
    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.V)

    def subgraph_edges(self, keep: np.ndarray) -> "WeightedDigraph":
        """Same nodes, only the edges where ``keep`` is true."""
        return WeightedDigraph(self.n, self.nodes, self.fitness, self.src[keep], self.dst[keep], self.weight[keep], self.kind)

    def reachable_from(self, code: int) -> set[int]:
        """Codes of nodes with a directed path to ``code`` (including itself)."""
        i = int(np.searchsorted(self.nodes, code))
        if i >= self.V or self.nodes[i] != code:
            raise InputError(f"{code} is not a node")
        order = csgraph.breadth_first_order(self.adjacency().T.tocsr(), i, directed=True, return_predecessors=False)
        return {int(c) for c in self.nodes[order]}

    def to_csv(self, path: str | Path) -> None:
        names = codes_to_strings(self.nodes, self.n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["src_bits", "dst_bits", "weight"])
            for a, b, wt in zip(self.src, self.dst, self.weight):
                w.writerow([names[a], names[b], wt.item()])


def _plop_nodes(report: LosReport) -> tuple[np.ndarray, np.ndarray]:
    """Sample indices of PLOPs and a sample-index to node-index map (``-1`` elsewhere)."""
    idx = np.flatnonzero(report.plop)
    node_of = np.full(len(report.sample), -1, dtype=np.int64)
    node_of[idx] = np.arange(idx.size)
    return idx, node_of


# -- temperature networks -------------------------------------------------------

def step_size_barriers(report: LosReport, walks: WalkSet) -> WeightedDigraph:
    """Edge ``(x, y)`` for PLOPs met in that order on some walk; weight is the step size barrier.

    The barrier is the smallest, over every recorded stretch of walk from ``x``
    to ``y``, of the largest step inside that stretch.
    """
    sample = report.sample
    idx, node_of = _plop_nodes(report)
    paths = walks.paths
    valid = paths >= 0
    node = np.full(paths.shape, -1, dtype=np.int64)
    node[valid] = node_of[sample.position[paths[valid]]]
    steps = walks.steps
    keys, weights = [], []
    v = idx.size
    for a in range(paths.shape[1] - 1):
        rows = np.flatnonzero(node[:, a] >= 0)
        if rows.size == 0:
            continue
        barrier = np.maximum.accumulate(steps[rows, a:], axis=1)
        later = node[rows, a + 1:]
        r, c = np.nonzero(later >= 0)
        keys.append(node[rows[r], a] * v + later[r, c])
        weights.append(barrier[r, c])
    if keys:
        k = np.concatenate(keys)
        w = np.concatenate(weights)
        order = np.lexsort((w, k))
        k, w = k[order], w[order]
        first = np.concatenate([[True], k[1:] != k[:-1]]) if k.size else np.zeros(0, dtype=bool)
        k, w = k[first], w[first]
    else:
        k = w = np.zeros(0, dtype=np.int64)
    return WeightedDigraph(sample.n, sample.points[idx], sample.fitness[idx], k // max(v, 1), k % max(v, 1), w.astype(np.int64), "temperature")


def _row_modes(rows: np.ndarray, values: np.ndarray, nrows: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-row mode (smallest on ties) of small non-negative integers and the row counts."""
    hist = np.bincount(rows * width + values, minlength=nrows * width).reshape(nrows, width)
    return hist.argmax(axis=1), hist.sum(axis=1)


def temperature_stats(net: WeightedDigraph) -> dict:
    """Mode of incoming barriers averaged over nodes with incoming edges, and the fittest node's mode.

    Either value is ``None`` when undefined.
    """
    modes, cnt = _row_modes(net.dst, net.weight.astype(np.int64), net.V, net.n + 1)
    has = cnt > 0
    fittest = int(np.argmax(net.fitness)) if net.V else -1
    return {
        "all_nodes_avg_mode_sb": float(modes[has].mean()) if has.any() else None,
        "fittest_node_mode_sb": int(modes[fittest]) if net.V and has[fittest] else None,
        "nodes_with_incoming": int(has.sum()),
    }


# -- basin overlap networks -------------------------------------------------------

def basin_overlap_network(basins: BasinMap, report: LosReport) -> WeightedDigraph:
    """PLOP ``x`` links to fitter PLOP ``y`` when their basins intersect.

    Among targets whose basin contains ``B(x)``, only those adding the fewest
    extra members are kept; targets whose basins merely overlap are all kept.
    Edge weight is the number of shared basin members.
    """
    sample = report.sample
    if basins.sample is not sample and not np.array_equal(basins.sample.points, sample.points):
        raise InputError("basins and report are over different samples")
    idx = np.flatnonzero(report.plop & (basins.sizes > 0))
    v = idx.size
    mem = basins.membership[idx].astype(np.int32)
    shared = (mem @ mem.T).tocoo()
    i, j, c = shared.row.astype(np.int64), shared.col.astype(np.int64), shared.data.astype(np.int64)
    fit = sample.fitness[idx]
    size = basins.sizes[idx].astype(np.int64)
    up = (i != j) & (fit[i] < fit[j]) & (c > 0)
    i, j, c = i[up], j[up], c[up]
    subset = c == size[i]
    extra = np.where(subset, size[j] - size[i], np.iinfo(np.int64).max)
    best = np.full(v, np.iinfo(np.int64).max)
    np.minimum.at(best, i, extra)
    keep = ~subset | (extra == best[i])
    return WeightedDigraph(sample.n, sample.points[idx], fit, i[keep], j[keep], c[keep], "overlap")


def exclude_nonwalk_edges(net: WeightedDigraph, walks: WalkSet, sample: Sample, mode: str = "from-walk") -> WeightedDigraph:
    """Drop overlap edges not supported by the recorded walks.

    ``from-walk``
        keep ``(x, y)`` if some walk started at ``x`` visits ``y``;
    ``same-walk``
        keep it if one walk visits both;
    ``any-walk``
        keep it if each endpoint is visited by some walk.
    """
    if mode not in EXCLUSION_MODES:
        raise InputError(f"unknown exclusion mode {mode!r}; expected one of {EXCLUSION_MODES}")
    m = len(sample)
    pos = sample.position
    valid = walks.paths >= 0
    visited = pos[walks.paths[valid]]
    node_codes = net.nodes
    src = pos[node_codes[net.src]]
    dst = pos[node_codes[net.dst]]
    if mode == "from-walk":
        start = np.broadcast_to(pos[walks.starts][:, None], walks.paths.shape)[valid]
        pairs = np.unique(start * m + visited)
        q = src * m + dst
        at = np.searchsorted(pairs, q)
        keep = (at < pairs.size) & (pairs[np.minimum(at, pairs.size - 1)] == q)
    elif mode == "same-walk":
        node_of = np.full(m, -1, dtype=np.int64)
        node_of[pos[node_codes]] = np.arange(net.V)
        row = np.broadcast_to(np.arange(len(walks))[:, None], walks.paths.shape)[valid]
        on = node_of[visited] >= 0
        inc = sparse.csr_matrix((np.ones(int(on.sum()), dtype=np.int32), (node_of[visited[on]], row[on])), shape=(net.V, len(walks)))
        co = (inc @ inc.T).tocsr()
        keep = np.asarray(co[net.src, net.dst]).ravel() > 0
    else:
        seen = np.zeros(m, dtype=bool)
        seen[visited] = True
        keep = seen[src] & seen[dst]
    return net.subgraph_edges(keep)


# -- statistics -------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkStats:
    V: int
    E: int
    mean_degree: float
    link_density: float
    clustering_coefficient: float
    avg_path_length: float | None
    degree_cv: float | None
    er_path_length: float | None
    reversed_cumulative_degree_distribution: tuple[tuple[int, float], ...]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reversed_cumulative_degree_distribution"] = [list(p) for p in self.reversed_cumulative_degree_distribution]
        return d

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")


def clustering_coefficients(net: WeightedDigraph) -> np.ndarray:
    """Local clustering on the undirected version; 0 for nodes of degree below 2."""
    a = net.adjacency()
    u = ((a + a.T) > 0).astype(np.int64).tocsr()
    deg = np.asarray(u.sum(axis=1)).ravel()
    tri = np.asarray((u @ u).multiply(u).sum(axis=1)).ravel() / 2.0
    pairs = deg * (deg - 1) / 2.0
    return np.divide(tri, pairs, out=np.zeros(net.V), where=pairs > 0)


def average_path_length(net: WeightedDigraph, cap: int = PATH_SAMPLE_CAP, rng: np.random.Generator | None = None) -> float | None:
    """Directed shortest-path length pooled over reachable ordered pairs from at most ``cap`` sources."""
    if net.V == 0:
        return None
    if net.V <= cap:
        sources = np.arange(net.V)
    else:
        rng = rng if rng is not None else np.random.default_rng()
        sources = np.sort(rng.choice(net.V, size=cap, replace=False))
    d = csgraph.shortest_path(net.adjacency(), directed=True, unweighted=True, indices=sources)
    d = d[np.isfinite(d) & (d > 0)]
    return float(d.mean()) if d.size else None


def degree_distribution(degree: np.ndarray) -> tuple[tuple[int, float], ...]:
    """``P(K >= k)`` at every distinct degree ``k``."""
    ks, counts = np.unique(degree, return_counts=True)
    tail = np.cumsum(counts[::-1])[::-1] / degree.size
    return tuple((int(k), float(p)) for k, p in zip(ks, tail))


def network_stats(net: WeightedDigraph, path_sample_cap: int = PATH_SAMPLE_CAP, rng: np.random.Generator | None = None) -> NetworkStats | None:
    """Summary statistics, or ``None`` for graphs with fewer than two nodes."""
    v, e = net.V, net.E
    if v < 2:
        return None
    degree = net.in_degree + net.out_degree
    mean_k = 2.0 * e / v
    sd = float(degree.std())
    return NetworkStats(
        V=v,
        E=e,
        mean_degree=mean_k,
        link_density=2.0 * e / (v * (v - 1)),
        clustering_coefficient=float(clustering_coefficients(net).mean()),
        avg_path_length=average_path_length(net, path_sample_cap, rng),
        degree_cv=sd / mean_k if mean_k > 0 else None,
        er_path_length=math.log(v) / math.log(mean_k) if mean_k > 1 else None,
        reversed_cumulative_degree_distribution=degree_distribution(degree),
    )
