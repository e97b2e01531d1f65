import networkx as nx
import numpy as np
import pytest
from scipy import sparse

from landscape_lab.basins import BasinMap, build_basins
from landscape_lab.errors import InputError
from landscape_lab.networks import (
    WeightedDigraph, average_path_length, basin_overlap_network, clustering_coefficients, exclude_nonwalk_edges,
    network_stats, step_size_barriers, temperature_stats,
)
from landscape_lab.plops import LosReport, detect_plops
from landscape_lab.problems import TabulatedLandscape, generate_nk, popcount
from landscape_lab.sampling import Sample, enumerate_space
from landscape_lab.walks import WalkRecord, WalkSet, walk_all


def _walks(n, paths):
    recs = []
    for p in paths:
        recs.append(WalkRecord(tuple(p), tuple(int(popcount(a ^ b)) for a, b in zip(p, p[1:]))))
    return WalkSet.from_records(n, recs)


def _report(n, codes, plops):
    table = np.zeros(2**n)
    table[list(codes)] = np.arange(1, len(codes) + 1) / 10
    s = Sample.from_points(TabulatedLandscape(n, table), codes)
    return LosReport(s, None, np.array([1.0 if c in plops else 0.0 for c in s.points]))


def test_barrier_single_stretch():
    rep = _report(6, [0b000000, 0b000111], {0b000000, 0b000111})
    net = step_size_barriers(rep, _walks(6, [[0b000000, 0b000111]]))
    assert net.edges() == [(0, 7, 3)]


def test_barrier_takes_min_over_stretches():
    a, m1, m2, b = 0b000000, 0b000111, 0b000011, 0b001111
    rep = _report(6, [a, m2, m1, b], {a, b})
    net = step_size_barriers(rep, _walks(6, [[a, m1, b], [a, m2, b]]))
    assert net.edge_weight(a, b) == 2


def _brute_barriers(report, walks):
    plop = {int(c) for c in report.plop_codes}
    best = {}
    for row in range(len(walks)):
        path = [int(c) for c in walks.paths[row] if c >= 0]
        for i in range(len(path)):
            if path[i] not in plop:
                continue
            for j in range(i + 1, len(path)):
                if path[j] in plop:
                    sb = max(popcount(path[t] ^ path[t + 1]) for t in range(i, j))
                    key = (path[i], path[j])
                    best[key] = min(best.get(key, 99), int(sb))
    return best


@pytest.mark.parametrize("seed", range(4))
def test_barriers_match_brute_force(seed):
    inst = generate_nk(6, 4, seed)
    s = enumerate_space(inst)
    ws = walk_all(s, rng=seed, repeats=5)
    rep = detect_plops(s, ws)
    net = step_size_barriers(rep, ws)
    got = {(x, y): w for x, y, w in net.edges()}
    assert got == _brute_barriers(rep, ws)
    assert all(1 <= w <= 6 for w in got.values())
    fit = dict(zip(net.nodes.tolist(), net.fitness.tolist()))
    assert all(fit[x] < fit[y] for x, y in got)


def _graph(fitness, edges, n=4):
    fitness = np.asarray(fitness, dtype=float)
    src = np.array([e[0] for e in edges], dtype=np.int64)
    dst = np.array([e[1] for e in edges], dtype=np.int64)
    w = np.array([e[2] if len(e) > 2 else 1 for e in edges], dtype=np.int64)
    return WeightedDigraph(n, np.arange(fitness.size), fitness, src, dst, w)


def test_temperature_stats_examples():
    g = _graph([0.1, 0.2, 0.3, 0.4], [(0, 3, 2), (1, 3, 2), (2, 3, 4), (0, 1, 1), (0, 2, 3)])
    st = temperature_stats(g)
    assert st["fittest_node_mode_sb"] == 2
    assert st["all_nodes_avg_mode_sb"] == pytest.approx((1 + 3 + 2) / 3)
    lonely = _graph([0.1, 0.5, 0.3], [(0, 2, 1)])
    assert temperature_stats(lonely)["fittest_node_mode_sb"] is None
    assert temperature_stats(_graph([0.1, 0.2], []))["all_nodes_avg_mode_sb"] is None


def _basins(fitness, members):
    m = len(fitness)
    s = Sample(4, np.arange(m), np.asarray(fitness, dtype=float), "MANUAL")
    rows = np.concatenate([[i] * len(b) for i, b in enumerate(members)]).astype(np.int64)
    cols = np.concatenate([list(b) for b in members]).astype(np.int64)
    mat = sparse.csr_matrix((np.ones(rows.size, dtype=bool), (rows, cols)), shape=(m, m))
    return BasinMap(s, mat), LosReport(s, None, np.ones(m))


def test_overlap_disjoint_basins_have_no_edge():
    bm, rep = _basins([0.1, 0.2], [{0}, {1}])
    assert basin_overlap_network(bm, rep).E == 0


def test_overlap_chain_keeps_tightest_superset():
    bm, rep = _basins([0.1, 0.2, 0.3], [{0}, {0, 1}, {0, 1, 2}])
    net = basin_overlap_network(bm, rep)
    assert net.edges() == [(0, 1, 1), (1, 2, 2)]


def test_overlap_incomparable_edges_kept():
    bm, rep = _basins([0.1, 0.2, 0.3, 0.4], [{0, 1}, {1, 2}, {0, 3}, {0, 1, 2, 3}])
    got = {(x, y): w for x, y, w in basin_overlap_network(bm, rep).edges()}
    # 0 has the superset 3 and incomparable overlaps with 1 and 2
    assert got == {(0, 1): 1, (0, 2): 1, (0, 3): 2, (1, 3): 2, (2, 3): 2}


def test_overlap_never_links_to_less_fit(nk10):
    _, s = nk10
    ws = walk_all(s, rng=0)
    rep = detect_plops(s, ws)
    net = basin_overlap_network(build_basins(s, ws), rep)
    assert np.all(net.fitness[net.src] < net.fitness[net.dst])
    assert np.all(net.weight >= 1)


def test_exclusion_modes_on_hand_walks():
    bm, rep = _basins([0.1, 0.2, 0.3], [{0}, {0, 1}, {0, 1, 2}])
    net = basin_overlap_network(bm, rep)
    ws = _walks(4, [[0, 1], [2]])
    assert exclude_nonwalk_edges(net, ws, rep.sample, "from-walk").edges() == [(0, 1, 1)]
    assert exclude_nonwalk_edges(net, ws, rep.sample, "same-walk").edges() == [(0, 1, 1)]
    assert exclude_nonwalk_edges(net, ws, rep.sample, "any-walk").E == 2


@pytest.mark.parametrize("mode", ["from-walk", "same-walk", "any-walk"])
def test_exclusion_is_edge_subset(nk10, mode):
    _, s = nk10
    ws = walk_all(s, rng=0)
    rep = detect_plops(s, ws)
    full = basin_overlap_network(build_basins(s, ws), rep)
    kept = exclude_nonwalk_edges(full, ws, s, mode)
    assert set(kept.edges()) <= set(full.edges())
    assert np.array_equal(kept.nodes, full.nodes)


def test_stats_complete_dag():
    v = 6
    g = _graph(np.arange(v), [(i, j) for i in range(v) for j in range(i + 1, v)])
    st = network_stats(g)
    assert st.link_density == pytest.approx(1.0)
    assert st.clustering_coefficient == pytest.approx(1.0)
    assert st.degree_cv == pytest.approx(0.0)
    assert st.reversed_cumulative_degree_distribution == ((v - 1, 1.0),)


def test_stats_directed_cycle():
    g = _graph([0.1, 0.2, 0.3], [(0, 1), (1, 2), (2, 0)])
    st = network_stats(g)
    assert st.avg_path_length == pytest.approx(1.5)
    assert st.degree_cv == 0.0
    assert st.er_path_length == pytest.approx(np.log(3) / np.log(2))


def test_stats_tiny_graphs():
    assert network_stats(_graph([0.1], [])) is None
    st = network_stats(_graph([0.1, 0.2], []))
    assert st.avg_path_length is None and st.degree_cv is None and st.er_path_length is None


@pytest.mark.parametrize("seed", range(3))
def test_stats_match_networkx(seed):
    rng = np.random.default_rng(seed)
    v = 40
    pairs = [(i, j) for i in range(v) for j in range(i + 1, v) if rng.random() < 0.15]
    g = _graph(np.arange(v), pairs)
    d = nx.DiGraph()
    d.add_nodes_from(range(v))
    d.add_edges_from(pairs)
    assert clustering_coefficients(g).mean() == pytest.approx(nx.average_clustering(d.to_undirected()))
    lengths = [l for s, t in nx.shortest_path_length(d) for u, l in t.items() if u != s]
    assert average_path_length(g) == pytest.approx(np.mean(lengths))
    st = network_stats(g)
    assert st.link_density == pytest.approx(nx.density(d.to_undirected()))


def test_every_plop_reaches_fittest_in_temperature_network(nk10):
    _, s = nk10
    ws = walk_all(s, rng=0)
    rep = detect_plops(s, ws)
    net = step_size_barriers(rep, ws)
    top = int(net.nodes[np.argmax(net.fitness)])
    assert net.reachable_from(top) == set(net.nodes.tolist())


def test_graph_validation():
    with pytest.raises(InputError):
        _graph([0.1, 0.2], [(0, 0)])
    with pytest.raises(InputError):
        _graph([0.1, 0.2], [(0, 1), (0, 1)])
