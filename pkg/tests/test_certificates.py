from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from poincarelab.certificates import (
    an_grid_coloring, build_gamma_k_family, congestion_corpus, gamma_k_h1_bounds, inverse_growth,
    product_lower_check, product_upper_candidate, projection_check, projection_pushforward, tree_median_capacity,
    verify_gamma_claims,
)
from poincarelab.graphkit import (
    WeightedGraph, complete_graph, induced_subgraph, make_regular_tree, make_zd_box, path_graph, product,
    seeded_corpus, star_graph,
)
from poincarelab.poincare import capacity_exact, exact_h1


def shaped_walk_counts(g: WeightedGraph, k: int, t: int, s: int) -> Counter:
    """Number of walks from each level-t vertex to each level-s vertex whose level
    steps are up (k - t), down (k), up (s); computed by dynamic programming."""
    levels = np.array([g.labels[v]["level"] for v in g.vertices])
    nbrs = g.neighbors
    steps = [1] * (k - t) + [-1] * k + [1] * s
    out: Counter = Counter()
    for v in np.flatnonzero(levels == t):
        cur = {int(v): 1}
        for st in steps:
            nxt: Counter = Counter()
            for x, c in cur.items():
                for y in nbrs[x]:
                    if levels[y] == levels[x] + st:
                        nxt[int(y)] += c
            cur = nxt
        for w, c in cur.items():
            out[(int(v), w)] += c
    return out


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_gamma_claims_pass(k):
    rep = verify_gamma_claims(build_gamma_k_family(k))
    assert rep["pass"], rep["violations"]
    assert rep["n"] == (k + 1) * 2 ** k
    assert rep["claim2_max_fraction"] <= 1.0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_gamma_paths_match_walk_enumeration(k):
    fam = build_gamma_k_family(k)
    for t, s in fam.level_pairs():
        paths, v, w = fam.block(t, s)
        got = Counter(zip(v.tolist(), w.tolist()))
        expect = shaped_walk_counts(fam.graph, k, t, s)
        assert got == expect
        assert set(got.values()) == {2 ** (k - t + s)}
        assert paths.shape[1] == 2 * k - t + s + 1


def test_gamma_total_paths_k2():
    fam = build_gamma_k_family(2)
    total = sum(fam.block(t, s)[0].shape[0] for t, s in fam.level_pairs())
    expect = sum(sum(shaped_walk_counts(fam.graph, 2, t, s).values()) for t, s in fam.level_pairs())
    assert total == expect


def test_gamma_tamper_detected():
    fam = build_gamma_k_family(3)
    paths, _, _ = fam.block(1, 0)
    bad = paths[0].copy()
    bad[2] = bad[0]
    rep = verify_gamma_claims(fam.tampered(1, 0, 0, bad))
    assert not rep["pass"]
    assert rep["violations"]


def test_gamma_lower_bound_below_exact_small():
    b = gamma_k_h1_bounds(1)
    val, _ = exact_h1(build_gamma_k_family(1).graph)
    assert b.lower <= val + 1e-9 <= b.upper + 2e-9


def test_gamma_claim3_constant_stable():
    cs = [verify_gamma_claims(build_gamma_k_family(k))["c"] for k in range(2, 6)]
    assert max(cs) / min(cs) <= 8


def test_product_lower_k2_k2():
    rep = product_lower_check(complete_graph(2), complete_graph(2), 1.0)
    c4, _ = exact_h1(product(complete_graph(2), complete_graph(2)))
    assert rep["h_product_lower"] == pytest.approx(c4)
    assert rep["rho"] == pytest.approx(c4 / 2.0)
    assert rep["pass"]


def test_product_lower_rejects_disconnected():
    g = WeightedGraph.build(["a", "b"], [])
    with pytest.raises(ValueError):
        product_lower_check(g, complete_graph(2), 1.0)


def test_projection_small_example():
    verts = ["a1", "a2", "b1"]
    labels = {"a1": {"g": "a", "h": 1}, "a2": {"g": "a", "h": 2}, "b1": {"g": "b", "h": 1}}
    gamma = WeightedGraph.build(verts, [("a1", "b1"), ("a1", "a2")], labels=labels)
    pi = projection_pushforward(gamma)
    assert list(pi.vertices) == ["a", "b"]
    assert dict(zip(pi.vertices, pi.mu.tolist())) == {"a": 2, "b": 1}
    assert pi.m == 1


def test_projection_full_product():
    A, B = path_graph(3), complete_graph(2)
    pi = projection_pushforward(product(A, B))
    assert pi.n == A.n and pi.m == A.m
    assert np.all(pi.mu == B.n)


def test_projection_monotone_small():
    G = product(path_graph(3), path_graph(3))
    for p in (1.0, 2.0):
        assert projection_check(G, p, 0.125)["pass"]


def test_projection_requires_labels():
    with pytest.raises(ValueError):
        projection_pushforward(path_graph(3))


@pytest.mark.parametrize("dims,R", [((8,), 4), ((16, 16), 4), ((6, 6, 6), 6)])
def test_an_coloring(dims, R):
    col = an_grid_coloring(dims, R)
    rep = col.verify()
    assert rep["pass"] and rep["cover"]
    assert rep["classes"] == 2 ** len(dims)
    assert rep["separation"] >= R // 2


def test_an_coloring_1d_blocks():
    col = an_grid_coloring((8,), 4)
    even = sorted(p for c in col.classes[(0,)] for p in col.cells[c])
    assert even == [(0,), (1,), (4,), (5,)]


def test_inverse_growth_grid():
    Y = make_zd_box(2, 7)
    assert inverse_growth(Y, 1) == 1
    assert inverse_growth(Y, 5) == 2


def test_product_candidate_case_b_sound():
    X, Y = complete_graph(2), make_zd_box(1, 8)
    G = product(X, Y)
    for p in (1.0, 2.0):
        c = product_upper_candidate(G, X, Y, p, 0.125, 1)
        assert c.case == "b" and c.admissible
        exact, _ = capacity_exact(G, G.mu, p, 0.0625, max_n=16)
        assert c.bound >= exact - 1e-9


def test_product_candidate_case_a_sound():
    T, Y = make_regular_tree(3, 2), make_zd_box(2, 3)
    G = product(T, Y)
    col = [v for v in G.vertices if G.labels[v]["h"] == Y.vertices[4]]
    extra = [v for v in G.vertices if G.labels[v]["h"] == Y.vertices[1]][:2]
    sub = induced_subgraph(G, col + extra)
    c = product_upper_candidate(sub, T, Y, 1.0, 0.125, 1)
    assert c.case == "a" and c.admissible
    exact, _ = capacity_exact(sub, sub.mu, 1.0, 0.0625, max_n=12)
    assert c.bound >= exact - 1e-9


def test_product_candidate_mutation_fails():
    X, Y = complete_graph(2), make_zd_box(1, 8)
    c = product_upper_candidate(product(X, Y), X, Y, 1.0, 0.125, 1, nu_scale=100.0)
    assert not c.admissible


def test_tree_median_star():
    for p in (1.0, 2.0):
        rep = tree_median_capacity(star_graph(3), p=p)
        assert rep["median"] == "0000"
        assert rep["bound"] == pytest.approx((2 / 4) ** (1 / p))
        assert rep["pass"]
        exact, _ = capacity_exact(star_graph(3), np.ones(4), p, 0.25)
        assert exact <= rep["value"] + 1e-9


def test_tree_median_path():
    rep = tree_median_capacity(path_graph(5))
    assert rep["median"] == path_graph(5).vertices[2]
    assert rep["pass"]


def test_tree_median_atom_error():
    with pytest.raises(ValueError):
        tree_median_capacity(path_graph(4), mu=np.array([5.0, 1.0, 1.0, 1.0]))


def test_congestion_corpus_small():
    rep = congestion_corpus(seeded_corpus(25, 7, seed=5))
    assert rep["pass"] and rep["checked"] > 0
