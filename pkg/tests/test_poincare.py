from __future__ import annotations

import itertools
import math

import cvxpy as cp
import numpy as np
import pytest

from poincarelab.graphkit import (
    WeightedGraph, complete_graph, cycle_graph, make_regular_tree, make_zd_box, path_graph, seeded_corpus,
    star_graph,
)
from poincarelab.poincare import (
    BoundInterval, CapConfig, HpConfig, all_pairs_geodesic_family, axis_order_family, capacity_bounds,
    capacity_exact, congestion_lower_bound, exact_h1, gradient, h2_spectral, hp_bounds, hp_ratio,
    hp_upper_from_witness, loads_from_paths,
    routed_vertex_certificate, uniform_geodesic_family, vertex_congestion_lower_bound,
)


def _grad_expr(g: WeightedGraph, f):
    """cvxpy expression for the vertex gradient max_{y~x} |f(x)-f(y)|."""
    nb = g.neighbors
    return cp.hstack([cp.max(cp.hstack([cp.abs(f[x] - f[int(y)]) for y in nb[x]])) for x in range(g.n)])


def h1_oracle(g: WeightedGraph) -> float:
    """min ||grad f||_1 over mean-zero f with ||f||_1 = 1, one convex program per sign orthant."""
    n = g.n
    best = math.inf
    for signs in itertools.product((1.0, -1.0), repeat=n - 1):
        s = np.array((1.0,) + signs)
        f = cp.Variable(n)
        cons = [cp.sum(f) == 0, s @ f == 1, cp.multiply(s, f) >= 0]
        prob = cp.Problem(cp.Minimize(cp.sum(_grad_expr(g, f))), cons)
        prob.solve(solver=cp.CLARABEL)
        if prob.status == cp.OPTIMAL:
            best = min(best, prob.value)
    return best


def capacity_oracle(g: WeightedGraph, mu: np.ndarray, p: float, alpha: float) -> float:
    """Enumerate all (S0, S1) labelings and solve each convex subproblem."""
    n, total = g.n, float(mu.sum())
    need = alpha * total
    best = math.inf
    for lab in itertools.product((0, 1, 2), repeat=n):
        lab = np.array(lab)
        if mu[lab == 0].sum() < need - 1e-12 or mu[lab == 1].sum() < need - 1e-12:
            continue
        f = cp.Variable(n)
        cons = [f[i] <= 0 for i in np.flatnonzero(lab == 0)] + [f[i] >= 1 for i in np.flatnonzero(lab == 1)]
        G = _grad_expr(g, f)
        obj = mu @ G if p == 1 else mu @ cp.power(G, p)
        prob = cp.Problem(cp.Minimize(obj), cons)
        prob.solve(solver=cp.CLARABEL)
        best = min(best, prob.value)
    return (best / total) ** (1.0 / p)


def test_k2_exact():
    b = hp_bounds(complete_graph(2), 1.0)
    assert b.exact and b.lower == pytest.approx(2.0) and b.upper == pytest.approx(2.0)


def test_ratio_and_gradient_on_path():
    g = path_graph(4)
    f = np.array([3.0, 1.0, -1.0, -3.0])
    assert gradient(g, f).tolist() == [2.0, 2.0, 2.0, 2.0]
    assert hp_ratio(g, f, 1.0) == pytest.approx(1.0)


def test_p4_lower_bound():
    b = hp_bounds(path_graph(4), 1.0)
    assert b.lower >= 0.5


def test_disconnected_is_zero():
    g = WeightedGraph.build(["a", "b", "c", "d"], [("a", "b"), ("c", "d")])
    b = hp_bounds(g, 2.0)
    assert b.lower == 0.0 and b.upper == 0.0 and b.exact


def test_interval_rejects_inverted():
    with pytest.raises(ValueError):
        BoundInterval(2.0, 1.0)


@pytest.mark.parametrize("make", [lambda: path_graph(4), lambda: cycle_graph(5), lambda: complete_graph(4),
                                  lambda: make_regular_tree(3, 1), lambda: make_zd_box(2, 2)])
def test_exact_h1_matches_convex_oracle(make):
    g = make()
    val, f = exact_h1(g)
    assert val == pytest.approx(h1_oracle(g), rel=1e-5, abs=1e-7)
    assert hp_ratio(g, f, 1.0) == pytest.approx(val, rel=1e-9)


def test_exact_h1_on_corpus():
    for g in seeded_corpus(8, 5, seed=11):
        if g.n < 2:
            continue
        val, _ = exact_h1(g)
        assert val == pytest.approx(h1_oracle(g), rel=1e-5, abs=1e-7)


@pytest.mark.parametrize("make", [lambda: cycle_graph(10), lambda: make_regular_tree(3, 3),
                                  lambda: make_zd_box(2, 5)])
@pytest.mark.parametrize("p", [1.0, 2.0])
def test_bounds_bracket(make, p):
    g = make()
    b = hp_bounds(g, p, HpConfig(restarts=10))
    assert 0 < b.lower <= b.upper * (1 + 1e-9)
    fn = b.upper_witness["function"]
    f = np.array([fn[v] for v in g.vertices])
    assert hp_ratio(g, f, p) == pytest.approx(b.upper, rel=1e-6)


def test_certificates_below_exact():
    for g in [path_graph(6), cycle_graph(7), make_regular_tree(3, 1), make_zd_box(2, 3)]:
        val, _ = exact_h1(g)
        for fam in (uniform_geodesic_family(g), all_pairs_geodesic_family(g)):
            edge = congestion_lower_bound(g, fam, 1.0)
            vertex = vertex_congestion_lower_bound(g, fam, 1.0)
            assert edge <= vertex * (1 + 1e-12)
            assert vertex <= val * (1 + 1e-9)
        assert routed_vertex_certificate(g, rounds=20).bound <= val * (1 + 1e-9)


def test_single_geodesic_loads_match_paths():
    g = make_zd_box(2, 3)
    fam = all_pairs_geodesic_family(g, explicit=True)
    for expo in (0.0, 1.0):
        assert np.allclose(fam.load(expo), fam.recount(expo))


def _axis_paths(g: WeightedGraph) -> dict:
    coords = [tuple(g.label(v)["coords"]) for v in g.vertices]
    index = {c: i for i, c in enumerate(coords)}
    d = len(coords[0])
    out = {}
    for s, w in itertools.combinations(range(g.n), 2):
        plist = []
        for perm in itertools.permutations(range(d)):
            cur = list(coords[s])
            path = [s]
            for ax in perm:
                while cur[ax] != coords[w][ax]:
                    cur[ax] += 1 if coords[w][ax] > cur[ax] else -1
                    path.append(index[tuple(cur)])
            plist.append(tuple(path))
        out[(s, w)] = plist
    return out


@pytest.mark.parametrize("d,side", [(2, 3), (3, 2), (2, 4)])
def test_axis_order_loads_match_brute_force(d, side):
    g = make_zd_box(d, side)
    fam = axis_order_family(g)
    assert fam is not None
    paths = _axis_paths(g)
    for expo in (0.0, 1.0):
        assert np.allclose(fam.load(expo), loads_from_paths(g, paths, expo))


def test_axis_order_absent_without_coords():
    assert axis_order_family(cycle_graph(5)) is None


def test_routed_certificate_on_tree_counts_unique_paths():
    g = make_regular_tree(3, 2)
    cert = routed_vertex_certificate(g, rounds=5)
    # in a tree every pair has one path; interior load of u = pairs separated by u
    dm = g.distance_matrix
    expect = np.zeros(g.n)
    for s, w in itertools.combinations(range(g.n), 2):
        for u in range(g.n):
            if u not in (s, w) and dm[s, u] + dm[u, w] == dm[s, w]:
                expect[u] += 1
    assert np.allclose(cert.interior, expect)


def test_uniform_family_on_cycle_is_symmetric():
    fam = uniform_geodesic_family(cycle_graph(6))
    assert np.allclose(fam.kappa, fam.kappa[0])


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_capacity_exact_matches_oracle(p):
    rng = np.random.default_rng(4)
    for g in [path_graph(4), cycle_graph(5), make_regular_tree(3, 1)]:
        mu = rng.integers(1, 4, g.n).astype(float)
        val, f = capacity_exact(g, mu, p, 0.2)
        assert val == pytest.approx(capacity_oracle(g, mu, p, 0.2), rel=1e-4, abs=1e-6)


@pytest.mark.parametrize("k", [1, 3, 10])
def test_capacity_k2_weighted(k):
    g = complete_graph(2)
    b = capacity_bounds(g, np.array([k, k], dtype=float), 1.0, 0.125)
    assert b.exact
    assert 2 * k * b.upper == pytest.approx(2 * k)


def test_capacity_alpha_range():
    with pytest.raises(ValueError):
        capacity_bounds(path_graph(3), None, 1.0, 0.25)


def test_capacity_heuristic_is_sound():
    g = make_zd_box(2, 3)
    exact = capacity_bounds(g, None, 1.0, 0.125, CapConfig(exact_threshold=10))
    approx = capacity_bounds(g, None, 1.0, 0.125, CapConfig(exact_threshold=4))
    assert approx.lower <= exact.upper * (1 + 1e-9) + 1e-12
    assert approx.upper >= exact.upper * (1 - 1e-9) - 1e-12


@pytest.mark.parametrize("make,lam", [(lambda: complete_graph(2), 2.0), (lambda: cycle_graph(4), 2.0),
                                      (lambda: path_graph(4), 2 - math.sqrt(2))])
def test_spectral_gap(make, lam):
    g = make()
    L = np.diag(g.degrees.astype(float))
    for a, b in g.edge_array:
        L[a, b] = L[b, a] = -1.0
    assert np.sort(np.linalg.eigvalsh(L))[1] == pytest.approx(lam)
    assert h2_spectral(g) == pytest.approx(lam)


def test_single_geodesic_congestion_examples():
    assert all_pairs_geodesic_family(complete_graph(2)).kappa.tolist() == [1.0]
    kp = all_pairs_geodesic_family(path_graph(4)).kappa
    assert sorted(kp.tolist()) == [3.0, 3.0, 4.0]
    assert all_pairs_geodesic_family(star_graph(3)).kappa.tolist() == [3.0, 3.0, 3.0]


def test_witness_examples():
    assert hp_upper_from_witness(complete_graph(2), 3.0, [1.0, -1.0]) == pytest.approx(2.0)
    two = WeightedGraph.build(["a", "b", "c", "d"], [("a", "b"), ("c", "d")])
    assert hp_ratio(two, [1.0, 1.0, -1.0, -1.0], 2.0) == 0.0
    assert hp_ratio(path_graph(4), [1.0, 1.0, -1.0, -1.0], 1.0) == pytest.approx(1.0)


def test_c4_multistart_matches_exact():
    g = cycle_graph(4)
    val, _ = exact_h1(g)
    b = hp_bounds(g, 1.0, HpConfig(exact_threshold=2, restarts=30))
    assert b.upper == pytest.approx(val, abs=1e-6)
