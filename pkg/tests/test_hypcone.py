from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from poincarelab.graphkit import WeightedGraph, cycle_graph, make_regular_tree, path_graph
from poincarelab.hypcone import (
    ModelSpace, boundary_metric_check, check_net, estimate_delta, gromov_product, make_cone, make_net,
)


def delta_oracle(g: WeightedGraph) -> float:
    """Four-point delta by direct enumeration of all quadruples."""
    d = g.distance_matrix
    best = 0.0
    for p, x, y, z in itertools.product(range(g.n), repeat=4):
        gxy = (d[p, x] + d[p, y] - d[x, y]) / 2
        gyz = (d[p, y] + d[p, z] - d[y, z]) / 2
        gxz = (d[p, x] + d[p, z] - d[x, z]) / 2
        best = max(best, min(gxy, gyz) - gxz)
    return best


def tripod(legs=(2, 3, 4)) -> WeightedGraph:
    verts, edges = ["c"], []
    for i, L in enumerate(legs):
        prev = "c"
        for j in range(1, L + 1):
            v = f"l{i}_{j}"
            verts.append(v)
            edges.append((prev, v))
            prev = v
    return WeightedGraph.build(verts, edges)


def test_interval_nets():
    I = ModelSpace("interval")
    assert len(make_net(I, 0)) == 1
    assert 3 <= len(make_net(I, 2)) <= 4


@pytest.mark.parametrize("kind", ["interval", "circle", "square", "cantor_middle_thirds"])
def test_nets_separated_and_maximal(kind):
    S = ModelSpace(kind)
    for t in range(4):
        net = make_net(S, t)
        rep = check_net(S, t, net, S.sample(S.required_budget(t)))
        assert rep["separated"] and rep["maximal"]


def test_square_net_growth():
    S = ModelSpace("square")
    ts = np.arange(2, 6)
    sizes = [len(make_net(S, int(t))) for t in ts]
    slope = np.polyfit(ts, np.log(sizes), 1)[0]
    assert abs(slope - 2.0) <= 0.25


def test_unknown_space():
    with pytest.raises(ValueError):
        ModelSpace("torus")


def test_cone_level_zero():
    c = make_cone(ModelSpace("interval"), 0)
    assert c.graph.m == 0 and c.graph.n == len(c.nets[0])


def test_cone_adjacency_rule():
    c = make_cone(ModelSpace("interval"), 4)
    g = c.graph
    edges = set(g.edges)
    for a, b in itertools.combinations(g.vertices, 2):
        ta, tb = c.vertex_level[a], c.vertex_level[b]
        rho = abs(float(c.vertex_center[a][0]) - float(c.vertex_center[b][0]))
        want = abs(ta - tb) <= 1 and rho <= math.exp(-ta) + math.exp(-tb)
        assert ((a, b) in edges or (b, a) in edges) == want


def test_circle_cone_connected():
    assert make_cone(ModelSpace("circle"), 5).graph.is_connected()


def test_gromov_product_examples():
    g = tripod()
    assert gromov_product(g, "l0_2", "l1_3", "l2_4") == Fraction(2)
    assert gromov_product(g, "c", "l1_2", "l1_2") == Fraction(2)
    p = path_graph(5)
    a, m, b = p.vertices[0], p.vertices[2], p.vertices[4]
    assert gromov_product(p, m, a, b) == 0


def test_tree_delta_zero():
    assert estimate_delta(make_regular_tree(3, 2)) == 0.0
    assert estimate_delta(tripod()) == 0.0


@pytest.mark.parametrize("n", [4, 5, 6])
def test_cycle_delta_matches_oracle(n):
    g = cycle_graph(n)
    val = estimate_delta(g)
    assert val > 0
    assert val == delta_oracle(g)


def test_sampled_delta_is_below_exhaustive():
    g = make_cone(ModelSpace("interval"), 4).graph
    exact = estimate_delta(g)
    sampled = estimate_delta(g.with_measure({v: 1 for v in g.vertices}), sample_quadruples=20_000, seed=1)
    assert sampled <= exact


def test_interval_cone_delta_stable():
    vals = [estimate_delta(make_cone(ModelSpace("interval"), T).graph) for T in (3, 4, 5)]
    # delta moves in steps of 1/2, so allow one quantum on top of 20 %
    assert max(vals) - min(vals) <= max(0.2 * max(vals), 0.5)


@pytest.mark.parametrize("kind", ["interval", "square"])
def test_boundary_metric_finite(kind):
    rep = boundary_metric_check(make_cone(ModelSpace(kind), 4))
    assert rep["pass"] and rep["pairs"] > 0 and math.isfinite(rep["spread"])
