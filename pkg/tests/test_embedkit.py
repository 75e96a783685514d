from __future__ import annotations

import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from poincarelab.embedkit import (
    HPoint, _dl_core, bc_distortion, build_bc_embedding, busemann_h2, distortion, dl_inclusion_check,
    h2_distance, horocyclic_embed_dl, tree_busemann,
)
from poincarelab.graphkit import (
    DLDescriptor, _bfs_ball, _dl_id, make_dl_ball, path_graph, tree_distance, tree_neighbors,
)


def busemann_oracle(ws, v=(0, ()), m: int = 2, far: int = 6) -> dict:
    """d(v, r) - d(w, r) by BFS in a finite tree ball, r the ray point at height ``far``."""
    dist = _bfs_ball((far, ()), lambda z: tree_neighbors(z, m), far + 5)
    return {w: dist[v] - dist[w] for w in ws}


def test_h2_distance_examples():
    p = HPoint(0.3, 0.7)
    assert h2_distance(p, p) == 0.0
    assert h2_distance(HPoint(0, 1), HPoint(0, math.e)) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = HPoint(rng.normal(), rng.uniform(0.1, 3))
        b = HPoint(rng.normal(), rng.uniform(0.1, 3))
        assert h2_distance(a, b) == pytest.approx(h2_distance(b, a))
        ref = math.acosh(1 + ((a.x - b.x) ** 2 + (a.y - b.y) ** 2) / (2 * a.y * b.y))
        assert h2_distance(a, b) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_h2_rejects_lower_half():
    with pytest.raises(ValueError):
        HPoint(0, 0)


def test_busemann_h2():
    assert busemann_h2(HPoint(0, 1)) == 0.0
    assert busemann_h2(HPoint(5, 1)) == 0.0
    assert busemann_h2(HPoint(0, math.e ** 3)) == pytest.approx(3.0)


def test_tree_busemann_examples():
    assert tree_busemann((0, ())) == 0
    assert tree_busemann((3, ())) == 3
    assert tree_busemann((-1, (1,))) == -1


def test_tree_busemann_matches_bfs():
    verts = _bfs_ball((0, ()), lambda z: tree_neighbors(z, 2), 4)
    oracle = busemann_oracle(verts)
    assert {w: tree_busemann(w) for w in verts} == oracle


@pytest.mark.parametrize("depth", range(0, 9))
def test_bc_busemann_exact(depth):
    emb = build_bc_embedding(2, 3, depth)
    assert emb.busemann_exact()
    assert emb.distinct()
    for z in emb.vertices:
        y = Fraction(3) ** z[0]
        assert Fraction(emb.point(z).y).limit_denominator(10 ** 12) == y


def test_bc_depth_zero():
    emb = build_bc_embedding(2, 3, 0)
    assert emb.point(emb.vertices[0]) == HPoint(0.0, 1.0)


def test_bc_level_zero_digit_sums():
    emb = build_bc_embedding(2, 3, 4)
    sums = sorted(emb.digit_sum(z) for z in emb.vertices if z[0] == 0)
    assert len(set(sums)) == len(sums)
    assert sums == [0, 1, 3, 4]


def test_bc_parameter_checks():
    with pytest.raises(ValueError):
        build_bc_embedding(2, 2, 3)
    with pytest.raises(ValueError):
        build_bc_embedding(1, 3, 3)


def test_distortion_identity_and_collapse():
    g = path_graph(6)
    d = g.distance_matrix
    rep = distortion(d, lambda i, j: d[i, j])
    assert (rep.L_max, rep.L_min) == (1.0, 1.0)
    rep = distortion(d, lambda i, j: np.zeros(len(i)))
    assert rep.L_max == 0.0 and rep.degenerate


def test_bc_distortion_stable():
    a = bc_distortion(build_bc_embedding(2, 3, 4))
    b = bc_distortion(build_bc_embedding(2, 3, 6))
    for x, y in ((a.L_max, b.L_max), (a.L_min, b.L_min)):
        assert math.isfinite(x) and x > 0
        assert abs(x - y) <= 0.2 * max(x, y)


def test_dl_core_distances_match_bfs():
    core = _dl_core(2)
    g = make_dl_ball(DLDescriptor(2, 2), 8)
    G = nx.Graph(list(g.edges))
    ids = [_dl_id(v) for v in core.core]
    for a, u in enumerate(ids):
        lengths = nx.single_source_shortest_path_length(G, u)
        for b, w in enumerate(ids):
            assert core.dist[a, b] == lengths[w]


@pytest.mark.parametrize("k", [1, 2, 4])
def test_dl_inclusion(k):
    rep = dl_inclusion_check(k)
    assert rep["pass"] and rep["unverified_pairs"] == 0
    assert 0.5 <= rep["ratio_min"] <= rep["ratio_max"] <= 2.0


def test_dl_product_metric_additive():
    core = _dl_core(1)
    base = core.core.index(((0, ()), (0, ())))
    for i, (x, y) in enumerate(core.core):
        dt = tree_distance((0, ()), x) + tree_distance((0, ()), y)
        assert dt <= 2 * core.dist[base, i] and core.dist[base, i] <= 2 * dt


def test_horocyclic_basepoint_and_heights():
    rep = horocyclic_embed_dl(3)
    assert rep["basepoint_image"] == [[0.0, 1.0], [0.0, 1.0]]
    assert rep["height_equation_exact"]
    assert rep["height_residual_float"] < 1e-9


def test_horocyclic_distortion_stable():
    reps = [horocyclic_embed_dl(k) for k in (3, 4, 5)]
    for key in ("L_max", "L_min"):
        vals = [r[key] for r in reps]
        assert all(math.isfinite(v) and v > 0 for v in vals)
        assert max(vals) <= 1.25 * min(vals)
