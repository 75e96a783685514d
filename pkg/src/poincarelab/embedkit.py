"""Half-plane geometry, Busemann-compatible tree embeddings and the
Diestel-Leader inclusions into products of trees and horocyclic products."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graphkit import (
    DLDescriptor, TreeVertex, WeightedGraph, _bfs_ball, _dl_id, _induced_from_keys, dl_neighbors,
    tree_distance, tree_neighbors, tree_vertex_id,
)


@dataclass(frozen=True)
class HPoint:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not self.y > 0:
            raise ValueError("half-plane points need y > 0")


def h2_distance(p: HPoint, q: HPoint) -> float:
    return float(_h2(np.array([p.x]), np.array([p.y]), np.array([q.x]), np.array([q.y]))[0])


def _h2(x1, y1, x2, y2) -> np.ndarray:
    # arccosh(1 + r^2 / (2 y1 y2)) written as 2 asinh(r / (2 sqrt(y1 y2))) for accuracy
    r = np.hypot(x1 - x2, y1 - y2)
    return 2.0 * np.arcsinh(r / (2.0 * np.sqrt(y1 * y2)))


def busemann_h2(p: HPoint) -> float:
    return math.log(p.y)


def tree_busemann(w: TreeVertex, v: TreeVertex = (0, ())) -> int:
    """b(w) = d(v, m) - d(w, m), m the point where the rays from v and w to the end merge."""
    (hv, dv), (hw, dw) = v, w
    top = max(hv + len(dv), hw + len(dw), hv, hw)
    meet = max(hv, hw)
    for j in range(top - 1, meet - 1, -1):
        av = dv[j - hv] if 0 <= j - hv < len(dv) else 0
        aw = dw[j - hw] if 0 <= j - hw < len(dw) else 0
        if av != aw:
            meet = j + 1
            break
    return (meet - hv) - (meet - hw)


# ---------------------------------------------------------------------------
# Busemann-compatible embedding of the (m+1)-regular tree in the half-plane

@dataclass(eq=False)
class BCEmbedding:
    """Tree vertex (n, digits) maps to (a t^n, t^n) with a = sum digits[i] t^i.

    Points are stored exactly as (digits, n); ``t`` is a Fraction when
    rational so that digit sums are exact.
    """

    m: int
    t: Fraction | float
    depth: int
    graph: WeightedGraph
    vertices: list[TreeVertex]

    @property
    def alpha(self) -> float:
        return math.log(self.t)

    def digit_sum(self, z: TreeVertex):
        return sum(d * self.t ** i for i, d in enumerate(z[1]))

    def point(self, z: TreeVertex) -> HPoint:
        n = z[0]
        scale = self.t ** n
        return HPoint(float(self.digit_sum(z) * scale), float(scale))

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        pts = [self.point(z) for z in self.vertices]
        return np.array([p.x for p in pts]), np.array([p.y for p in pts])

    def busemann_exact(self) -> bool:
        """log(y) = alpha * b(z) holds exactly: y = t^n with n = b(z)."""
        return all(z[0] == tree_busemann(z) for z in self.vertices)

    def distinct(self) -> bool:
        keys = {(self.digit_sum(z), z[0]) for z in self.vertices}
        return len(keys) == len(self.vertices)


def _as_t(t) -> Fraction | float:
    if isinstance(t, (int, Fraction)):
        return Fraction(t)
    return float(t)


def build_bc_embedding(m: int, t, depth: int) -> BCEmbedding:
    """Ball of radius ``depth`` about (0, ()) in the (m+1)-regular tree, embedded in H^2."""
    if m < 2:
        raise ValueError("m must be >= 2")
    t = _as_t(t)
    if not t > m:
        raise ValueError("need t > m")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    base = (0, ())
    dist = _bfs_ball(base, lambda z: tree_neighbors(z, m), depth)
    verts = sorted(dist, key=lambda z: (z[0], z[1]))
    g = _induced_from_keys(verts, lambda z: tree_neighbors(z, m), tree_vertex_id,
                           lambda z: {"level": z[0], "digits": list(z[1])})
    order = sorted(verts, key=lambda z: g.index[tree_vertex_id(z)])
    return BCEmbedding(m, t, depth, g, order)


@dataclass
class DistortionReport:
    L_max: float
    L_min: float
    pairs: int
    degenerate: bool

    def to_json(self) -> dict:
        return {"L_max": self.L_max, "L_min": self.L_min, "pairs": self.pairs, "degenerate": self.degenerate}


def distortion(graph_dist: np.ndarray, target_dist, pair_budget: int = 10 ** 6, seed: int = 0) -> DistortionReport:
    """Extreme ratios d_target / d_graph over distinct pairs.

    ``target_dist(i, j)`` takes index arrays. Exhaustive when the pair
    count is within the budget, otherwise a seeded sample.
    """
    n = graph_dist.shape[0]
    total = n * (n - 1) // 2
    if total <= pair_budget:
        i, j = np.triu_indices(n, 1)
    else:
        rng = np.random.default_rng(seed)
        q = rng.integers(0, n, size=(pair_budget, 2))
        i, j = q[q[:, 0] != q[:, 1]].T
    dg = graph_dist[i, j].astype(float)
    ok = np.isfinite(dg)
    i, j, dg = i[ok], j[ok], dg[ok]
    ratio = np.asarray(target_dist(i, j), dtype=float) / dg
    if len(ratio) == 0:
        return DistortionReport(0.0, 0.0, 0, True)
    lmax, lmin = float(ratio.max()), float(ratio.min())
    return DistortionReport(lmax, lmin, int(len(ratio)), lmin <= 0.0)


def bc_distortion(emb: BCEmbedding, pair_budget: int = 10 ** 6, seed: int = 0) -> DistortionReport:
    x, y = emb.coords()
    return distortion(emb.graph.distance_matrix, lambda i, j: _h2(x[i], y[i], x[j], y[j]), pair_budget, seed)


# ---------------------------------------------------------------------------
# Diestel-Leader inclusions

DLVertex = tuple[TreeVertex, TreeVertex]


@dataclass(eq=False)
class DLCore:
    """Radius-k core of DL(2,2) with exact distances from a guarded ball."""

    k: int
    radius: int
    core: list[DLVertex]
    dist: np.ndarray                      # core x core graph distances
    certified: np.ndarray                 # pairs whose distance is exact
    norms: np.ndarray = field(repr=False, default=None)


def _dl_core(k: int, guard: int = 4) -> DLCore:
    desc = DLDescriptor(2, 2)
    base = ((0, ()), (0, ()))
    R = k + guard
    for attempt in range(2):
        dist0 = _bfs_ball(base, lambda v: dl_neighbors(v, desc), R)
        keys = sorted(dist0, key=_dl_id)
        g = _induced_from_keys(keys, lambda v: dl_neighbors(v, desc), _dl_id, lambda v: {})
        core = [v for v in keys if dist0[v] <= k]
        rows = np.array([g.index[_dl_id(v)] for v in core])
        from scipy.sparse.csgraph import shortest_path

        full = shortest_path(g.adjacency, unweighted=True, indices=rows)
        d = full[:, rows]
        norms = np.array([dist0[v] for v in core], dtype=float)
        # a geodesic of length d between u and v stays within radius (|u| + |v| + d) / 2
        need = (norms[:, None] + norms[None, :] + d) / 2
        cert = need <= R
        if cert.all() or attempt == 1:
            return DLCore(k, R, core, d, cert, norms)
        R = int(math.ceil(need[np.isfinite(need)].max())) + 1
    raise AssertionError("unreachable")


def dl_inclusion_check(k: int) -> dict:
    """Exact check of d_TxT <= 2 d_DL and d_DL <= 2 d_TxT on the radius-k core (L1 product metric)."""
    if not 0 <= k <= 8:
        raise ValueError("k must lie in [0, 8]")
    core = _dl_core(k)
    n = len(core.core)
    dt = np.zeros((n, n))
    for a in range(n):
        xa, ya = core.core[a]
        for b in range(a + 1, n):
            xb, yb = core.core[b]
            dt[a, b] = dt[b, a] = tree_distance(xa, xb) + tree_distance(ya, yb)
    mask = core.certified & ~np.eye(n, dtype=bool)
    dd = core.dist
    lip = bool(np.all(dt[mask] <= 2 * dd[mask]))
    co = bool(np.all(dd[mask] <= 2 * dt[mask]))
    ratios = dt[mask] / dd[mask] if mask.any() else np.array([1.0])
    return {"k": k, "core": n, "guard_radius": core.radius, "pairs": int(mask.sum() // 2),
            "unverified_pairs": int((~core.certified).sum() // 2),
            "lipschitz_2": lip, "co_lipschitz_2": co,
            "ratio_min": float(ratios.min()), "ratio_max": float(ratios.max()),
            "pass": bool(lip and co and core.certified.all())}


def horocyclic_embed_dl(k: int, m: int = 2, t=3, depth: int | None = None, t2=None) -> dict:
    """DL(2,2) core -> S_alpha(H^2, H^2) through coordinatewise Busemann-compatible maps.

    Vertex (x, y) goes to (phi_1(x), phi_2(y)); alpha = log t / log t2.
    The height equation log y_1 + alpha log y_2 = 0 reduces to
    h(x) + h(y) = 0 in exponent space and is checked exactly.
    """
    if m != 2:
        raise ValueError("DL(2,2) uses m = 2")
    t1 = _as_t(t)
    t2 = _as_t(t if t2 is None else t2)
    if not (t1 > 2 and t2 > 2):
        raise ValueError("need t > 2")
    core = _dl_core(k)
    heights_ok = all(x[0] + y[0] == 0 and tree_busemann(x) + tree_busemann(y) == 0 for x, y in core.core)
    if not heights_ok:
        raise AssertionError("height equation violated")
    alpha = math.log(t1) / math.log(t2)

    def place(z: TreeVertex, tt):
        a = sum(d * tt ** i for i, d in enumerate(z[1]))
        s = tt ** z[0]
        return float(a * s), float(s)

    p1 = np.array([place(x, t1) for x, _ in core.core])
    p2 = np.array([place(y, t2) for _, y in core.core])
    resid = max(abs(math.log(a) + alpha * math.log(b)) for a, b in zip(p1[:, 1], p2[:, 1]))

    def target(i, j):
        return (_h2(p1[i, 0], p1[i, 1], p1[j, 0], p1[j, 1])
                + _h2(p2[i, 0], p2[i, 1], p2[j, 0], p2[j, 1]))

    dd = np.where(core.certified, core.dist, np.inf)
    rep = distortion(dd, target)
    base = core.core.index(((0, ()), (0, ())))
    return {"k": k, "t": float(t1), "t2": float(t2), "alpha": alpha, "core": len(core.core),
            "height_equation_exact": heights_ok, "height_residual_float": resid,
            "basepoint_image": [p1[base].tolist(), p2[base].tolist()],
            "map": {_dl_id(v): [p1[i].tolist(), p2[i].tolist()] for i, v in enumerate(core.core)},
            **rep.to_json()}
