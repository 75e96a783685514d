"""Explicit constructions: the Gamma_k path family, product bounds,
projections, grid colorings and capacity witnesses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Any, Iterator

import numpy as np

from .graphkit import (
    WeightedGraph, _descendants, _dl_id, induced_subgraph, make_dl_gamma_k,
)
from .poincare import (
    BoundInterval, CapConfig, HpConfig, PathFamily, capacity_bounds, capacity_exact,
    capacity_of_function, congestion_lower_bound, gradient, hp_bounds, measure_array,
)


# ---------------------------------------------------------------------------
# Gamma_k path family

@dataclass(eq=False)
class GammaKFamily:
    """Up-down-up path family on Gamma_k.

    For (x,y) at level t and (x',y') at level s <= t, the paths are
    (x,y) up to (o1,z'), down to (z,o2), up to (x',y'); z' ranges over the
    depth-k descendants of y and z over the height-0 descendants of x'.
    Vertex (x,y) at level t is stored as (ix, iy): ix indexes the height-t
    descendants of o1 and iy the depth-t descendants of o2, both in
    block order so that ancestors are obtained by right shifts.
    """

    k: int
    graph: WeightedGraph
    vid: list[np.ndarray]                        # vid[t][ix, iy] -> vertex index
    seg1: list[np.ndarray]                       # seg1[t][ix, jz] -> path (k-t+1)
    seg2: np.ndarray                             # seg2[jz, jw] -> path (k+1)
    seg3: list[np.ndarray]                       # seg3[s][jw, iy'] -> path (s+1)
    overrides: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.graph.n

    def pair_count(self, t: int, s: int) -> int:
        return 2 ** (self.k - t + s)

    def path_length(self, t: int, s: int) -> int:
        return 2 * self.k - t + s

    def block(self, t: int, s: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All paths for ordered pairs (level t, level s), t >= s.

        Returns (paths, v, w): paths has shape (N, 2k-t+s+1); v, w are the
        endpoint vertex indices of each row.
        """
        k = self.k
        ix, iy, a, ixp, iyp, b = np.meshgrid(
            np.arange(2 ** (k - t)), np.arange(2 ** t), np.arange(2 ** (k - t)),
            np.arange(2 ** (k - s)), np.arange(2 ** s), np.arange(2 ** s), indexing="ij")
        ix, iy, a, ixp, iyp, b = (x.ravel() for x in (ix, iy, a, ixp, iyp, b))
        jz = iy * 2 ** (k - t) + a
        jw = ixp * 2 ** s + b
        paths = np.concatenate([self.seg1[t][ix, jz], self.seg2[jz, jw][:, 1:], self.seg3[s][jw, iyp][:, 1:]], axis=1)
        for (tt, ss, row), new in self.overrides.items():
            if (tt, ss) == (t, s):
                paths = paths.astype(np.int64, copy=True)
                if len(new) > paths.shape[1]:
                    raise ValueError("override must not lengthen the path")
                if len(new) < paths.shape[1]:
                    new = np.concatenate([new, np.full(paths.shape[1] - len(new), -1)])
                paths[row] = new
        return paths, self.vid[t][ix, iy], self.vid[s][ixp, iyp]

    def tampered(self, t: int, s: int, row: int, new_path) -> "GammaKFamily":
        ov = dict(self.overrides)
        ov[(t, s, row)] = np.asarray(new_path, dtype=np.int64)
        return GammaKFamily(self.k, self.graph, self.vid, self.seg1, self.seg2, self.seg3, ov)

    def level_pairs(self) -> Iterator[tuple[int, int]]:
        for t in range(self.k + 1):
            for s in range(t + 1):
                yield t, s

    # -- loads from the segment decomposition --------------------------
    def _segment_incidence(self, segs: np.ndarray, weight: float) -> np.ndarray:
        flat = segs.reshape(-1, segs.shape[-1])
        if flat.shape[1] < 2:
            return np.zeros(self.graph.m)
        ids = edge_ids(self.graph, flat[:, :-1].ravel(), flat[:, 1:].ravel())
        return weight * np.bincount(ids, minlength=self.graph.m).astype(float)

    def incidence(self, t: int, s: int) -> np.ndarray:
        """N_e(t,s): edge incidences of all paths of block (t,s), by segment counts.

        A first segment (x, z') is shared by 2^k * 2^s paths (any w, any z),
        a middle segment (z', z) by 2^(k-t) * 2^s, a last one (z, y') by
        2^k * 2^(k-t).
        """
        k = self.k
        out = self._segment_incidence(self.seg1[t], 2.0 ** (k + s))
        out += self._segment_incidence(self.seg2, 2.0 ** (k - t + s))
        out += self._segment_incidence(self.seg3[s], 2.0 ** (2 * k - t))
        return out

    def load(self, expo: float = 0.0) -> np.ndarray:
        """Per-edge unordered-pair load: sum over pairs of avg_path len^expo * uses."""
        total = np.zeros(self.graph.m)
        for t, s in self.level_pairs():
            w = self.path_length(t, s) ** expo / self.pair_count(t, s)
            if t == s:
                w /= 2.0  # both orders of a same-level pair carry a family
            total += w * self.incidence(t, s)
        return total

    def as_path_family(self) -> PathFamily:
        return PathFamily(self.graph, "gamma_k_updown", self.load, None, complete=True)


def edge_ids(g: WeightedGraph, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Edge rows for vertex pairs; raises if some pair is not an edge."""
    n = g.n
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    keys = lo * n + hi
    e = g.edge_array
    ekeys = e[:, 0] * n + e[:, 1]
    pos = np.searchsorted(ekeys, keys)
    pos = np.minimum(pos, len(ekeys) - 1)
    bad = (ekeys[pos] != keys) | (u < 0) | (v < 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"step ({int(u[i])}, {int(v[i])}) is not an edge")
    return pos


def build_gamma_k_family(k: int) -> GammaKFamily:
    g = make_dl_gamma_k(k)
    idx = g.index
    o1, o2 = (k, ()), (0, ())
    xs = [_descendants(o1, k - t, 2) for t in range(k + 1)]   # xs[t]: height t
    ys = [_descendants(o2, t, 2) for t in range(k + 1)]       # ys[t]: depth t
    vid = []
    for t in range(k + 1):
        arr = np.empty((len(xs[t]), len(ys[t])), dtype=np.int64)
        for i, x in enumerate(xs[t]):
            for j, y in enumerate(ys[t]):
                arr[i, j] = idx[_dl_id((x, y))]
        vid.append(arr)
    K = 2 ** k
    seg1 = []
    for t in range(k + 1):
        ix = np.arange(2 ** (k - t))[:, None, None]
        jz = np.arange(K)[None, :, None]
        i = np.arange(k - t + 1)[None, None, :]
        lev = t + i
        seg1.append(_gather(vid, lev, ix >> i, jz >> (k - lev)))
    jz = np.arange(K)[:, None, None]
    jw = np.arange(K)[None, :, None]
    i = np.arange(k + 1)[None, None, :]
    lev = k - i
    seg2 = _gather(vid, lev, jw >> lev, jz >> i)
    seg3 = []
    for s in range(k + 1):
        jw = np.arange(K)[:, None, None]
        iyp = np.arange(2 ** s)[None, :, None]
        i = np.arange(s + 1)[None, None, :]
        seg3.append(_gather(vid, i, jw >> i, iyp >> (s - i)))
    return GammaKFamily(k, g, vid, seg1, seg2, seg3)


def _gather(vid: list[np.ndarray], lev, a, b) -> np.ndarray:
    lev, a, b = np.broadcast_arrays(lev, a, b)
    out = np.empty(lev.shape, dtype=np.int64)
    for t in np.unique(lev):
        m = lev == t
        out[m] = vid[int(t)][a[m], b[m]]
    return out


def verify_gamma_claims(fam: GammaKFamily, materialize: bool | None = None, max_violations: int = 20) -> dict:
    """Exact checks of the vertex count, path counts/lengths/shape and the
    per-edge incidence bound; plus the congestion lower bound on h^1."""
    k, g = fam.k, fam.graph
    if materialize is None:
        materialize = k <= 6
    report: dict[str, Any] = {"k": k, "n": g.n, "violations": []}
    viol = report["violations"]

    def flag(kind, **info):
        if len(viol) < max_violations:
            viol.append({"kind": kind, **info})

    levels = np.array([g.labels[v]["level"] for v in g.vertices])
    claim1 = g.n == (k + 1) * 2 ** k and all(int(np.sum(levels == t)) == 2 ** k for t in range(k + 1))
    if not claim1:
        flag("claim1", n=g.n, expected=(k + 1) * 2 ** k)
    report["claim1"] = claim1

    worst = 0.0
    claim2 = True
    paths_ok = True
    for t, s in fam.level_pairs():
        bound = 2 ** (2 * k - t + s)
        if materialize:
            paths, v, w = fam.block(t, s)
            L = fam.path_length(t, s)
            if paths.shape[1] != L + 1:
                paths_ok = False
                flag("length", t=t, s=s)
            if np.any(paths[:, 0] != v) or np.any(paths[:, -1] != w):
                paths_ok = False
                flag("endpoints", t=t, s=s)
            u, x = paths[:, :-1].ravel(), paths[:, 1:].ravel()
            valid = np.ones(len(u), dtype=bool)
            n = g.n
            ekeys = g.edge_array[:, 0] * n + g.edge_array[:, 1]
            keys = np.minimum(u, x) * n + np.maximum(u, x)
            pos = np.minimum(np.searchsorted(ekeys, keys), len(ekeys) - 1)
            valid = (ekeys[pos] == keys) & (u >= 0) & (x >= 0)
            if not np.all(valid):
                paths_ok = False
                row = int(np.flatnonzero(~valid)[0]) // (paths.shape[1] - 1)
                flag("invalid_walk", t=t, s=s, row=row)
            inc = np.bincount(pos[valid], minlength=g.m).astype(float)
            # shape: up (k - t), down (k), up (s) in the level coordinate
            lv = levels[np.clip(paths, 0, g.n - 1)]
            steps = np.diff(lv, axis=1)
            expect = np.concatenate([np.ones(k - t), -np.ones(k), np.ones(s)])
            if steps.shape[1] != len(expect) or np.any(steps != expect):
                paths_ok = False
                bad = np.flatnonzero(np.any(steps != expect, axis=1)) if steps.shape[1] == len(expect) else [0]
                flag("shape", t=t, s=s, row=int(bad[0]))
            # per pair: exactly 2^(k-t+s) distinct paths
            per = fam.pair_count(t, s)
            pair_key = v * g.n + w
            order = np.lexsort(paths.T[::-1])
            uniq = np.unique(np.concatenate([pair_key[:, None], paths], axis=1)[order], axis=0)
            _, counts = np.unique(uniq[:, 0], return_counts=True)
            if np.any(counts != per) or len(counts) != 4 ** k:
                paths_ok = False
                flag("pair_count", t=t, s=s, expected=per)
            if not fam.overrides and not np.array_equal(inc, fam.incidence(t, s)):
                paths_ok = False
                flag("decomposition_mismatch", t=t, s=s)
        else:
            inc = fam.incidence(t, s)
        mx = float(inc.max())
        worst = max(worst, mx / bound)
        if mx > bound:
            claim2 = False
            e = int(np.argmax(inc))
            a, b = g.edge_array[e]
            flag("claim2", t=t, s=s, edge=[g.vertices[a], g.vertices[b]], count=mx, bound=bound)
    report["paths_ok"] = paths_ok
    report["claim2"] = claim2
    report["claim2_max_fraction"] = worst
    pf = fam.as_path_family()
    lower = congestion_lower_bound(g, pf, 1.0)
    report["h1_lower"] = lower
    report["c"] = lower * k
    report["kappa_max"] = pf.kappa_max(1.0)
    report["claim3"] = lower > 0
    report["pass"] = bool(claim1 and claim2 and paths_ok and lower > 0)
    return report


def gamma_k_h1_bounds(k: int, config: HpConfig | None = None) -> BoundInterval:
    """h^1(Gamma_k): best of the up-down-up certificate and generic bounds."""
    fam = build_gamma_k_family(k)
    g = fam.graph
    cfg = config or HpConfig(restarts=20, large_restarts=4)
    b = hp_bounds(g, 1.0, cfg)
    lo = congestion_lower_bound(g, fam.as_path_family(), 1.0)
    if lo > b.lower and not b.exact:
        b = BoundInterval(lo, b.upper, "congestion_gamma_k_updown", b.upper_method,
                          {"kappa_max": fam.as_path_family().kappa_max(1.0)}, b.upper_witness, False)
    return b


# ---------------------------------------------------------------------------
# products and projections

def product_lower_check(A: WeightedGraph, B: WeightedGraph, p: float, config: HpConfig | None = None) -> dict:
    """rho = h^p(AxB) / min(h^p(A), h^p(B)) using lower/upper endpoints."""
    from .graphkit import product

    for g in (A, B):
        if not g.is_connected():
            raise ValueError("inputs must be connected")
    cfg = config or HpConfig(restarts=30)
    AB = product(A, B)
    num = hp_bounds(AB, p, cfg)
    ha, hb = hp_bounds(A, p, cfg), hp_bounds(B, p, cfg)
    den = min(ha.upper, hb.upper)
    rho = num.lower / den
    return {"p": p, "nA": A.n, "nB": B.n, "h_product_lower": num.lower, "h_product_upper": num.upper,
            "h_A": [ha.lower, ha.upper], "h_B": [hb.lower, hb.upper], "rho": rho, "pass": rho > 0}


def projection_pushforward(gamma: WeightedGraph, coordinate: str = "g") -> WeightedGraph:
    """Projection of a subgraph of a product onto one factor with the pushed-forward measure.

    Edges of the image are the images of edges of ``gamma`` whose
    projected coordinates differ.
    """
    other = "h" if coordinate == "g" else "g"
    proj = {}
    for v in gamma.vertices:
        lab = gamma.labels.get(v)
        if not isinstance(lab, dict) or coordinate not in lab or other not in lab:
            raise ValueError(f"vertex {v!r} lacks product labels")
        proj[v] = str(lab[coordinate])
    mu: dict[str, Any] = {}
    for v in gamma.vertices:
        mu[proj[v]] = mu.get(proj[v], 0) + gamma.measure[v]
    edges = {(proj[a], proj[b]) for a, b in gamma.edges if proj[a] != proj[b]}
    return WeightedGraph.build(sorted(mu), edges, mu)


# ---------------------------------------------------------------------------
# grid colorings

@dataclass
class ANColoring:
    """2^d parity classes of axis-aligned cells of side ``side`` in a box."""

    R: int
    side: int
    dims: tuple[int, ...]
    cells: dict[tuple[int, ...], list[tuple[int, ...]]]   # cell -> points
    color: dict[tuple[int, ...], tuple[int, ...]]         # cell -> parity

    @property
    def classes(self) -> dict[tuple[int, ...], list[tuple[int, ...]]]:
        out: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
        for c in sorted(self.cells):
            out.setdefault(self.color[c], []).append(c)
        return out

    def cell_of(self, point) -> tuple[int, ...]:
        return tuple(int(x) // self.side for x in point)

    def cell_bounds(self, c) -> list[tuple[int, int]]:
        pts = np.array(self.cells[c])
        return list(zip(pts.min(axis=0).tolist(), pts.max(axis=0).tolist()))

    def min_separation(self) -> int:
        """Smallest l1 distance between distinct same-class cells (exact)."""
        best = math.inf
        for cls in self.classes.values():
            bounds = [self.cell_bounds(c) for c in cls]
            for i in range(len(bounds)):
                for j in range(i + 1, len(bounds)):
                    d = sum(max(0, b1[0] - b2[1], b2[0] - b1[1]) for b1, b2 in zip(bounds[i], bounds[j]))
                    best = min(best, d)
        return best

    def max_diameter(self) -> int:
        return max(sum(hi - lo for lo, hi in self.cell_bounds(c)) for c in self.cells)

    def verify(self) -> dict:
        pts = [p for c in self.cells for p in self.cells[c]]
        total = int(np.prod(self.dims))
        cover = len(pts) == total and len(set(pts)) == total
        sep = self.min_separation()
        diam = self.max_diameter()
        return {"cover": cover, "separation": sep, "diameter": diam, "classes": len(self.classes),
                "pass": bool(cover and sep >= self.side and diam <= len(self.dims) * self.side)}


def an_grid_coloring(dims, R: int) -> ANColoring:
    """Color the box prod(range(dims)) by cell parity at scale R (cells of side max(1, R//2))."""
    if R < 2:
        raise ValueError("scale R must be >= 2")
    dims = tuple(int(x) for x in dims)
    side = max(1, R // 2)
    cells: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    for pt in iproduct(*(range(x) for x in dims)):
        c = tuple(x // side for x in pt)
        cells.setdefault(c, []).append(pt)
    color = {c: tuple(x % 2 for x in c) for c in cells}
    return ANColoring(R, side, dims, cells, color)


def inverse_growth(Y: WeightedGraph, k: int) -> int:
    """kappa(k) = min{t : some ball B(y, t) of Y has more than k vertices}."""
    dm = Y.distance_matrix
    if k >= Y.n:
        raise ValueError("k must be smaller than |Y|")
    finite = np.where(np.isfinite(dm), dm, np.inf)
    t = 0
    while True:
        if int(np.max(np.sum(finite <= t, axis=1))) > k:
            return t
        t += 1


# ---------------------------------------------------------------------------
# product upper-bound construction

@dataclass
class ProductCandidate:
    case: str
    function: np.ndarray | None
    bound: float
    admissible: bool
    alpha_level: float
    kappa: int
    k: int
    details: dict


def product_upper_candidate(gamma: WeightedGraph, X: WeightedGraph, Y: WeightedGraph, p: float,
                            alpha: float, k: int, threshold: float | None = None,
                            nu_scale: float = 1.0) -> ProductCandidate:
    """Capacity upper bound for a subgraph of X x Y with Y a Z^d box.

    Returns a function admissible at level alpha/2 (checked exactly) and the
    bound mu(G)^(-1/p) ||grad F||_p it certifies for C^{p,alpha/2}(gamma, #).
    ``nu_scale`` rescales the weight ramp (used for mutation tests).
    """
    m = gamma.n
    if not 1 <= k < Y.n:
        raise ValueError("need 1 <= k < |Y|")
    coords = {}
    for y in Y.vertices:
        lab = Y.labels.get(y)
        if not isinstance(lab, dict) or "coords" not in lab:
            raise ValueError("Y must carry box coordinates")
        coords[y] = tuple(lab["coords"])
    d = len(next(iter(coords.values())))
    dims = tuple(max(c[i] for c in coords.values()) + 1 for i in range(d))
    kap = inverse_growth(Y, k)
    col = an_grid_coloring(dims, max(2, kap))
    yid = [str(gamma.labels[v]["h"]) for v in gamma.vertices]
    xid = [str(gamma.labels[v]["g"]) for v in gamma.vertices]
    ycell = [col.cell_of(coords[y]) for y in yid]
    # weights of cells and classes
    cell_w: dict[tuple[int, ...], int] = {}
    for c in ycell:
        cell_w[c] = cell_w.get(c, 0) + 1
    class_w: dict[tuple[int, ...], int] = {}
    for c, w in cell_w.items():
        class_w[col.color[c]] = class_w.get(col.color[c], 0) + w
    v0 = max(sorted(class_w), key=lambda cl: class_w[cl])
    v0_cells = sorted(c for c in cell_w if col.color[c] == v0)
    if threshold is None:
        threshold = m / (4 * (d + 1)) if 3 * 2 ** d <= 4 * (d + 1) else m / (4 * 2 ** d)
    heavy = [c for c in v0_cells if cell_w[c] >= threshold]
    mu = np.ones(m)
    target = alpha / 2
    ydist_cache: dict[frozenset, dict[str, int]] = {}

    def ydist(cells: list[tuple[int, ...]]) -> np.ndarray:
        """l1 distance in Y from each gamma vertex's y to the union of cells."""
        key = frozenset(cells)
        if key not in ydist_cache:
            pts = np.array([p for c in cells for p in col.cells[c]])
            out = {}
            for y, cy in coords.items():
                out[y] = int(np.min(np.abs(pts - np.array(cy)).sum(axis=1)))
            ydist_cache[key] = out
        dd = ydist_cache[key]
        return np.array([dd[y] for y in yid], dtype=float)

    details: dict[str, Any] = {"threshold": threshold, "kappa": kap, "side": col.side,
                               "v0_weight": class_w[v0], "k_in_range": k <= m / (100 * d)}
    def case_b(info: dict) -> ProductCandidate:
        """Split V0 into two contiguous groups of cells and ramp between them."""
        sep = col.side + 1
        best = None
        for axis in range(d):
            order = sorted(v0_cells, key=lambda c: (c[axis], c))
            for cut in range(1, len(order)):
                v0p = order[:cut]
                w0 = sum(cell_w[c] for c in v0p)
                w1 = sum(cell_w[c] for c in order[cut:])
                if w0 < target * m or w1 < target * m:
                    continue
                F = np.minimum(1.0, ydist(v0p) / (sep * nu_scale))
                val, ok = capacity_of_function(gamma, mu, p, target, F)
                if ok and (best is None or val < best[0]):
                    best = (val, F, axis, cut)
        if best is None:
            return ProductCandidate("b", None, math.inf, False, target, kap, k,
                                    {**info, "reason": "no admissible split of V0"})
        val, F, axis, cut = best
        return ProductCandidate("b", F, val, True, target, kap, k, {**info, "axis": axis, "cut": cut})

    if not heavy:
        return case_b(details)

    # case (a): a heavy cell U
    U = max(heavy, key=lambda c: (cell_w[c], tuple(-x for x in c)))
    du = ydist([U])
    nu = np.maximum(0.0, 1.0 - 2.0 * du / (kap * nu_scale))
    near = np.flatnonzero(du <= kap / 2)
    sub_ids = [gamma.vertices[i] for i in near]
    sub = induced_subgraph(gamma, sub_ids)
    sub = sub.with_measure({v: float(nu[gamma.index[v]]) for v in sub.vertices})
    gx = projection_pushforward(sub, "g")
    mux = gx.mu
    total_x = float(mux.sum())
    alpha_g = alpha * m / total_x
    details.update(U=list(U), mu_X=total_x, alpha_g=alpha_g, n_X=gx.n)
    # outside the admissible parameter range case (a) cannot certify; the split of case (b) still can
    if alpha_g >= 0.25:
        return case_b({**details, "fallback_from_a": "alpha too large for the projected weight"})
    try:
        cb = capacity_bounds(gx, mux, p, alpha_g, CapConfig(exact_threshold=10))
    except ValueError as exc:
        return case_b({**details, "fallback_from_a": str(exc)})
    gfun = np.array([cb.upper_witness["function"][x] for x in gx.vertices])
    gval = dict(zip(gx.vertices, gfun))
    gcomp = np.array([gval.get(x, 0.0) for x in xid])
    G = gcomp * np.minimum(1.0, 2.0 * nu / alpha) ** (1.0 + 1.0 / p)
    val, ok = capacity_of_function(gamma, mu, p, target, G)
    details["g_capacity"] = cb.upper
    if not ok:
        fb = case_b({**details, "fallback_from_a": "case (a) function not admissible"})
        if fb.admissible:
            return fb
    return ProductCandidate("a", G, val, ok, target, kap, k, details)


# ---------------------------------------------------------------------------
# tree median witness

def tree_median_capacity(gamma: WeightedGraph, mu=None, p: float = 1.0, alpha: float = 0.25) -> dict:
    """Characteristic-function witness at a median vertex of a weighted subtree."""
    if alpha > 0.25:
        raise ValueError("alpha must be at most 1/4")
    mu = measure_array(gamma, mu)
    total = float(mu.sum())
    if gamma.m != gamma.n - 1 or not gamma.is_connected():
        raise ValueError("gamma must be a tree")
    if float(mu.max()) > total / 4 + 1e-12:
        raise ValueError("an atom exceeds a quarter of the total measure")
    nbrs = gamma.neighbors
    # rooted subtree weights
    root = 0
    parent = -np.ones(gamma.n, dtype=np.int64)
    order = [root]
    seen = {root}
    for v in order:
        for w in nbrs[v]:
            w = int(w)
            if w not in seen:
                seen.add(w)
                parent[w] = v
                order.append(w)
    sub = mu.copy()
    for v in reversed(order[1:]):
        sub[parent[v]] += sub[v]

    def comps(v):
        out = []
        for w in nbrs[v]:
            w = int(w)
            if parent[w] == v:
                out.append((w, float(sub[w]), True))
            else:
                out.append((w, total - float(sub[v]), False))
        return out

    median = None
    for v in order:
        if all(c[1] <= total / 2 + 1e-12 for c in comps(v)):
            median = v
            break
    cands = [c for c in comps(median) if c[1] >= total / 4 - 1e-12]
    if not cands:
        raise ValueError("no component carries a quarter of the measure")
    vp, weight, below = min(cands, key=lambda c: (c[0]))
    f = np.zeros(gamma.n)
    if below:
        stack = [vp]
        while stack:
            x = stack.pop()
            f[x] = 1.0
            stack.extend(int(w) for w in nbrs[x] if parent[w] == x)
    else:
        f[:] = 1.0
        stack = [median]
        while stack:
            x = stack.pop()
            f[x] = 0.0
            stack.extend(int(w) for w in nbrs[x] if parent[w] == x)
    grad_p = float(np.sum(mu * gradient(gamma, f) ** p))
    val, ok = capacity_of_function(gamma, mu, p, alpha, f)
    bound = (2 * float(mu.max()) / total) ** (1.0 / p)
    return {"median": gamma.vertices[median], "neighbor": gamma.vertices[vp], "function": f,
            "grad_p": grad_p, "edge_mass": float(mu[median] + mu[vp]), "value": val,
            "admissible": ok, "bound": bound, "pass": bool(ok and val <= bound + 1e-12)}


# ---------------------------------------------------------------------------
# corpus checks

def projection_check(gamma: WeightedGraph, p: float, alpha: float) -> dict:
    """C(gamma, #) <= C(pi(gamma), pi_* #), both exactly."""
    proj = projection_pushforward(gamma, "g")
    c1, _ = capacity_exact(gamma, gamma.mu, p, alpha)
    c2, _ = capacity_exact(proj, proj.mu, p, alpha)
    return {"n": gamma.n, "n_proj": proj.n, "cap": c1, "cap_proj": c2, "pass": c1 <= c2 + 1e-7}


def random_connected_subset(g: WeightedGraph, size: int, rng: np.random.Generator) -> WeightedGraph:
    """Induced subgraph on a connected vertex set grown from a random start."""
    nbrs = g.neighbors
    chosen = {int(rng.integers(g.n))}
    while len(chosen) < min(size, g.n):
        frontier = sorted({int(w) for v in chosen for w in nbrs[v]} - chosen)
        if not frontier:
            break
        chosen.add(int(rng.choice(frontier)))
    return induced_subgraph(g, [g.vertices[v] for v in sorted(chosen)])


def _summary(rows: list[dict], key: str = "pass") -> dict:
    bad = [r for r in rows if not r[key]]
    return {"checked": len(rows), "violations": len(bad), "counterexamples": bad[:5], "pass": not bad}


def cap_vs_poincare_corpus(corpus, ps=(1.0, 2.0), alphas=(0.125, 0.0625)) -> dict:
    """h^p <= (2/alpha^(1/p)) C^{p,alpha} with h^p upper and C lower endpoints (exact for small graphs)."""
    from .poincare import check_cap_vs_poincare

    rows = []
    for i, g in enumerate(corpus):
        for p in ps:
            hp = hp_bounds(g, p, HpConfig(restarts=30))
            for a in alphas:
                try:
                    cap = capacity_bounds(g, None, p, a)
                except ValueError:
                    continue
                r = check_cap_vs_poincare(g, p, a, hp, cap)
                rows.append({"graph": i, "n": g.n, **r, "pass": r["strong_holds"]})
    return _summary(rows)


def product_corpus(corpus, ps=(1.0, 2.0), pairs: int | None = None) -> dict:
    """rho = h^p(AxB)/min(h^p(A), h^p(B)) over consecutive corpus pairs; reports the minimum."""
    rows = []
    idx = list(range(0, len(corpus) - 1, 2))
    if pairs is not None:
        idx = idx[:pairs]
    for i in idx:
        A, B = corpus[i], corpus[i + 1]
        if A.n < 2 or B.n < 2:
            continue
        for p in ps:
            r = product_lower_check(A, B, p, HpConfig(restarts=10))
            rows.append({"pair": [i, i + 1], **{k: v for k, v in r.items()}})
    out = _summary(rows)
    out["rho_min"] = min((r["rho"] for r in rows), default=math.nan)
    return out


def projection_corpus(corpus, ps=(1.0, 2.0), alpha: float = 0.125, per_pair: int = 3, seed: int = 0,
                      max_size: int = 10) -> dict:
    """C(gamma, #) <= C(pi(gamma), pi_* #) on random connected subgraphs of corpus products."""
    from .graphkit import product

    rng = np.random.default_rng(seed)
    rows, skipped = [], 0
    for i in range(0, len(corpus) - 1, 2):
        G = product(corpus[i], corpus[i + 1])
        for _ in range(per_pair):
            sub = random_connected_subset(G, int(rng.integers(2, min(max_size, G.n) + 1)), rng)
            for p in ps:
                try:
                    rows.append({"pair": [i, i + 1], **projection_check(sub, p, alpha)})
                except ValueError:
                    skipped += 1
    out = _summary(rows)
    out["skipped"] = skipped
    return out


def congestion_corpus(corpus) -> dict:
    """Every p = 1 congestion certificate is at most the exact h^1."""
    from .poincare import (
        all_pairs_geodesic_family, exact_h1, routed_vertex_certificate, uniform_geodesic_family,
        vertex_congestion_lower_bound,
    )

    rows = []
    for i, g in enumerate(corpus):
        if g.n < 2 or not g.is_connected() or g.n > 12:
            continue
        exact, _ = exact_h1(g, max_n=12)
        certs = {}
        for fam in (uniform_geodesic_family(g), all_pairs_geodesic_family(g)):
            certs[f"{fam.kind}_edge"] = congestion_lower_bound(g, fam, 1.0)
            certs[f"{fam.kind}_vertex"] = vertex_congestion_lower_bound(g, fam, 1.0)
        certs["routed_vertex"] = routed_vertex_certificate(g, 10).bound
        worst = max(certs.values())
        rows.append({"graph": i, "n": g.n, "exact": exact, "certificates": certs,
                     "pass": bool(worst <= exact * (1 + 1e-9) + 1e-12)})
    return _summary(rows)


def product_upper_corpus(count: int = 50, p: float = 1.0, alpha: float = 0.125, depth: int = 3, side: int = 5,
                         max_size: int = 400, seed: int = 0, slack: float = 30.0) -> dict:
    """product_upper_candidate on random connected subgraphs of a tree ball x Z^2 box.

    Soundness compares the candidate against the exact capacity when the
    subgraph is small and against the certified lower end otherwise;
    tightness compares it with the best upper estimate from capacity_bounds.
    """
    from .graphkit import make_regular_tree, make_zd_box, product

    X, Y = make_regular_tree(3, depth), make_zd_box(2, side)
    G = product(X, Y)
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        size = int(rng.integers(10, min(max_size, G.n) + 1))
        sub = random_connected_subset(G, size, rng)
        k = max(1, sub.n // 200)
        cand = product_upper_candidate(sub, X, Y, p, alpha, k)
        ref = capacity_bounds(sub, None, p, alpha / 2, CapConfig(certify_lower=True))
        sound = cand.admissible and cand.bound >= ref.lower * (1 - 1e-9) - 1e-12
        ratio = cand.bound / ref.upper if ref.upper > 0 else math.inf
        rows.append({"sample": i, "n": sub.n, "k": k, "case": cand.case, "admissible": cand.admissible,
                     "bound": cand.bound, "cap_lower": ref.lower, "cap_upper": ref.upper, "exact": ref.exact,
                     "ratio": ratio, "tight": ratio <= slack, "pass": bool(sound)})
    out = _summary(rows)
    out["tight_fraction"] = float(np.mean([r["tight"] for r in rows])) if rows else math.nan
    out["ratios"] = [r["ratio"] for r in rows]
    out["pass"] = out["pass"] and out["tight_fraction"] >= 0.9
    return out
