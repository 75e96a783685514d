"""Poincaré constants, capacities and their certified bounds.

All functions take a :class:`WeightedGraph` and work with numpy arrays
aligned with ``graph.vertices``.  Upper bounds always come with an explicit
witness function (re-evaluated exactly); lower bounds come from path-family
congestion, the Laplacian spectrum (p = 2) or exhaustive small-case solvers.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog, minimize

from . import _kernels
from .graphkit import WeightedGraph

SLACK = 1e-9
LP_TOL = 1e-7


# ---------------------------------------------------------------------------
# vertex functions and gradients

def as_values(g: WeightedGraph, f: Mapping[str, float] | Sequence[float] | np.ndarray) -> np.ndarray:
    """Vertex function as an array in index order (accepts id->value maps)."""
    if isinstance(f, Mapping):
        missing = [v for v in g.vertices if v not in f]
        if missing:
            raise ValueError(f"function undefined at {missing[:3]}")
        return np.array([float(f[v]) for v in g.vertices])
    arr = np.asarray(f, dtype=float)
    if arr.shape != (g.n,):
        raise ValueError(f"expected {g.n} values, got shape {arr.shape}")
    return arr


def gradient(g: WeightedGraph, f) -> np.ndarray:
    """|grad f|(x) = max over neighbors y of |f(x) - f(y)| (0 at isolated vertices)."""
    f = as_values(g, f)
    out = np.zeros(g.n)
    e = g.edge_array
    if len(e):
        d = np.abs(f[e[:, 0]] - f[e[:, 1]])
        np.maximum.at(out, e[:, 0], d)
        np.maximum.at(out, e[:, 1], d)
    return out


def lp_norm(x: np.ndarray, p: float, mu: np.ndarray | None = None) -> float:
    w = np.ones_like(x) if mu is None else mu
    if math.isinf(p):
        return float(np.max(np.abs(x[w > 0]))) if np.any(w > 0) else 0.0
    return float(np.sum(w * np.abs(x) ** p) ** (1.0 / p))


def hp_ratio(g: WeightedGraph, f, p: float) -> float:
    """||grad f||_p / ||f||_p without validating the mean-zero constraint."""
    f = as_values(g, f)
    den = lp_norm(f, p)
    if den == 0:
        return math.inf
    return lp_norm(gradient(g, f), p) / den


def hp_upper_from_witness(g: WeightedGraph, p: float, f) -> float:
    """The ratio for a mean-zero witness; an upper bound on h^p(G) by definition."""
    f = as_values(g, f)
    scale = float(np.max(np.abs(f))) if g.n else 0.0
    if scale == 0:
        raise ValueError("witness is identically zero")
    if abs(float(np.sum(f))) > 1e-9 * scale * max(g.n, 1):
        raise ValueError("witness is not mean-zero")
    return hp_ratio(g, f, p)


def digest(obj: Any) -> str:
    data = json.dumps(obj, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(data).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    return str(o)


# ---------------------------------------------------------------------------
# bound intervals

@dataclass
class BoundInterval:
    """Certified [lower, upper] for an analytic constant with method tags."""

    lower: float
    upper: float
    lower_method: str = "trivial"
    upper_method: str = "none"
    lower_witness: dict = field(default_factory=dict)
    upper_witness: dict = field(default_factory=dict)
    exact: bool = False

    def __post_init__(self) -> None:
        if self.lower > self.upper + SLACK * max(1.0, abs(self.upper)):
            raise ValueError(f"inconsistent interval [{self.lower}, {self.upper}]")

    @property
    def ratio(self) -> float:
        if self.lower <= 0:
            return math.inf
        return self.upper / self.lower

    def to_json(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "exact": self.exact,
            "lower_method": self.lower_method,
            "upper_method": self.upper_method,
            "lower_witness": self.lower_witness,
            "upper_witness": self.upper_witness,
        }


def _function_witness(g: WeightedGraph, f: np.ndarray) -> dict:
    vals = [round(float(x), 12) for x in f]
    return {"function": dict(zip(g.vertices, vals)), "digest": digest(vals)}


# ---------------------------------------------------------------------------
# spectrum

def laplacian(g: WeightedGraph) -> sp.csr_matrix:
    a = g.adjacency
    return (sp.diags(np.asarray(a.sum(axis=1)).ravel()) - a).tocsr()


def spectral_pair(g: WeightedGraph) -> tuple[float, np.ndarray]:
    """Smallest positive Laplacian eigenvalue and a unit eigenvector."""
    if g.n < 2:
        raise ValueError("need at least two vertices")
    if not g.is_connected():
        raise ValueError("graph is disconnected")
    lap = laplacian(g)
    if g.n <= 1500:
        w, v = np.linalg.eigh(lap.toarray())
        lam, vec = float(w[1]), v[:, 1]
    else:
        from scipy.sparse.linalg import eigsh

        v0 = np.cos(np.arange(g.n) * 0.7 + 0.3)
        w, v = eigsh(lap.astype(float), k=2, sigma=-1e-3, which="LM", v0=v0, tol=1e-10)
        order = np.argsort(w)
        lam, vec = float(w[order[1]]), v[:, order[1]]
    vec = vec - vec.mean()
    vec /= np.linalg.norm(vec)
    nz = np.flatnonzero(np.abs(vec) > 1e-12)
    if len(nz) and vec[nz[0]] < 0:
        vec = -vec
    return lam, vec


def h2_spectral(g: WeightedGraph) -> float:
    """lambda_1 of the graph Laplacian (a comparator for h^2)."""
    return spectral_pair(g)[0]


def spectral_h2_bounds(g: WeightedGraph) -> tuple[float, float, np.ndarray]:
    """sqrt(2 lambda_1 / d_max) <= h^2 <= ratio of the Fiedler vector (<= sqrt(2 lambda_1)).

    Lower: |grad f|(x)^2 >= deg(x)^-1 sum_{y~x} (f(x)-f(y))^2, summing gives
    ||grad f||_2^2 >= (2/d) f.Lf >= (2/d) lambda_1 ||f||_2^2 on mean-zero f.
    """
    lam, vec = spectral_pair(g)
    lower = math.sqrt(max(2.0 * lam / g.max_degree, 0.0))
    return lower, hp_ratio(g, vec, 2.0), vec


# ---------------------------------------------------------------------------
# path families and congestion

@dataclass(eq=False)
class PathFamily:
    """Pair-weighted path family on a graph.

    ``loader(expo)`` returns, per edge (``graph.edge_array`` order), the sum
    over unordered pairs of the average over the pair's paths of
    ``len(path)**expo * (#times the path uses the edge)``.  With expo = 0
    this is the congestion kappa(e).
    """

    graph: WeightedGraph
    kind: str
    loader: Callable[[float], np.ndarray]
    paths: dict[tuple[int, int], list[tuple[int, ...]]] | None = None
    complete: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def load(self, expo: float = 0.0) -> np.ndarray:
        if expo not in self._cache:
            self._cache[expo] = np.asarray(self.loader(expo), dtype=float)
        return self._cache[expo]

    @property
    def kappa(self) -> np.ndarray:
        return self.load(0.0)

    def kappa_max(self, p: float = 1.0) -> float:
        ld = self.load(p - 1.0)
        return float(ld.max()) if len(ld) else 0.0

    def recount(self, expo: float = 0.0) -> np.ndarray:
        """Recompute loads from the explicit path lists."""
        if self.paths is None:
            raise ValueError("family has no explicit paths")
        return loads_from_paths(self.graph, self.paths, expo)

    def digest(self) -> str:
        return digest({"kind": self.kind, "kappa": [round(x, 9) for x in self.kappa.tolist()]})


def _edge_lookup(g: WeightedGraph) -> dict[tuple[int, int], int]:
    return {(int(a), int(b)): i for i, (a, b) in enumerate(g.edge_array)}


def loads_from_paths(g: WeightedGraph, paths: Mapping[tuple[int, int], list[tuple[int, ...]]], expo: float = 0.0) -> np.ndarray:
    look = _edge_lookup(g)
    load = np.zeros(g.m)
    for plist in paths.values():
        w = 1.0 / len(plist)
        for path in plist:
            c = w * float(len(path) - 1) ** expo
            for a, b in zip(path, path[1:]):
                key = (a, b) if a < b else (b, a)
                if key not in look:
                    raise ValueError(f"path step {key} is not an edge")
                load[look[key]] += c
    return load


def _kernel_args(g: WeightedGraph):
    a = g.adjacency
    return a.indptr.astype(np.int64), a.indices.astype(np.int64), g.csr_edge_ids, g.n, g.m


def _single_geodesic_paths(g: WeightedGraph) -> dict[tuple[int, int], list[tuple[int, ...]]]:
    out: dict[tuple[int, int], list[tuple[int, ...]]] = {}
    nbrs = g.neighbors
    dm = g.distance_matrix
    for s in range(g.n):
        d = dm[s]
        pred = {}
        for w in range(g.n):
            if np.isfinite(d[w]) and d[w] > 0:
                pred[w] = next(int(v) for v in nbrs[w] if d[v] == d[w] - 1)
        for w in range(s + 1, g.n):
            if not np.isfinite(d[w]):
                continue
            path = [w]
            while path[-1] != s:
                path.append(pred[path[-1]])
            out[(s, w)] = [tuple(reversed(path))]
    return out


def all_pairs_geodesic_family(g: WeightedGraph, explicit: bool | None = None) -> PathFamily:
    """One BFS geodesic per unordered pair {v < w}, built from v with the
    smallest-index predecessor rule."""
    args = _kernel_args(g)
    if explicit is None:
        explicit = g.n <= 200
    paths = _single_geodesic_paths(g) if explicit else None
    return PathFamily(g, "single_geodesic",
                      lambda expo: _kernels.single_geodesic_load(*args, float(expo)),
                      paths, complete=g.is_connected())


def uniform_geodesic_family(g: WeightedGraph) -> PathFamily:
    """Every pair uses all of its geodesics with equal weight."""
    args = _kernel_args(g)
    return PathFamily(g, "uniform_geodesic",
                      lambda expo: _kernels.uniform_geodesic_load(*args, float(expo)),
                      None, complete=g.is_connected())


def axis_order_family(g: WeightedGraph) -> PathFamily | None:
    """Axis-order routing on graphs with integer ``coords`` labels.

    Each pair walks axis by axis to its target, averaged over all axis
    orders.  Returns None when labels lack coordinates or a step leaves
    the graph.
    """
    from itertools import permutations

    labels = [g.labels.get(v) if g.labels else None for v in g.vertices]
    if not labels or any(not isinstance(lb, Mapping) or "coords" not in lb for lb in labels):
        return None
    coords = np.array([lb["coords"] for lb in labels], dtype=np.int64)
    if coords.ndim != 2:
        return None
    n, d = coords.shape
    where = {tuple(c): i for i, c in enumerate(coords.tolist())}
    look = _edge_lookup(g)
    step_vertex = -np.ones((n, d, 2), np.int64)
    step_edge = -np.ones((n, d, 2), np.int64)
    for v, c in enumerate(coords.tolist()):
        for a in range(d):
            for s, delta in ((0, -1), (1, 1)):
                q = list(c)
                q[a] += delta
                w = where.get(tuple(q))
                if w is None:
                    continue
                e = look.get((min(v, w), max(v, w)))
                if e is not None:
                    step_vertex[v, a, s], step_edge[v, a, s] = w, e
    perms = np.array(list(permutations(range(d))), dtype=np.int64)

    def loader(expo: float) -> np.ndarray:
        load, ok = _kernels.axis_order_load(coords, step_vertex, step_edge, g.m, perms, float(expo))
        if not ok:
            raise ValueError("axis-order route leaves the graph")
        return load

    fam = PathFamily(g, "axis_order", loader, None, complete=g.is_connected())
    try:
        fam.load(0.0)
    except ValueError:
        return None
    return fam


def vertex_congestion_lower_bound(g: WeightedGraph, fam: PathFamily, p: float = 1.0) -> float:
    """Certified lower bound (|V| / K_max)**(1/p), K(u) = sum of ``load(p-1)`` over edges at u.

    Along a path from v to w, |f(v)-f(w)| is at most the sum of grad f over
    the vertices left behind; averaging both orientations charges interior
    vertices once and endpoints one half, which totals K(u)/2 per vertex.
    Combined with the pair-sum inequality this gives
    |V| ||f||_p^p <= sum_u K(u) grad f(u)^p.  K_max <= kappa_max d_max, so
    this never loses against the edge form.
    """
    if fam.graph is not g and fam.graph != g:
        raise ValueError("family belongs to a different graph")
    if not fam.complete:
        raise ValueError("path family does not cover every pair")
    if g.n < 2:
        raise ValueError("need at least two vertices")
    ld = fam.load(p - 1.0)
    E = g.edge_array
    K = np.zeros(g.n)
    np.add.at(K, E[:, 0], ld)
    np.add.at(K, E[:, 1], ld)
    km = float(K.max())
    if km <= 0:
        raise ValueError("empty path family")
    return (g.n / km) ** (1.0 / p)


@dataclass
class RoutedCertificate:
    """Vertex loads of a mixture of cheapest-path routings (p = 1).

    ``interior[u]`` is the average number of pairs routed through u as an
    interior vertex; every vertex is also an endpoint of n - 1 pairs.
    """

    graph: WeightedGraph
    interior: np.ndarray
    rounds: int
    eps: float

    @property
    def vertex_load(self) -> np.ndarray:
        return 2.0 * self.interior + (self.graph.n - 1)

    @property
    def bound(self) -> float:
        return self.graph.n / float(self.vertex_load.max())

    def digest(self) -> str:
        return digest({"kind": "routed", "rounds": self.rounds, "eps": self.eps,
                       "interior": [round(x, 6) for x in self.interior.tolist()]})


def routed_vertex_certificate(g: WeightedGraph, rounds: int = 40, eps: float = 1.0) -> RoutedCertificate:
    """Multiplicative-weights routing that balances vertex loads.

    Each round routes all pairs along cheapest paths for the current vertex
    prices and raises prices where the round's load is high.  The average of
    the rounds is itself a path family, so its vertex loads certify
    h^1 >= |V| / max_u K(u) exactly as in the vertex form of the congestion
    bound.  Early rounds are poor, so the best average over the last
    ``rounds`` rounds (``rounds`` field) is kept.
    """
    if g.n < 2 or not g.is_connected():
        raise ValueError("need a connected graph with at least two vertices")
    a = g.adjacency
    ip, ix = a.indptr.astype(np.int64), a.indices.astype(np.int64)
    logy = np.zeros(g.n)
    loads = []
    for _ in range(rounds):
        y = np.exp(logy - logy.max()) + 1e-12
        load = _kernels.cheapest_path_interior_load(ip, ix, g.n, y)
        loads.append(load)
        top = load.max()
        if top > 0:
            logy += eps * load / top
    # any window average of rounds is a mixture of path families; keep the best tail
    tail = np.cumsum(np.array(loads[::-1]), axis=0)
    counts = np.arange(1, rounds + 1)[:, None]
    peaks = (tail / counts).max(axis=1)
    best_t = int(np.argmin(peaks)) + 1
    best = tail[best_t - 1] / best_t
    return RoutedCertificate(g, best, best_t, eps)


def congestion_lower_bound(g: WeightedGraph, fam: PathFamily, p: float = 1.0) -> float:
    """Certified lower bound (|V| / (kappa_max d_max))**(1/p) on h^p(G).

    For mean-zero f, Jensen gives |V| ||f||_p^p <= sum over ordered pairs of
    |f(v)-f(w)|^p = 2 sum over unordered pairs.  For each pair, Hoelder along
    each path gives |f(v)-f(w)|^p <= avg_path |path|^(p-1) sum_{e in path}
    |df(e)|^p, so the pair sum is at most kappa_max * sum_e |df(e)|^p, and
    sum_e |df(e)|^p <= (d_max/2) ||grad f||_p^p.  Here kappa_max is the
    maximal ``load(p-1)`` of the family (plain congestion when p = 1).
    """
    if fam.graph is not g and fam.graph != g:
        raise ValueError("family belongs to a different graph")
    if not fam.complete:
        raise ValueError("path family does not cover every pair")
    if g.n < 2:
        raise ValueError("need at least two vertices")
    km = fam.kappa_max(p)
    if km <= 0:
        raise ValueError("empty path family")
    return (g.n / (km * g.max_degree)) ** (1.0 / p)


# ---------------------------------------------------------------------------
# sweeps and upper bounds

def two_valued(n: int, mask: np.ndarray) -> np.ndarray:
    k = int(mask.sum())
    return np.where(mask, float(n - k), -float(k))


def _bfs_order(g: WeightedGraph, source: int) -> np.ndarray:
    d = g.distances_from(source)
    return np.lexsort((np.arange(g.n), d)).astype(np.int64)


def sweep_orders(g: WeightedGraph, fiedler: np.ndarray | None = None, bfs_sources: int = 4) -> list[np.ndarray]:
    orders = []
    if fiedler is not None:
        orders.append(np.lexsort((np.arange(g.n), fiedler)).astype(np.int64))
    # BFS from vertex 0, then repeatedly from the farthest vertex found
    src = 0
    seen = set()
    for _ in range(bfs_sources):
        if src in seen:
            break
        seen.add(src)
        o = _bfs_order(g, src)
        orders.append(o)
        src = int(o[-1])
    return orders


def sweep_upper(g: WeightedGraph, p: float, orders: Sequence[np.ndarray]) -> tuple[float, np.ndarray | None]:
    """Best two-valued mean-zero function among prefixes of the given orders."""
    n = g.n
    indptr, indices = g.adjacency.indptr.astype(np.int64), g.adjacency.indices.astype(np.int64)
    best, best_mask = math.inf, None
    k = np.arange(1, n, dtype=float)
    for order in orders:
        b = _kernels.sweep_boundary(indptr, indices, order)[1:n].astype(float)
        den = k * (n - k) ** p + (n - k) * k ** p
        vals = n * b ** (1.0 / p) / den ** (1.0 / p)
        i = int(np.argmin(vals))
        if vals[i] < best - 1e-15:
            best = float(vals[i])
            best_mask = np.zeros(n, dtype=bool)
            best_mask[order[: i + 1]] = True
    return best, best_mask


class _SmoothObjective:
    """Smoothed ||grad f||_p^p / ||f||_p^p on mean-zero f.

    The neighbor max is replaced by an l^q norm and |.| by sqrt(. + eps^2).
    """

    def __init__(self, g: WeightedGraph, p: float, q: float, eps: float):
        self.e = g.edge_array
        self.indptr = g.adjacency.indptr
        self.eid = g.csr_edge_ids
        self.rows = np.repeat(np.arange(g.n), np.diff(self.indptr))
        self.p, self.q, self.eps, self.n = p, q, eps, g.n

    def __call__(self, u: np.ndarray):
        p, q, eps = self.p, self.q, self.eps
        f = u - u.mean()
        d = f[self.e[:, 0]] - f[self.e[:, 1]]
        s = np.sqrt(d * d + eps * eps)
        sv = s[self.eid]
        starts = self.indptr[:-1]
        mx = np.maximum.reduceat(sv, starts)
        r = sv / mx[self.rows]
        sq = np.add.reduceat(r ** q, starts)
        G = mx * sq ** (1.0 / q)
        num = float(np.sum(G ** p))
        a = np.sqrt(f * f + eps * eps)
        den = float(np.sum(a ** p))
        # d num / d s_e = p s_e^(q-1) sum_{x in e} G_x^(p-q), computed scale-stably
        w = p * G ** p / sq          # = p G^p / (sum (s/mx)^q)
        contrib = w[self.rows] * (r ** (q - 1)) / mx[self.rows]
        dnum_ds = np.zeros(len(s))
        np.add.at(dnum_ds, self.eid, contrib)
        gd = dnum_ds * d / s
        gnum = np.zeros(self.n)
        np.add.at(gnum, self.e[:, 0], gd)
        np.add.at(gnum, self.e[:, 1], -gd)
        gden = p * a ** (p - 2) * f
        grad_f = gnum / den - num * gden / (den * den)
        return num / den, grad_f - grad_f.mean()


def smooth_descent(g: WeightedGraph, p: float, f0: np.ndarray, qs: Sequence[float] = (4.0, 16.0, 64.0),
                   maxiter: int = 300) -> tuple[float, np.ndarray]:
    """Local search from f0 with a continuation in the smoothing parameters.

    Returns the exact ratio of the best iterate (always a valid upper bound).
    """
    f = f0 - f0.mean()
    scale = float(np.max(np.abs(f)))
    if scale == 0:
        return math.inf, f
    f = f / scale
    best = hp_ratio(g, f, p)
    best_f = f.copy()
    for q in qs:
        for eps in (1e-2, 1e-4):
            obj = _SmoothObjective(g, p, q, eps)
            res = minimize(obj, f, jac=True, method="L-BFGS-B", options={"maxiter": maxiter, "gtol": 1e-10})
            f = res.x - res.x.mean()
            sc = float(np.max(np.abs(f)))
            if sc == 0:
                break
            f = f / sc
            val = hp_ratio(g, f, p)
            if val < best:
                best, best_f = val, f.copy()
    return best, best_f


# ---------------------------------------------------------------------------
# small-graph solvers

def _lp_constraint_rows(g: WeightedGraph):
    """Rows of  (+/-)(f_x - f_y) - g_x <= 0  for every directed adjacency."""
    a = g.adjacency.tocoo()
    n, k = g.n, a.nnz
    rows = np.arange(2 * k)
    xs, ys = np.concatenate([a.row, a.row]), np.concatenate([a.col, a.col])
    sign = np.concatenate([np.ones(k), -np.ones(k)])
    data = np.concatenate([sign, -sign, -np.ones(2 * k)])
    r = np.concatenate([rows, rows, rows])
    c = np.concatenate([xs, ys, n + xs])
    return sp.csr_matrix((data, (r, c)), shape=(2 * k, 2 * n))


def exact_h1(g: WeightedGraph, max_n: int = 12) -> tuple[float, np.ndarray]:
    """Exact h^1 by one LP per sign pattern of f.

    Within a closed sign orthant ||f||_1 = sum s_i f_i is linear, so after
    fixing ||f||_1 = 1 the ratio is minimized by an LP in (f, g) with
    g_x >= |f_x - f_y|.  Patterns with s_0 = +1 suffice by symmetry.
    """
    n = g.n
    if n < 2:
        raise ValueError("need at least two vertices")
    if n > max_n:
        raise ValueError(f"exact h^1 limited to {max_n} vertices")
    if not g.is_connected():
        f = two_valued(n, g.components == g.components[0])
        return 0.0, f
    A = _lp_constraint_rows(g)
    b = np.zeros(A.shape[0])
    c = np.concatenate([np.zeros(n), np.ones(n)])
    best, best_f = math.inf, None
    for bits in range(1, 2 ** (n - 1)):
        s = np.ones(n)
        for i in range(1, n):
            if bits >> (i - 1) & 1:
                s[i] = -1.0
        A_eq = np.vstack([np.concatenate([np.ones(n), np.zeros(n)]), np.concatenate([s, np.zeros(n)])])
        bounds = [(0, None) if si > 0 else (None, 0) for si in s] + [(0, None)] * n
        res = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=[0.0, 1.0], bounds=bounds, method="highs")
        if res.status == 0 and res.fun < best - 1e-12:
            best, best_f = float(res.fun), res.x[:n].copy()
    best_f = best_f - best_f.mean()
    return hp_ratio(g, best_f, 1.0) if best_f is not None else math.inf, best_f


def _slsqp_hp(g: WeightedGraph, p: float, f0: np.ndarray) -> np.ndarray:
    n = g.n
    e = g.adjacency.tocoo()
    xs, ys = e.row, e.col

    def obj(z):
        gg = z[n:]
        return float(np.sum(gg ** p))

    def obj_jac(z):
        out = np.zeros(2 * n)
        out[n:] = p * np.maximum(z[n:], 0) ** (p - 1)
        return out

    k = len(xs)
    J = np.zeros((2 * k, 2 * n))
    idx = np.arange(k)
    J[idx, xs] -= 1; J[idx, ys] += 1; J[idx, n + xs] += 1
    J[k + idx, xs] += 1; J[k + idx, ys] -= 1; J[k + idx, n + xs] += 1

    def ineq(z):
        f, gg = z[:n], z[n:]
        d = f[xs] - f[ys]
        return np.concatenate([gg[xs] - d, gg[xs] + d])

    def eq(z):
        f = z[:n]
        return np.array([f.sum(), np.sum(np.abs(f) ** p) - 1.0])

    def eq_jac(z):
        f = z[:n]
        out = np.zeros((2, 2 * n))
        out[0, :n] = 1.0
        out[1, :n] = p * np.abs(f) ** (p - 1) * np.sign(f)
        return out

    f = f0 - f0.mean()
    f = f / lp_norm(f, p)
    z0 = np.concatenate([f, gradient(g, f)])
    res = minimize(obj, z0, jac=obj_jac, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": ineq, "jac": lambda z: J},
                                {"type": "eq", "fun": eq, "jac": eq_jac}],
                   bounds=[(None, None)] * n + [(0, None)] * n,
                   options={"maxiter": 500, "ftol": 1e-14})
    return res.x[:n] - res.x[:n].mean()


def high_confidence_hp(g: WeightedGraph, p: float, restarts: int = 100, seed: int = 0,
                       starts: Sequence[np.ndarray] = ()) -> tuple[float, np.ndarray, int]:
    """Multi-start local minimization for small graphs (p > 1).

    Returns (best ratio, witness, number of restarts agreeing within 1e-6).
    """
    rng = np.random.default_rng(seed)
    vals, fs = [], []
    cands = list(starts) + [rng.standard_normal(g.n) for _ in range(restarts)]
    for f0 in cands:
        if np.ptp(f0) == 0:
            continue
        f = _slsqp_hp(g, p, f0)
        if np.max(np.abs(f)) == 0:
            continue
        vals.append(hp_ratio(g, f, p))
        fs.append(f)
    vals_arr = np.array(vals)
    i = int(np.argmin(vals_arr))
    best = float(vals_arr[i])
    agree = int(np.sum(vals_arr <= best * (1 + 1e-6) + 1e-12))
    return best, fs[i], agree


# ---------------------------------------------------------------------------
# h^p bounds

@dataclass(frozen=True)
class HpConfig:
    seed: int = 0
    restarts: int = 100
    exact_threshold: int = 8
    family: str = "uniform"          # uniform | single | both
    spectral: bool = True
    local_search: bool = True
    large_restarts: int = 4
    lower: bool = True
    upper: bool = True
    routing_rounds: int = 40
    routing_max_n: int = 4000


def hp_bounds(g: WeightedGraph, p: float, config: HpConfig | None = None) -> BoundInterval:
    """Certified interval for h^p(G) (counting measure, mean-zero functions)."""
    cfg = config or HpConfig()
    n = g.n
    if n < 2:
        raise ValueError("h^p needs at least two vertices")
    if not g.is_connected():
        f = two_valued(n, g.components == g.components[0])
        return BoundInterval(0.0, 0.0, "disconnected", "disconnected", {}, _function_witness(g, f), exact=True)

    if p == 1 and n <= cfg.exact_threshold:
        val, f = exact_h1(g, max_n=max(cfg.exact_threshold, 8))
        w = _function_witness(g, f)
        return BoundInterval(val, val, "exact_sign_lp", "exact_sign_lp", {"patterns": 2 ** (n - 1) - 1}, w, exact=True)

    lower, lower_method, lower_w = 0.0, "trivial", {}
    upper, upper_method, upper_f = math.inf, "none", None

    fiedler = None
    if cfg.spectral or cfg.upper:
        lam, fiedler = spectral_pair(g)
        if p == 2 and cfg.spectral and cfg.lower:
            lo = math.sqrt(2 * lam / g.max_degree)
            lower, lower_method, lower_w = lo, "spectral", {"lambda1": lam, "d_max": int(g.max_degree)}

    if cfg.lower:
        fams = []
        if cfg.family in ("uniform", "both"):
            fams.append(uniform_geodesic_family(g))
        if cfg.family in ("single", "both"):
            fams.append(all_pairs_geodesic_family(g, explicit=False))
        if cfg.family != "single":
            axis = axis_order_family(g)
            if axis is not None:
                fams.append(axis)
        for fam in fams:
            for form, bound in (("edge", congestion_lower_bound), ("vertex", vertex_congestion_lower_bound)):
                lo = bound(g, fam, p)
                if lo > lower:
                    lower, lower_method = lo, f"congestion_{fam.kind}" + ("_vertex" if form == "vertex" else "")
                    lower_w = {"kappa_max": fam.kappa_max(p), "d_max": int(g.max_degree),
                               "form": form, "family_digest": fam.digest()}

    if cfg.lower and p == 1 and cfg.routing_rounds > 0 and n <= cfg.routing_max_n:
        cert = routed_vertex_certificate(g, cfg.routing_rounds)
        if cert.bound > lower:
            lower, lower_method = cert.bound, "congestion_routed_vertex"
            lower_w = {"rounds": cert.rounds, "K_max": float(cert.vertex_load.max()), "family_digest": cert.digest()}

    if cfg.upper:
        orders = sweep_orders(g, fiedler)
        val, mask = sweep_upper(g, p, orders)
        upper, upper_method, upper_f = val, "sweep", two_valued(n, mask)
        if fiedler is not None:
            v = hp_ratio(g, fiedler, p)
            if v < upper:
                upper, upper_method, upper_f = v, "fiedler", fiedler.copy()
        if cfg.local_search:
            rng = np.random.default_rng(cfg.seed)
            starts = [upper_f, fiedler, np.sign(fiedler) * np.abs(fiedler) ** 0.5,
                      np.sign(fiedler) * np.abs(fiedler) ** 2]
            if n <= 60 and p > 1:
                val, f, agree = high_confidence_hp(g, p, cfg.restarts, cfg.seed, starts)
                if val < upper:
                    upper, upper_method, upper_f = val, f"multistart_slsqp(agree={agree})", f
            else:
                n_rand = cfg.restarts if n <= 60 else cfg.large_restarts
                starts += [rng.standard_normal(n) for _ in range(n_rand)]
                for f0 in starts:
                    val, f = smooth_descent(g, p, f0)
                    if val < upper - 1e-15:
                        upper, upper_method, upper_f = val, "local_search", f
        upper_f = upper_f - upper_f.mean()
        upper = hp_ratio(g, upper_f, p)
    return BoundInterval(lower, upper, lower_method, upper_method, lower_w,
                         _function_witness(g, upper_f) if upper_f is not None else {}, exact=False)


# ---------------------------------------------------------------------------
# capacities

def measure_array(g: WeightedGraph, mu=None) -> np.ndarray:
    if mu is None:
        return g.mu.copy()
    if isinstance(mu, Mapping):
        return np.array([float(mu[v]) for v in g.vertices])
    arr = np.asarray(mu, dtype=float)
    if arr.shape != (g.n,):
        raise ValueError("measure has wrong length")
    return arr


def capacity_of_function(g: WeightedGraph, mu: np.ndarray, p: float, alpha: float, f) -> tuple[float, bool]:
    """(mu(G)^(-1/p) ||grad f||_{mu,p}, admissible?) for f clipped to [0, 1]."""
    f = np.clip(as_values(g, f), 0.0, 1.0)
    total = float(mu.sum())
    ok = mu[f <= 0].sum() >= alpha * total - 1e-12 and mu[f >= 1].sum() >= alpha * total - 1e-12
    val = (float(np.sum(mu * gradient(g, f) ** p)) / total) ** (1.0 / p)
    return val, bool(ok)


def _cap_lp(g: WeightedGraph, mu: np.ndarray, s0: np.ndarray, s1: np.ndarray, A=None) -> tuple[float, np.ndarray]:
    n = g.n
    if A is None:
        A = _lp_constraint_rows(g)
    c = np.concatenate([np.zeros(n), mu])
    bounds = [(0.0, 0.0) if s0[i] else (1.0, 1.0) if s1[i] else (0.0, 1.0) for i in range(n)] + [(0, None)] * n
    res = linprog(c, A_ub=A, b_ub=np.zeros(A.shape[0]), bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"capacity LP failed: {res.message}")
    return float(res.fun), np.clip(res.x[:n], 0, 1)


def _cap_convex(g: WeightedGraph, mu: np.ndarray, p: float, s0: np.ndarray, s1: np.ndarray,
                f0: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """min sum mu_x |grad f|(x)^p with f = 0 on s0, 1 on s1, f in [0, 1] (convex)."""
    n = g.n
    fixed = s0 | s1
    base = np.where(s1, 1.0, 0.0)
    free = np.flatnonzero(~fixed)
    if f0 is None:
        f0 = np.full(n, 0.5)
    if len(free) == 0:
        return float(np.sum(mu * gradient(g, base) ** p)), base
    if n <= 60:
        e = g.adjacency.tocoo()
        xs, ys = e.row, e.col
        k = len(xs)
        nf = len(free)
        pos = -np.ones(n, dtype=int)
        pos[free] = np.arange(nf)

        def unpack(z):
            f = base.copy()
            f[free] = z[:nf]
            return f, z[nf:]

        def obj(z):
            return float(np.sum(mu * np.maximum(z[nf:], 0) ** p))

        def obj_jac(z):
            out = np.zeros(nf + n)
            out[nf:] = mu * p * np.maximum(z[nf:], 0) ** (p - 1)
            return out

        J = np.zeros((2 * k, nf + n))
        for i in range(k):
            x, y = xs[i], ys[i]
            if pos[x] >= 0:
                J[i, pos[x]] -= 1; J[k + i, pos[x]] += 1
            if pos[y] >= 0:
                J[i, pos[y]] += 1; J[k + i, pos[y]] -= 1
            J[i, nf + x] += 1; J[k + i, nf + x] += 1

        def ineq(z):
            f, gg = unpack(z)
            d = f[xs] - f[ys]
            return np.concatenate([gg[xs] - d, gg[xs] + d])

        f_init = base.copy()
        f_init[free] = np.clip(f0[free], 0, 1)
        z0 = np.concatenate([f_init[free], gradient(g, f_init)])
        res = minimize(obj, z0, jac=obj_jac, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": ineq, "jac": lambda z: J}],
                       bounds=[(0, 1)] * nf + [(0, None)] * n,
                       options={"maxiter": 1000, "ftol": 1e-15})
        f, _ = unpack(res.x)
        f = np.clip(f, 0, 1)
        return float(np.sum(mu * gradient(g, f) ** p)), f
    # large graphs: smoothed convex objective with box constraints
    e = g.edge_array
    indptr, eid = g.adjacency.indptr, g.csr_edge_ids
    rows = np.repeat(np.arange(n), np.diff(indptr))
    starts = indptr[:-1]
    f = base.copy()
    f[free] = np.clip(f0[free], 0, 1)
    best_val, best_f = float(np.sum(mu * gradient(g, f) ** p)), f.copy()
    for q in (8.0, 32.0, 128.0):
        for eps in (1e-3, 1e-5):
            def fun(z):
                ff = base.copy()
                ff[free] = z
                d = ff[e[:, 0]] - ff[e[:, 1]]
                s = np.sqrt(d * d + eps * eps)
                sv = s[eid]
                mx = np.maximum.reduceat(sv, starts)
                r = sv / mx[rows]
                sq = np.add.reduceat(r ** q, starts)
                G = mx * sq ** (1.0 / q)
                val = float(np.sum(mu * G ** p))
                w = mu * p * G ** p / sq
                contrib = w[rows] * r ** (q - 1) / mx[rows]
                dd = np.zeros(len(s))
                np.add.at(dd, eid, contrib)
                gd = dd * d / s
                gr = np.zeros(n)
                np.add.at(gr, e[:, 0], gd)
                np.add.at(gr, e[:, 1], -gd)
                return val, gr[free]
            res = minimize(fun, f[free], jac=True, method="L-BFGS-B", bounds=[(0, 1)] * len(free),
                           options={"maxiter": 400})
            f = base.copy()
            f[free] = np.clip(res.x, 0, 1)
            val = float(np.sum(mu * gradient(g, f) ** p))
            if val < best_val:
                best_val, best_f = val, f.copy()
    return best_val, best_f


def capacity_subproblem(g: WeightedGraph, mu: np.ndarray, p: float, s0: np.ndarray, s1: np.ndarray,
                        f0: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Minimal ||grad f||_{mu,p}^p with f = 0 on s0 and f = 1 on s1 (value, f)."""
    if np.any(s0 & s1):
        raise ValueError("seed sets overlap")
    if p == 1:
        return _cap_lp(g, mu, s0, s1)
    return _cap_convex(g, mu, p, s0, s1, f0)


def _minimal_admissible_masks(mu: np.ndarray, need: float, universe: int) -> list[int]:
    n = len(mu)
    out = []
    items = [i for i in range(n) if universe >> i & 1]
    for r in range(1, len(items) + 1):
        for comb in combinations(items, r):
            tot = sum(mu[i] for i in comb)
            if tot < need - 1e-12:
                continue
            if all(tot - mu[i] < need - 1e-12 for i in comb):
                m = 0
                for i in comb:
                    m |= 1 << i
                out.append(m)
    return out


def capacity_exact(g: WeightedGraph, mu: np.ndarray, p: float, alpha: float, max_n: int = 10) -> tuple[float, np.ndarray]:
    """Exact C^{p,alpha} by enumerating inclusion-minimal admissible seed pairs."""
    n = g.n
    if n > max_n:
        raise ValueError(f"exact capacity limited to {max_n} vertices")
    total = float(mu.sum())
    need = alpha * total
    full = (1 << n) - 1
    firsts = _minimal_admissible_masks(mu, need, full)
    A = _lp_constraint_rows(g) if p == 1 else None
    best, best_f = math.inf, None
    for m0 in firsts:
        for m1 in _minimal_admissible_masks(mu, need, full & ~m0):
            if m1 < m0:
                continue  # f -> 1 - f swaps the roles of the seed sets
            s0 = np.array([(m0 >> i) & 1 for i in range(n)], dtype=bool)
            s1 = np.array([(m1 >> i) & 1 for i in range(n)], dtype=bool)
            if p == 1:
                val, f = _cap_lp(g, mu, s0, s1, A)
            else:
                val, f = _cap_convex(g, mu, p, s0, s1)
            if val < best:
                best, best_f = val, f
    if best_f is None:
        raise ValueError("no admissible seed pair: alpha too large for the measure's atoms")
    return (best / total) ** (1.0 / p), best_f


@dataclass(frozen=True)
class CapConfig:
    seed: int = 0
    exact_threshold: int = 10
    refine: int = 6
    certify_lower: bool = False
    hp_config: HpConfig = HpConfig(local_search=False, upper=False)


def _seed_pair(order: np.ndarray, mu: np.ndarray, need: float) -> tuple[np.ndarray, np.ndarray] | None:
    cum = np.cumsum(mu[order])
    i0 = int(np.searchsorted(cum, need - 1e-12))
    rcum = np.cumsum(mu[order[::-1]])
    i1 = int(np.searchsorted(rcum, need - 1e-12))
    if i0 + i1 + 2 > len(order):
        return None
    s0 = np.zeros(len(order), dtype=bool)
    s1 = np.zeros(len(order), dtype=bool)
    s0[order[: i0 + 1]] = True
    s1[order[len(order) - i1 - 1:]] = True
    if np.any(s0 & s1):
        return None
    return s0, s1


def capacity_bounds(g: WeightedGraph, mu=None, p: float = 1.0, alpha: float = 0.125,
                    config: CapConfig | None = None) -> BoundInterval:
    """Certified interval for C^{p,alpha}(G, mu)."""
    cfg = config or CapConfig()
    if not (0 < alpha < 0.25):
        raise ValueError("alpha must lie in (0, 1/4)")
    mu = measure_array(g, mu)
    total = float(mu.sum())
    if total <= 0:
        raise ValueError("total measure must be positive")
    if np.any(mu < 0):
        raise ValueError("negative measure")
    need = alpha * total
    if g.n <= cfg.exact_threshold:
        val, f = capacity_exact(g, mu, p, alpha, max_n=cfg.exact_threshold)
        return BoundInterval(val, val, "exact_enumeration", "exact_enumeration", {},
                             _function_witness(g, f), exact=True)

    indptr, indices = g.adjacency.indptr.astype(np.int64), g.adjacency.indices.astype(np.int64)
    orders = []
    if g.is_connected():
        _, fied = spectral_pair(g)
        orders.append(np.lexsort((np.arange(g.n), fied)).astype(np.int64))
    orders += sweep_orders(g, None, bfs_sources=4)
    best, best_f, method = math.inf, None, "none"
    seeds = []
    for order in orders:
        b = _kernels.sweep_boundary_measure(indptr, indices, order, mu)
        cum = np.concatenate([[0.0], np.cumsum(mu[order])])
        ok = (cum >= need - 1e-12) & (total - cum >= need - 1e-12)
        ok[0] = ok[-1] = False
        if np.any(ok):
            vals = np.where(ok, b, np.inf)
            i = int(np.argmin(vals))
            val = float(vals[i])
            if val < best:
                f = np.ones(g.n)
                f[order[:i]] = 0.0
                best, best_f, method = val, f, "sweep"
        pair = _seed_pair(order, mu, need)
        if pair is not None:
            seeds.append(pair)
    for s0, s1 in seeds[: cfg.refine]:
        val, f = capacity_subproblem(g, mu, p, s0, s1, best_f)
        if val < best:
            best, best_f, method = val, f, "seed_lp" if p == 1 else "seed_convex"
    if best_f is None:
        raise ValueError("no admissible candidate found")
    upper, ok = capacity_of_function(g, mu, p, alpha, best_f)
    if not ok:
        raise RuntimeError("internal error: candidate not admissible")
    lower, lmethod, lw = 0.0, "uncertified", {}
    if cfg.certify_lower and np.allclose(mu, mu[0]) and g.is_connected():
        hb = hp_bounds(g, p, cfg.hp_config)
        lower = min(alpha ** (1.0 / p) * hb.lower / 2.0, upper)
        lmethod, lw = "poincare_comparison", {"hp_lower": hb.lower, "hp_method": hb.lower_method}
    return BoundInterval(lower, upper, lmethod, method, lw, _function_witness(g, best_f), exact=False)


def check_cap_vs_poincare(g: WeightedGraph, p: float, alpha: float, hp: BoundInterval | None = None,
                          cap: BoundInterval | None = None) -> dict:
    """Check h^p <= (2/alpha^(1/p)) C^{p,alpha}(G, #), evaluated conservatively."""
    hp = hp or hp_bounds(g, p)
    cap = cap or capacity_bounds(g, None, p, alpha)
    factor = 2.0 / alpha ** (1.0 / p)
    lhs, rhs = hp.lower, factor * cap.upper
    return {"p": p, "alpha": alpha, "hp_lower": hp.lower, "hp_upper": hp.upper,
            "cap_lower": cap.lower, "cap_upper": cap.upper, "factor": factor,
            "holds": bool(lhs <= rhs * (1 + 1e-9) + 1e-12),
            "strong_holds": bool(hp.upper <= factor * cap.lower * (1 + 1e-9) + 1e-12)}
