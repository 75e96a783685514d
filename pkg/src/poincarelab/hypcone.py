"""Compact model spaces, separated nets, hyperbolic cones and Gromov products."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product as iproduct

import numpy as np
from scipy.spatial import cKDTree

from .graphkit import WeightedGraph

KINDS = ("interval", "circle", "cantor_middle_thirds", "square", "point_cloud")
_SQUARE_SIDE = 0.5 / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ModelSpace:
    """A compact metric space of diameter 1/2 sampled on a fine grid.

    interval: [0, 1/2]; circle: arc length on a circle of length 1;
    cantor_middle_thirds: the middle-thirds set scaled by 1/2 (points are
    ternary digit strings over {0, 2}); square: Euclidean square of
    diagonal 1/2; point_cloud: given points, Euclidean, rescaled.
    """

    kind: str
    cloud: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown space {self.kind!r}; expected one of {KINDS}")
        if self.kind == "point_cloud":
            if not self.cloud or len(self.cloud) < 2:
                raise ValueError("point_cloud needs at least two points")
        elif self.cloud is not None:
            raise ValueError("only point_cloud takes explicit points")

    @property
    def Q(self) -> float | None:
        return {"interval": 1.0, "circle": 1.0, "square": 2.0,
                "cantor_middle_thirds": math.log(2) / math.log(3)}.get(self.kind)

    @property
    def period(self) -> float | None:
        return 1.0 if self.kind == "circle" else None

    @cached_property
    def _cloud_array(self) -> np.ndarray:
        pts = np.asarray(self.cloud, dtype=float)
        diam = max(float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1))), 1e-300)
        return (pts - pts.min(axis=0)) * (0.5 / diam)

    # -- sampling ------------------------------------------------------
    def resolution(self, budget: int) -> float:
        """Covering radius of the sample of (at most) ``budget`` points."""
        if self.kind == "interval":
            return 0.25 / self._grid_n(budget)
        if self.kind == "circle":
            return 0.5 / self._grid_n(budget)
        if self.kind == "square":
            return _SQUARE_SIDE / self._grid_n(budget) / math.sqrt(2.0)
        if self.kind == "cantor_middle_thirds":
            return 0.5 * 3.0 ** (-self._cantor_depth(budget))
        return 0.0

    def _grid_n(self, budget: int) -> int:
        if self.kind == "interval":
            return max(1, budget - 1)
        if self.kind == "circle":
            return max(1, budget)
        return max(1, int(math.isqrt(budget)) - 1)

    def _cantor_depth(self, budget: int) -> int:
        return max(0, int(math.floor(math.log2(max(budget, 1)))))

    def required_budget(self, t: int) -> int:
        """Smallest budget whose sample is e^-t/4 dense."""
        r = math.exp(-t) / 4
        if self.kind == "interval":
            return int(math.ceil(0.25 / r)) + 1
        if self.kind == "circle":
            return int(math.ceil(0.5 / r))
        if self.kind == "square":
            return (int(math.ceil(_SQUARE_SIDE / r / math.sqrt(2.0))) + 1) ** 2
        if self.kind == "cantor_middle_thirds":
            return 2 ** max(0, int(math.ceil(math.log(0.5 / r) / math.log(3))))
        return len(self.cloud)

    def sample(self, budget: int) -> np.ndarray:
        """Sample points (rows) in lexicographic order of intrinsic coordinates."""
        if self.kind == "interval":
            n = self._grid_n(budget)
            return (np.arange(n + 1) * (0.5 / n))[:, None]
        if self.kind == "circle":
            n = self._grid_n(budget)
            return (np.arange(n) / n)[:, None]
        if self.kind == "square":
            n = self._grid_n(budget)
            g = np.arange(n + 1) * (_SQUARE_SIDE / n)
            return np.array(list(iproduct(g, g)))
        if self.kind == "cantor_middle_thirds":
            L = self._cantor_depth(budget)
            pts = np.zeros(1)
            for i in range(1, L + 1):
                pts = np.concatenate([pts, pts + 2 * 3.0 ** (-i)])
            pts.sort()
            return (pts / 2)[:, None]
        arr = self._cloud_array
        return arr[np.lexsort(arr.T[::-1])]

    def intrinsic(self, point: np.ndarray):
        """Intrinsic coordinates: ternary digits for the Cantor set, floats otherwise."""
        if self.kind == "cantor_middle_thirds":
            x = Fraction(float(point[0])).limit_denominator(3 ** 30) * 2
            digits = []
            for _ in range(30):
                x *= 3
                d = int(x)
                digits.append(d)
                x -= d
                if x == 0:
                    break
            return "".join(map(str, digits)).rstrip("0") or "0"
        return [float(v) for v in point]

    def dist(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Metric between broadcast arrays of points (last axis = coordinates)."""
        diff = np.abs(np.asarray(a, float) - np.asarray(b, float))
        if self.kind == "circle":
            diff = np.minimum(diff, 1.0 - diff)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def tree(self, pts: np.ndarray) -> cKDTree:
        if self.kind == "circle":
            return cKDTree(np.mod(pts, 1.0), boxsize=1.0)
        return cKDTree(pts)


def make_net(space: ModelSpace, t: int, sample_budget: int | None = None) -> np.ndarray:
    """Greedy maximal e^-t separated subset of the sample, scanned in lexicographic order."""
    if t < 0:
        raise ValueError("level must be >= 0")
    need = space.required_budget(t)
    if sample_budget is None:
        sample_budget = need
    if space.kind != "point_cloud" and space.resolution(sample_budget) > math.exp(-t) / 4 + 1e-15:
        raise ValueError(f"sample budget {sample_budget} too small for level {t}; need about {need}")
    pts = space.sample(sample_budget)
    sep = math.exp(-t)
    tree = space.tree(pts)
    blocked = np.zeros(len(pts), dtype=bool)
    chosen = []
    for i in range(len(pts)):
        if blocked[i]:
            continue
        chosen.append(i)
        near = tree.query_ball_point(np.mod(pts[i], 1.0) if space.period else pts[i], sep)
        near = np.asarray(near, dtype=np.int64)
        # query is closed; points at distance exactly sep stay available
        keep = near[space.dist(pts[near], pts[i]) < sep]
        blocked[keep] = True
    return pts[chosen]


def check_net(space: ModelSpace, t: int, net: np.ndarray, sample: np.ndarray) -> dict:
    """Exact separation and maximality of a net against a sample."""
    sep = math.exp(-t)
    d = space.dist(net[:, None], net[None]) if len(net) > 1 else np.zeros((1, 1))
    np.fill_diagonal(d, np.inf)
    separated = bool(np.all(d >= sep))
    nearest, _ = space.tree(net).query(np.mod(sample, 1.0) if space.period else sample)
    maximal = bool(np.all(nearest < sep))
    return {"separated": separated, "maximal": maximal, "size": len(net)}


@dataclass(eq=False)
class ConeGraph:
    graph: WeightedGraph
    space: ModelSpace
    nets: list[np.ndarray]
    basepoint: str
    vertex_level: dict[str, int] = field(default_factory=dict)
    vertex_center: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def levels(self) -> int:
        return len(self.nets) - 1


def _cone_id(t: int, i: int) -> str:
    return f"{t:02d}:{i:06d}"


def make_cone(space: ModelSpace, levels: int, sample_budget: int | None = None) -> ConeGraph:
    """Cone over ``space``: nets X_0..X_T, with z in X_t and w in X_u adjacent
    when |t - u| <= 1 and rho(z, w) <= e^-t + e^-u."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    budget = sample_budget or space.required_budget(levels)
    nets = [make_net(space, t, budget) for t in range(levels + 1)]
    vertices, labels, edges = [], {}, set()
    level_of, center_of = {}, {}
    for t, net in enumerate(nets):
        for i, z in enumerate(net):
            v = _cone_id(t, i)
            vertices.append(v)
            labels[v] = {"level": t, "center": space.intrinsic(z)}
            level_of[v], center_of[v] = t, z
    trees = [space.tree(net) for net in nets]
    for t in range(levels + 1):
        for u in (t, t + 1):
            if u > levels:
                continue
            r = math.exp(-t) + math.exp(-u)
            pairs = trees[t].query_ball_tree(trees[u], r)
            for i, js in enumerate(pairs):
                for j in js:
                    if u == t and j <= i:
                        continue
                    if space.dist(nets[t][i], nets[u][j]) <= r:
                        edges.add((_cone_id(t, i), _cone_id(u, j)))
    g = WeightedGraph.build(vertices, edges, labels=labels)
    return ConeGraph(g, space, nets, _cone_id(0, 0), level_of, center_of)


# ---------------------------------------------------------------------------
# Gromov products

def gromov_product(g: WeightedGraph, p: str, x: str, y: str) -> Fraction:
    """(x|y)_p = (d(p,x) + d(p,y) - d(x,y)) / 2 with graph distances."""
    i = g.index
    dp = g.distances_from(i[p])
    dx = g.distances_from(i[x])
    vals = (dp[i[x]], dp[i[y]], dx[i[y]])
    if any(not np.isfinite(v) for v in vals):
        raise ValueError("points lie in different components")
    a, b, c = (int(v) for v in vals)
    return Fraction(a + b - c, 2)


def _delta_exhaustive(d: np.ndarray) -> float:
    n = d.shape[0]
    best = 0.0
    for p in range(n):
        gp = 0.5 * (d[p][:, None] + d[p][None, :] - d)
        for y in range(n):
            val = np.minimum(gp[:, y][:, None], gp[y][None, :]) - gp
            best = max(best, float(val.max()))
    return best


def estimate_delta(g: WeightedGraph, sample_quadruples: int = 100_000, seed: int = 0) -> float:
    """max of (x|y)_p ^ (y|z)_p - (x|z)_p over quadruples (p, x, y, z).

    Exhaustive when |V|^4 <= 10^7, otherwise over a seeded random sample
    (a longer sample with the same seed extends a shorter one).
    """
    if not g.is_connected():
        raise ValueError("graph must be connected")
    d = g.distance_matrix.astype(float)
    n = g.n
    if n ** 4 <= 10 ** 7:
        return _delta_exhaustive(d)
    rng = np.random.default_rng(seed)
    best = 0.0
    done = 0
    while done < sample_quadruples:
        size = min(100_000, sample_quadruples - done)
        q = rng.integers(0, n, size=(size, 4))
        p, x, y, z = q.T
        gxy = d[p, x] + d[p, y] - d[x, y]
        gyz = d[p, y] + d[p, z] - d[y, z]
        gxz = d[p, x] + d[p, z] - d[x, z]
        best = max(best, float(np.max(0.5 * (np.minimum(gxy, gyz) - gxz))))
        done += size
    return best


def boundary_metric_check(cone: ConeGraph, pairs: int = 2000, seed: int = 0) -> dict:
    """Spread of rho(z_x, z_y) * exp((x|y)_o) over vertex pairs with distinct centers."""
    g = cone.graph
    o = g.index[cone.basepoint]
    d = g.distance_matrix.astype(float)
    n = g.n
    if n * (n - 1) // 2 <= pairs:
        xs, ys = np.triu_indices(n, 1)
    else:
        rng = np.random.default_rng(seed)
        q = rng.integers(0, n, size=(pairs, 2))
        xs, ys = q[q[:, 0] != q[:, 1]].T
    centers = np.array([cone.vertex_center[v] for v in g.vertices])
    rho = cone.space.dist(centers[xs], centers[ys])
    keep = rho > 0
    xs, ys, rho = xs[keep], ys[keep], rho[keep]
    gp = 0.5 * (d[o, xs] + d[o, ys] - d[xs, ys])
    ratio = rho * np.exp(gp)
    lo, hi = float(ratio.min()), float(ratio.max())
    return {"pairs": int(len(ratio)), "min": lo, "max": hi, "spread": hi / lo,
            "pass": bool(np.isfinite(hi) and lo > 0 and hi / lo < 1e3)}
