"""Weighted graphs and deterministic generators for the graph families used here.

Vertex ids are strings; internally vertices are indexed in sorted id order so
"lexicographically smallest id" and "smallest index" coincide everywhere.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product as iproduct
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

Number = int | float | Fraction


class GraphFormatError(ValueError):
    """Raised when a graph file or graph description is malformed."""


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Finite simple graph with a nonnegative vertex measure.

    Use :meth:`build` rather than the raw constructor; it validates and
    normalizes the input.
    """

    vertices: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    measure: Mapping[str, Number]
    labels: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        vertices: Iterable[str],
        edges: Iterable[tuple[str, str]],
        measure: Mapping[str, Number] | None = None,
        labels: Mapping[str, Any] | None = None,
        *,
        strict: bool = False,
    ) -> "WeightedGraph":
        verts = [str(v) for v in vertices]
        vset = set(verts)
        if len(vset) != len(verts):
            raise GraphFormatError("duplicate vertex id")
        norm: set[tuple[str, str]] = set()
        for a, b in edges:
            a, b = str(a), str(b)
            if a == b:
                raise GraphFormatError(f"loop at vertex {a!r}")
            if a not in vset or b not in vset:
                raise GraphFormatError(f"edge ({a!r}, {b!r}) has an unknown endpoint")
            e = (a, b) if a < b else (b, a)
            if strict and e in norm:
                raise GraphFormatError(f"duplicate edge ({a!r}, {b!r})")
            norm.add(e)
        mu: dict[str, Number] = {}
        for v in verts:
            m = 1 if measure is None else measure.get(v, 1)
            if m < 0:
                raise GraphFormatError(f"negative measure at vertex {v!r}")
            mu[v] = m
        lab = {v: labels[v] for v in verts if labels is not None and v in labels}
        return cls(tuple(sorted(verts)), frozenset(norm), mu, lab)

    # -- basic structure -------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def edge_array(self) -> np.ndarray:
        """Edges as an (m, 2) int array of indices with u < v, sorted."""
        idx = self.index
        arr = np.array(sorted((idx[a], idx[b]) for a, b in self.edges), dtype=np.int64)
        return arr.reshape(-1, 2)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        e = self.edge_array
        n = self.n
        if len(e) == 0:
            return sp.csr_matrix((n, n), dtype=np.float64)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        a.sort_indices()
        return a

    @cached_property
    def csr_edge_ids(self) -> np.ndarray:
        """For each CSR adjacency entry, the row of the edge in ``edge_array``."""
        a, n = self.adjacency, self.n
        if a.nnz == 0:
            return np.zeros(0, dtype=np.int64)
        rows = np.repeat(np.arange(n), np.diff(a.indptr))
        cols = a.indices
        keys = np.minimum(rows, cols) * n + np.maximum(rows, cols)
        e = self.edge_array
        return np.searchsorted(e[:, 0] * n + e[:, 1], keys).astype(np.int64)

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        a = self.adjacency
        return [a.indices[a.indptr[i]:a.indptr[i + 1]] for i in range(self.n)]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    @cached_property
    def mu(self) -> np.ndarray:
        return np.array([float(self.measure[v]) for v in self.vertices])

    @property
    def total_measure(self) -> Number:
        return sum(self.measure.values())

    def label(self, v: str) -> Any:
        return self.labels.get(v)

    @cached_property
    def components(self) -> np.ndarray:
        from scipy.sparse.csgraph import connected_components

        _, lab = connected_components(self.adjacency, directed=False)
        return lab

    def is_connected(self) -> bool:
        return self.n > 0 and int(self.components.max()) == 0

    def distances_from(self, source: int) -> np.ndarray:
        """BFS distances (as float, inf when unreachable) from vertex index."""
        from scipy.sparse.csgraph import shortest_path

        return shortest_path(self.adjacency, unweighted=True, indices=source)

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        from scipy.sparse.csgraph import shortest_path

        return shortest_path(self.adjacency, unweighted=True)

    # -- comparison and serialization -----------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.vertices == other.vertices
            and self.edges == other.edges
            and dict(self.measure) == dict(other.measure)
            and dict(self.labels) == dict(other.labels)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, m={self.m})"

    def with_measure(self, measure: Mapping[str, Number]) -> "WeightedGraph":
        return WeightedGraph.build(self.vertices, self.edges, measure, self.labels)

    def to_json(self) -> dict:
        verts = []
        for v in self.vertices:
            entry: dict[str, Any] = {"id": v}
            if v in self.labels:
                entry["label"] = self.labels[v]
            mu = self.measure[v]
            if isinstance(mu, Fraction):
                entry["mu"] = str(mu) if mu.denominator != 1 else int(mu)
            else:
                entry["mu"] = mu
            verts.append(entry)
        return {"vertices": verts, "edges": [list(e) for e in sorted(self.edges)]}

    @classmethod
    def from_json(cls, data: Any) -> "WeightedGraph":
        if not isinstance(data, dict) or "vertices" not in data or "edges" not in data:
            raise GraphFormatError("top level must be an object with 'vertices' and 'edges'")
        ids, mu, labels = [], {}, {}
        for i, entry in enumerate(data["vertices"]):
            if not isinstance(entry, dict) or "id" not in entry:
                raise GraphFormatError(f"vertices[{i}]: missing 'id'")
            vid = entry["id"]
            if not isinstance(vid, str):
                raise GraphFormatError(f"vertices[{i}].id: expected string")
            raw = entry.get("mu", 1)
            try:
                val = Fraction(raw) if isinstance(raw, str) else raw
                if not isinstance(val, (int, float, Fraction)) or isinstance(val, bool):
                    raise TypeError
            except (TypeError, ValueError, ZeroDivisionError):
                raise GraphFormatError(f"vertices[{i}].mu: not a number: {raw!r}") from None
            if val < 0:
                raise GraphFormatError(f"vertices[{i}].mu: negative measure {raw!r}")
            ids.append(vid)
            mu[vid] = val
            if "label" in entry:
                labels[vid] = entry["label"]
        if len(set(ids)) != len(ids):
            raise GraphFormatError("duplicate vertex id")
        edges = []
        for i, e in enumerate(data["edges"]):
            if not isinstance(e, list) or len(e) != 2 or not all(isinstance(x, str) for x in e):
                raise GraphFormatError(f"edges[{i}]: expected [str, str]")
            edges.append((e[0], e[1]))
        try:
            return cls.build(ids, edges, mu, labels, strict=True)
        except GraphFormatError as exc:
            raise GraphFormatError(f"edges: {exc}") from None


def write_graph(g: WeightedGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(g.to_json(), sort_keys=True) + "\n", encoding="utf-8")


def read_graph(path: str | Path) -> WeightedGraph:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"line {exc.lineno}: {exc.msg}") from None
    return WeightedGraph.from_json(data)


def graph_from_networkx(nxg, measure: Mapping | None = None) -> WeightedGraph:
    """Convert a networkx graph; node names become string ids."""
    verts = [str(v) for v in nxg.nodes]
    edges = [(str(a), str(b)) for a, b in nxg.edges]
    mu = None if measure is None else {str(k): v for k, v in measure.items()}
    return WeightedGraph.build(verts, edges, mu)


# ---------------------------------------------------------------------------
# small named graphs used throughout tests and examples

def path_graph(n: int) -> WeightedGraph:
    ids = [f"{i:04d}" for i in range(n)]
    return WeightedGraph.build(ids, zip(ids, ids[1:]), labels={v: {"pos": i} for i, v in enumerate(ids)})


def cycle_graph(n: int) -> WeightedGraph:
    ids = [f"{i:04d}" for i in range(n)]
    return WeightedGraph.build(ids, [(ids[i], ids[(i + 1) % n]) for i in range(n)])


def complete_graph(n: int) -> WeightedGraph:
    ids = [f"{i:04d}" for i in range(n)]
    return WeightedGraph.build(ids, [(a, b) for i, a in enumerate(ids) for b in ids[i + 1:]])


def star_graph(leaves: int) -> WeightedGraph:
    ids = [f"{i:04d}" for i in range(leaves + 1)]
    return WeightedGraph.build(ids, [(ids[0], b) for b in ids[1:]])


# ---------------------------------------------------------------------------
# pointed trees: vertex = (height, digits); the ray to the marked end is the
# all-zero digit string.  digits[i] is the child index of the ancestor at
# height h + i, trailing zeros stripped.

TreeVertex = tuple[int, tuple[int, ...]]


def _strip(d: tuple[int, ...]) -> tuple[int, ...]:
    end = len(d)
    while end and d[end - 1] == 0:
        end -= 1
    return d[:end]


def tree_parent(x: TreeVertex) -> TreeVertex:
    h, d = x
    return (h + 1, d[1:])


def tree_children(x: TreeVertex, q: int) -> list[TreeVertex]:
    h, d = x
    return [(h - 1, _strip((c,) + d)) for c in range(q)]


def tree_neighbors(x: TreeVertex, q: int) -> list[TreeVertex]:
    return [tree_parent(x)] + tree_children(x, q)


def tree_distance(x: TreeVertex, y: TreeVertex) -> int:
    """Distance in the (q+1)-regular tree from the address arithmetic."""
    (hx, dx), (hy, dy) = x, y
    low = min(hx, hy)
    # digit at absolute height j of x is dx[j - hx] (0 beyond the string)
    top = max(hx + len(dx), hy + len(dy))
    meet = max(hx, hy)
    for j in range(top - 1, low - 1, -1):
        ax = dx[j - hx] if 0 <= j - hx < len(dx) else 0
        ay = dy[j - hy] if 0 <= j - hy < len(dy) else 0
        if j >= max(hx, hy) and ax != ay:
            meet = max(meet, j + 1)
            break
    return (meet - hx) + (meet - hy)


def tree_vertex_id(x: TreeVertex) -> str:
    h, d = x
    return f"{h}:" + "".join(map(str, d))


# ---------------------------------------------------------------------------
# generators

def make_regular_tree(degree: int, depth: int) -> WeightedGraph:
    """Ball of radius ``depth`` around the root of the ``degree``-regular tree."""
    if degree < 3:
        raise ValueError("degree must be >= 3")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    verts, edges, labels = ["r"], [], {"r": {"depth": 0, "address": []}}
    frontier = [("r", ())]
    for level in range(1, depth + 1):
        nxt = []
        for vid, addr in frontier:
            kids = degree if level == 1 else degree - 1
            for c in range(kids):
                a = addr + (c,)
                cid = "r." + ".".join(map(str, a))
                verts.append(cid)
                edges.append((vid, cid))
                labels[cid] = {"depth": level, "address": list(a)}
                nxt.append((cid, a))
        frontier = nxt
    return WeightedGraph.build(verts, edges, labels=labels)


@dataclass(frozen=True)
class DLDescriptor:
    q1: int = 2
    q2: int = 2

    def __post_init__(self) -> None:
        if self.q1 < 2 or self.q2 < 2:
            raise ValueError("branching parameters must be >= 2")


def dl_neighbors(v: tuple[TreeVertex, TreeVertex], desc: DLDescriptor) -> list[tuple[TreeVertex, TreeVertex]]:
    x, y = v
    out = [(tree_parent(x), c) for c in tree_children(y, desc.q2)]
    out += [(c, tree_parent(y)) for c in tree_children(x, desc.q1)]
    return out


def _dl_id(v: tuple[TreeVertex, TreeVertex]) -> str:
    return tree_vertex_id(v[0]) + "|" + tree_vertex_id(v[1])


def _dl_label(v: tuple[TreeVertex, TreeVertex]) -> dict:
    (hx, dx), (hy, dy) = v
    return {"x": {"h": hx, "d": list(dx)}, "y": {"h": hy, "d": list(dy)}, "hx": hx, "hy": hy}


def dl_vertex_from_label(label: Mapping) -> tuple[TreeVertex, TreeVertex]:
    return ((label["x"]["h"], tuple(label["x"]["d"])), (label["y"]["h"], tuple(label["y"]["d"])))


def _bfs_ball(start, neighbors, radius: int):
    dist = {start: 0}
    order = [start]
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if dist[v] == radius:
            continue
        for w in neighbors(v):
            if w not in dist:
                dist[w] = dist[v] + 1
                order.append(w)
                queue.append(w)
    return dist


def _induced_from_keys(keys, neighbors, to_id, to_label) -> WeightedGraph:
    keyset = set(keys)
    ids = {k: to_id(k) for k in keys}
    edges = set()
    for k in keys:
        for w in neighbors(k):
            if w in keyset:
                a, b = ids[k], ids[w]
                edges.add((a, b) if a < b else (b, a))
    return WeightedGraph.build(ids.values(), edges, labels={ids[k]: to_label(k) for k in keys})


def make_dl_ball(desc: DLDescriptor, radius: int) -> WeightedGraph:
    """Ball of the given radius about the basepoint (v1, v2) in DL(q1, q2)."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    base = ((0, ()), (0, ()))
    dist = _bfs_ball(base, lambda v: dl_neighbors(v, desc), radius)
    g = _induced_from_keys(list(dist), lambda v: dl_neighbors(v, desc), _dl_id,
                           lambda v: {**_dl_label(v), "dist": dist[v]})
    return g


def _descendants(root: TreeVertex, depth: int, q: int) -> list[TreeVertex]:
    out = [root]
    for _ in range(depth):
        out = [c for x in out for c in tree_children(x, q)]
    return out


def gamma_k_vertices(k: int) -> list[tuple[TreeVertex, TreeVertex]]:
    """V_k: pairs (x, y) with x below o1 = (k, ()) and y below o2 = (0, ())."""
    o1, o2 = (k, ()), (0, ())
    verts = []
    for t in range(k + 1):
        xs = _descendants(o1, k - t, 2)
        ys = _descendants(o2, t, 2)
        verts.extend((x, y) for x in xs for y in ys)
    return verts


def make_dl_gamma_k(k: int) -> WeightedGraph:
    """Induced subgraph Gamma_k of DL(2,2); labels carry the level t = h(x)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    desc = DLDescriptor(2, 2)
    verts = gamma_k_vertices(k)
    return _induced_from_keys(verts, lambda v: dl_neighbors(v, desc), _dl_id,
                              lambda v: {**_dl_label(v), "level": v[0][0]})


def make_zd_box(d: int, side: int) -> WeightedGraph:
    if d < 1 or side < 1:
        raise ValueError("need d >= 1 and side >= 1")
    width = len(str(side - 1))
    pts = list(iproduct(range(side), repeat=d))

    def vid(p):
        return ",".join(f"{c:0{width}d}" for c in p)

    edges = []
    for p in pts:
        for axis in range(d):
            if p[axis] + 1 < side:
                q = p[:axis] + (p[axis] + 1,) + p[axis + 1:]
                edges.append((vid(p), vid(q)))
    return WeightedGraph.build([vid(p) for p in pts], edges, labels={vid(p): {"coords": list(p)} for p in pts})


def _heis_neighbors(g):
    a, b, c = g
    return [(a + 1, b, c), (a - 1, b, c), (a, b + 1, c + a), (a, b - 1, c - a)]


def make_heisenberg_ball(radius: int) -> WeightedGraph:
    """Cayley ball of the integer Heisenberg group, generators x^{+-1}, y^{+-1}."""
    dist = _bfs_ball((0, 0, 0), _heis_neighbors, radius)
    return _induced_from_keys(list(dist), _heis_neighbors, lambda g: "%d,%d,%d" % g,
                              lambda g: {"abc": list(g), "dist": dist[g]})


_SOL_A = np.array([[2, 1], [1, 1]], dtype=object)
_SOL_AINV = np.array([[1, -1], [-1, 2]], dtype=object)


def _sol_power(n: int):
    m = np.identity(2, dtype=object)
    base = _SOL_A if n >= 0 else _SOL_AINV
    for _ in range(abs(n)):
        m = m.dot(base)
    return m


_SOL_CACHE: dict[int, Any] = {}


def _sol_neighbors(g):
    v1, v2, n = g
    if n not in _SOL_CACHE:
        _SOL_CACHE[n] = _sol_power(n)
    a = _SOL_CACHE[n]
    out = []
    for i in range(2):
        col = (int(a[0, i]), int(a[1, i]))
        out.append((v1 + col[0], v2 + col[1], n))
        out.append((v1 - col[0], v2 - col[1], n))
    out.append((v1, v2, n + 1))
    out.append((v1, v2, n - 1))
    return out


def make_sol_lattice_ball(radius: int) -> WeightedGraph:
    """Cayley ball of Z^2 x|_A Z with A = [[2,1],[1,1]], generators e1, e2, t."""
    dist = _bfs_ball((0, 0, 0), _sol_neighbors, radius)
    return _induced_from_keys(list(dist), _sol_neighbors, lambda g: "%d,%d,%d" % g,
                              lambda g: {"v": [g[0], g[1]], "t": g[2], "dist": dist[g]})


def product(g: WeightedGraph, h: WeightedGraph) -> WeightedGraph:
    """Cartesian product; measure is the product measure, labels {"g","h"} hold factor ids."""
    if g.n == 0 or h.n == 0:
        raise ValueError("both factors must be nonempty")

    def pid(a, b):
        return f"{a}*{b}"

    verts = [pid(a, b) for a in g.vertices for b in h.vertices]
    edges = [(pid(a, b1), pid(a, b2)) for a in g.vertices for b1, b2 in h.edges]
    edges += [(pid(a1, b), pid(a2, b)) for a1, a2 in g.edges for b in h.vertices]
    mu = {pid(a, b): g.measure[a] * h.measure[b] for a in g.vertices for b in h.vertices}
    labels = {pid(a, b): {"g": a, "h": b} for a in g.vertices for b in h.vertices}
    return WeightedGraph.build(verts, edges, mu, labels)


def induced_subgraph(g: WeightedGraph, s: Iterable[str]) -> WeightedGraph:
    sset = set(s)
    missing = sset.difference(g.index)
    if missing:
        raise ValueError(f"vertices not in graph: {sorted(missing)[:5]}")
    edges = [e for e in g.edges if e[0] in sset and e[1] in sset]
    return WeightedGraph.build(sorted(sset), edges, {v: g.measure[v] for v in sset},
                               {v: g.labels[v] for v in sset if v in g.labels})


def is_connected_set(g: WeightedGraph, s: Iterable[str]) -> bool:
    sset = set(s)
    if not sset:
        return False
    return induced_subgraph(g, sset).is_connected()


# ---------------------------------------------------------------------------
# family specs

FAMILIES = ("tree", "dl", "zd_box", "heisenberg_ball", "sol_lattice_ball", "product", "cone", "dl_gamma_k")


@dataclass(frozen=True)
class FamilySpec:
    """A reproducible recipe for one graph of a family.

    ``params`` is a sorted tuple of (name, value) pairs so specs hash and
    compare by value.
    """

    family: str
    params: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")

    @classmethod
    def of(cls, family: str, **params: Any) -> "FamilySpec":
        return cls(family, tuple(sorted(params.items())))

    def get(self, key: str, default: Any = None) -> Any:
        return dict(self.params).get(key, default)

    def to_json(self) -> dict:
        return {"family": self.family, **dict(self.params)}


def build_family(spec: FamilySpec) -> WeightedGraph:
    f, get = spec.family, spec.get
    if f == "tree":
        return make_regular_tree(get("degree", 3), get("depth", 2))
    if f == "dl":
        return make_dl_ball(DLDescriptor(get("q1", 2), get("q2", 2)), get("radius", 2))
    if f == "dl_gamma_k":
        return make_dl_gamma_k(get("k", 2))
    if f == "zd_box":
        return make_zd_box(get("d", 2), get("side", 4))
    if f == "heisenberg_ball":
        return make_heisenberg_ball(get("radius", 2))
    if f == "sol_lattice_ball":
        return make_sol_lattice_ball(get("radius", 2))
    if f == "product":
        left = FamilySpec(get("left")[0], tuple(sorted(get("left")[1].items())))
        right = FamilySpec(get("right")[0], tuple(sorted(get("right")[1].items())))
        return product(build_family(left), build_family(right))
    if f == "cone":
        from .hypcone import ModelSpace, make_cone

        space = ModelSpace(get("space", "interval"))
        return make_cone(space, get("levels", 3)).graph
    raise ValueError(f"unhandled family {f!r}")


def random_connected_graph(n: int, rng: np.random.Generator, extra: float = 0.3) -> WeightedGraph:
    """Random spanning tree plus each remaining pair with probability ``extra``."""
    ids = [f"{i:02d}" for i in range(n)]
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.add((j, i))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra:
                edges.add((i, j))
    return WeightedGraph.build(ids, [(ids[a], ids[b]) for a, b in sorted(edges)])


def seeded_corpus(count: int, max_n: int, seed: int, min_n: int = 2) -> list[WeightedGraph]:
    """Deterministic corpus of random connected graphs with min_n..max_n vertices."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(min_n, max_n + 1))
        out.append(random_connected_graph(n, rng, float(rng.uniform(0.1, 0.6))))
    return out
