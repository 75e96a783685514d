"""Compiled inner loops (BFS path loads, sweep boundaries)."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def uniform_geodesic_load(indptr, indices, edge_of, n, m, expo):
    """Per-edge load of the uniform all-geodesics family.

    Every unordered pair {v, w} spreads weight d(v,w)**expo uniformly over
    all its geodesics; the returned array is the summed fractional use of
    each edge.  With expo = 0 this is the usual edge betweenness.
    """
    load = np.zeros(m)
    dist = np.empty(n, np.int64)
    sigma = np.empty(n)
    delta = np.empty(n)
    order = np.empty(n, np.int64)
    for s in range(n):
        for i in range(n):
            dist[i] = -1
            sigma[i] = 0.0
            delta[i] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            v = order[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        for i in range(tail - 1, 0, -1):
            w = order[i]
            coeff = (float(dist[w]) ** expo + delta[w]) / sigma[w]
            for k in range(indptr[w], indptr[w + 1]):
                v = indices[k]
                if dist[v] == dist[w] - 1:
                    c = sigma[v] * coeff
                    load[edge_of[k]] += c
                    delta[v] += c
    return load / 2.0


@njit(cache=True)
def single_geodesic_load(indptr, indices, edge_of, n, m, expo):
    """Per-edge load when each pair {v < w} uses one BFS geodesic from v.

    The predecessor of a vertex is its smallest-index neighbor one step
    closer to the source, so the choice is deterministic.
    """
    load = np.zeros(m)
    dist = np.empty(n, np.int64)
    order = np.empty(n, np.int64)
    pred = np.empty(n, np.int64)
    pedge = np.empty(n, np.int64)
    acc = np.empty(n)
    for s in range(n):
        for i in range(n):
            dist[i] = -1
            acc[i] = 0.0
        dist[s] = 0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            v = order[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    order[tail] = w
                    tail += 1
        for i in range(1, tail):
            w = order[i]
            for k in range(indptr[w], indptr[w + 1]):
                v = indices[k]
                if dist[v] == dist[w] - 1:
                    pred[w] = v
                    pedge[w] = edge_of[k]
                    break
        for i in range(tail - 1, 0, -1):
            w = order[i]
            if w > s:
                acc[w] += float(dist[w]) ** expo
            load[pedge[w]] += acc[w]
            acc[pred[w]] += acc[w]
    return load


@njit(cache=True)
def sweep_boundary(indptr, indices, order):
    """b[k] = inner plus outer vertex boundary of the first k vertices of order."""
    n = order.shape[0]
    ins = np.zeros(n, np.bool_)
    nin = np.zeros(n, np.int64)
    nout = np.zeros(n, np.int64)
    b = np.zeros(n + 1, np.int64)
    cur = 0
    for i in range(n):
        v = order[i]
        if nin[v] > 0:
            cur -= 1
        deg = indptr[v + 1] - indptr[v]
        ins[v] = True
        nout[v] = deg - nin[v]
        if nout[v] > 0:
            cur += 1
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            if ins[w]:
                nout[w] -= 1
                if nout[w] == 0:
                    cur -= 1
            else:
                nin[w] += 1
                if nin[w] == 1:
                    cur += 1
        b[i + 1] = cur
    return b


@njit(cache=True)
def sweep_boundary_measure(indptr, indices, order, mu):
    """Like sweep_boundary but sums the vertex measure of boundary vertices."""
    n = order.shape[0]
    ins = np.zeros(n, np.bool_)
    nin = np.zeros(n, np.int64)
    nout = np.zeros(n, np.int64)
    b = np.zeros(n + 1)
    cur = 0.0
    for i in range(n):
        v = order[i]
        if nin[v] > 0:
            cur -= mu[v]
        deg = indptr[v + 1] - indptr[v]
        ins[v] = True
        nout[v] = deg - nin[v]
        if nout[v] > 0:
            cur += mu[v]
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            if ins[w]:
                nout[w] -= 1
                if nout[w] == 0:
                    cur -= mu[w]
            else:
                nin[w] += 1
                if nin[w] == 1:
                    cur += mu[w]
        b[i + 1] = cur
    return b



@njit(cache=True)
def axis_order_load(coords, step_vertex, step_edge, m, perms, expo):
    """Per-edge load of axis-order routing on a coordinate graph.

    ``step_vertex[v, a, s]`` / ``step_edge[v, a, s]`` give the vertex and
    edge one unit down (s = 0) or up (s = 1) along axis a, or -1.  Each pair
    averages over the axis orders in ``perms``.  Returns (load, ok); ok is
    False when a required step is missing.
    """
    n, d = coords.shape
    load = np.zeros(m)
    w = 1.0 / perms.shape[0]
    for x in range(n):
        for y in range(x + 1, n):
            length = 0
            for a in range(d):
                length += abs(coords[y, a] - coords[x, a])
            c = w * float(length) ** expo
            for r in range(perms.shape[0]):
                v = x
                for j in range(d):
                    a = perms[r, j]
                    up = 1 if coords[y, a] > coords[x, a] else 0
                    for _ in range(abs(coords[y, a] - coords[x, a])):
                        e = step_edge[v, a, up]
                        if e < 0:
                            return load, False
                        load[e] += c
                        v = step_vertex[v, a, up]
    return load, True


@njit(cache=True)
def _sift_up(heap, pos, key, i):
    v = heap[i]
    while i > 0:
        p = (i - 1) >> 1
        u = heap[p]
        if key[u] <= key[v]:
            break
        heap[i] = u
        pos[u] = i
        i = p
    heap[i] = v
    pos[v] = i


@njit(cache=True)
def _sift_down(heap, pos, key, i, size):
    v = heap[i]
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and key[heap[c + 1]] < key[heap[c]]:
            c += 1
        u = heap[c]
        if key[v] <= key[u]:
            break
        heap[i] = u
        pos[u] = i
        i = c
    heap[i] = v
    pos[v] = i


@njit(cache=True)
def cheapest_path_interior_load(indptr, indices, n, price):
    """Route every pair {s < w} along a cheapest path for vertex prices.

    A path costs the sum of prices of its vertices after s.  Returns, per
    vertex, the number of routed pairs having it as an interior vertex.
    Ties break by heap order, which is deterministic.
    """
    charge = np.zeros(n)
    dist = np.empty(n)
    par = np.empty(n, np.int64)
    order = np.empty(n, np.int64)
    heap = np.empty(n, np.int64)
    pos = np.empty(n, np.int64)
    below = np.empty(n)
    for s in range(n):
        for i in range(n):
            dist[i] = np.inf
            par[i] = -1
            pos[i] = -1
            below[i] = 0.0
        dist[s] = 0.0
        heap[0] = s
        pos[s] = 0
        size = 1
        k = 0
        while size > 0:
            v = heap[0]
            size -= 1
            pos[v] = -2
            if size > 0:
                heap[0] = heap[size]
                pos[heap[0]] = 0
                _sift_down(heap, pos, dist, 0, size)
            order[k] = v
            k += 1
            d = dist[v]
            for j in range(indptr[v], indptr[v + 1]):
                w = indices[j]
                if pos[w] == -2:
                    continue
                nd = d + price[w]
                if nd < dist[w]:
                    dist[w] = nd
                    par[w] = v
                    if pos[w] == -1:
                        heap[size] = w
                        pos[w] = size
                        size += 1
                    _sift_up(heap, pos, dist, pos[w])
        for i in range(k - 1, 0, -1):
            v = order[i]
            charge[v] += below[v]
            below[par[v]] += below[v] + (1.0 if v > s else 0.0)
    return charge
