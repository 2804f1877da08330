"""Hot numeric kernels: disk counting and multi-source Dijkstra.

Each kernel has a numba-compiled implementation and a numpy/heapq fallback.
The backend is chosen by the ``EMSACCESS_NUMBA`` environment variable
(``0``/``false``/``off`` forces the fallback) or per call via ``backend=``.
Both paths produce bit-identical output.
"""
from __future__ import annotations

import heapq
import os

import numpy as np

try:
    import numba as nb
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    nb = None

_FALSY = {"0", "false", "off", "no"}


def numba_enabled() -> bool:
    if nb is None:
        return False
    return os.environ.get("EMSACCESS_NUMBA", "1").strip().lower() not in _FALSY


def _resolve(backend):
    if backend is None:
        return "numba" if numba_enabled() else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and nb is None:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


def _njit(**kw):
    if nb is None:
        return lambda f: f
    return nb.njit(cache=True, nogil=True, **kw)


# ---------------------------------------------------------------------------
# radius counting
# ---------------------------------------------------------------------------

def _bucket_points(points, origin, cell):
    """Sort points into square buckets of side ``cell``.

    Returns (ncx, ncy, cell_start, order) where bucket ``b`` holds
    ``points[order[cell_start[b]:cell_start[b + 1]]]``.
    """
    ij = np.floor((points - origin) / cell).astype(np.int64)
    ncx = int(ij[:, 0].max()) + 1 if len(points) else 1
    ncy = int(ij[:, 1].max()) + 1 if len(points) else 1
    flat = ij[:, 0] * ncy + ij[:, 1]
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=ncx * ncy)
    cell_start = np.zeros(ncx * ncy + 1, dtype=np.int64)
    np.cumsum(counts, out=cell_start[1:])
    return ncx, ncy, cell_start, order.astype(np.int64)


@_njit()
def _radius_counts_nb(qx, qy, px, py, origin_x, origin_y, cell, ncx, ncy,
                      cell_start, order, r2):
    out = np.zeros(qx.shape[0], dtype=np.int64)
    for k in range(qx.shape[0]):
        x = qx[k]
        y = qy[k]
        ci = int(np.floor((x - origin_x) / cell))
        cj = int(np.floor((y - origin_y) / cell))
        c = 0
        for i in range(max(ci - 1, 0), min(ci + 2, ncx)):
            for j in range(max(cj - 1, 0), min(cj + 2, ncy)):
                b = i * ncy + j
                for t in range(cell_start[b], cell_start[b + 1]):
                    p = order[t]
                    dx = px[p] - x
                    dy = py[p] - y
                    if dx * dx + dy * dy <= r2:
                        c += 1
        out[k] = c
    return out


def _radius_counts_np(queries, points, radius, chunk=2048):
    r2 = radius * radius
    px = points[:, 0]
    py = points[:, 1]
    out = np.zeros(len(queries), dtype=np.int64)
    for s in range(0, len(queries), chunk):
        q = queries[s:s + chunk]
        dx = px[None, :] - q[:, 0:1]
        dy = py[None, :] - q[:, 1:2]
        out[s:s + chunk] = np.count_nonzero(dx * dx + dy * dy <= r2, axis=1)
    return out


def radius_counts(queries, points, radius, backend=None):
    """Number of ``points`` within Euclidean distance ``radius`` of each query.

    The disk is closed (distance == radius counts).
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, 2)
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    if len(points) == 0 or len(queries) == 0:
        return np.zeros(len(queries), dtype=np.int64)
    if _resolve(backend) == "numpy":
        return _radius_counts_np(queries, points, float(radius))
    origin = points.min(axis=0)
    # slightly oversized cells keep every in-radius point within +-1 bucket
    # despite rounding in the bucket index computation
    cell = float(radius) * (1.0 + 1e-6)
    ncx, ncy, cell_start, order = _bucket_points(points, origin, cell)
    return _radius_counts_nb(
        np.ascontiguousarray(queries[:, 0]), np.ascontiguousarray(queries[:, 1]),
        np.ascontiguousarray(points[:, 0]), np.ascontiguousarray(points[:, 1]),
        float(origin[0]), float(origin[1]), cell, ncx, ncy,
        cell_start, order, float(radius) * float(radius),
    )


# ---------------------------------------------------------------------------
# multi-source Dijkstra on CSR adjacency
# ---------------------------------------------------------------------------

@_njit()
def _heap_less(hd, hn, a, b):
    if hd[a] < hd[b]:
        return True
    if hd[a] > hd[b]:
        return False
    return hn[a] < hn[b]


@_njit()
def _dijkstra_nb(indptr, indices, weights, sources, n):
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    cap = indices.shape[0] + sources.shape[0] + 1
    hd = np.empty(cap, dtype=np.float64)
    hn = np.empty(cap, dtype=np.int64)
    size = 0
    for s in sources:
        if dist[s] > 0.0:
            dist[s] = 0.0
            # sift up
            k = size
            hd[k] = 0.0
            hn[k] = s
            size += 1
            while k > 0:
                p = (k - 1) // 2
                if _heap_less(hd, hn, k, p):
                    hd[k], hd[p] = hd[p], hd[k]
                    hn[k], hn[p] = hn[p], hn[k]
                    k = p
                else:
                    break
    while size > 0:
        d = hd[0]
        u = hn[0]
        size -= 1
        hd[0] = hd[size]
        hn[0] = hn[size]
        k = 0
        while True:
            lft = 2 * k + 1
            if lft >= size:
                break
            m = lft
            if lft + 1 < size and _heap_less(hd, hn, lft + 1, lft):
                m = lft + 1
            if _heap_less(hd, hn, m, k):
                hd[k], hd[m] = hd[m], hd[k]
                hn[k], hn[m] = hn[m], hn[k]
                k = m
            else:
                break
        if done[u]:
            continue
        done[u] = True
        for t in range(indptr[u], indptr[u + 1]):
            v = indices[t]
            if done[v]:
                continue
            nd = d + weights[t]
            if nd < dist[v]:
                dist[v] = nd
                k = size
                hd[k] = nd
                hn[k] = v
                size += 1
                while k > 0:
                    p = (k - 1) // 2
                    if _heap_less(hd, hn, k, p):
                        hd[k], hd[p] = hd[p], hd[k]
                        hn[k], hn[p] = hn[p], hn[k]
                        k = p
                    else:
                        break
    return dist


def _dijkstra_py(indptr, indices, weights, sources, n):
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    heap = []
    for s in sources:
        s = int(s)
        if dist[s] > 0.0:
            dist[s] = 0.0
            heapq.heappush(heap, (0.0, s))
    ip = indptr.tolist()
    ix = indices.tolist()
    w = weights.tolist()
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for t in range(ip[u], ip[u + 1]):
            v = ix[t]
            if done[v]:
                continue
            nd = d + w[t]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def multi_source_dijkstra(indptr, indices, weights, sources, n, backend=None):
    """Shortest distance from the nearest of ``sources`` to every node.

    ``indptr``/``indices``/``weights`` are a CSR out-adjacency (parallel arcs
    allowed). Unreached nodes get ``inf``. Heap ties break on node index.
    """
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    sources = np.ascontiguousarray(sources, dtype=np.int64)
    if _resolve(backend) == "numpy":
        return _dijkstra_py(indptr, indices, weights, sources, int(n))
    return _dijkstra_nb(indptr, indices, weights, sources, int(n))
