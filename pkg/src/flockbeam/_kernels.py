"""Compiled breadth-first kernels shared by the graph, centrality and sweep code.

All kernels take a CSR out-adjacency (``indptr``, ``indices``) over nodes
``0..n-1``. Hop arrays use -1 for unreachable nodes.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def bfs_hops(indptr, indices, source, limit):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    dist[source] = 0
    queue[0] = source
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        if limit >= 0 and du >= limit:
            continue
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if dist[w] < 0:
                dist[w] = du + 1
                queue[tail] = w
                tail += 1
    return dist


@njit(cache=True)
def bfs_hops_first(indptr, indices, source, first, limit):
    """BFS where the source's out-list is replaced by ``first``."""
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    dist[source] = 0
    tail = 0
    if limit != 0:
        for i in range(first.shape[0]):
            w = first[i]
            if dist[w] < 0:
                dist[w] = 1
                queue[tail] = w
                tail += 1
    head = 0
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        if limit >= 0 and du >= limit:
            continue
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if dist[w] < 0:
                dist[w] = du + 1
                queue[tail] = w
                tail += 1
    return dist


@njit(cache=True)
def multi_bfs(indptr, indices, sources, limit):
    n = indptr.shape[0] - 1
    out = np.empty((sources.shape[0], n), dtype=np.int32)
    for i in range(sources.shape[0]):
        out[i] = bfs_hops(indptr, indices, sources[i], limit)
    return out


@njit(cache=True)
def all_pairs_hops(indptr, indices):
    n = indptr.shape[0] - 1
    out = np.empty((n, n), dtype=np.int32)
    for s in range(n):
        out[s] = bfs_hops(indptr, indices, s, -1)
    return out


@njit(cache=True)
def brandes(indptr, indices):
    """Unnormalised betweenness over ordered pairs of a directed graph."""
    n = indptr.shape[0] - 1
    bc = np.zeros(n, dtype=np.float64)
    dist = np.empty(n, dtype=np.int32)
    sigma = np.empty(n, dtype=np.float64)
    delta = np.empty(n, dtype=np.float64)
    order = np.empty(n, dtype=np.int32)
    for s in range(n):
        dist[:] = -1
        sigma[:] = 0.0
        delta[:] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        order[0] = s
        head, tail = 0, 1
        while head < tail:
            u = order[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dist[u] + 1:
                    sigma[w] += sigma[u]
        # predecessors of w are the in-neighbours one level up; walk out-lists instead
        for i in range(tail - 1, -1, -1):
            u = order[i]
            for k in range(indptr[u], indptr[u + 1]):
                w = indices[k]
                if dist[w] == dist[u] + 1:
                    delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w])
            if u != s:
                bc[u] += delta[u]
    return bc


@njit(cache=True)
def neighbor_min(indptr, indices, values, fill):
    """Per-node minimum of ``values`` over out-neighbours (``fill`` if none)."""
    n = indptr.shape[0] - 1
    out = np.full(n, fill, dtype=values.dtype)
    for u in range(n):
        for k in range(indptr[u], indptr[u + 1]):
            x = values[indices[k]]
            if x < out[u]:
                out[u] = x
    return out


@njit(cache=True)
def sweep_hops(starts, ends, buf, source, cov_ptr, cov_idx, limit, targets):
    """Hop counts to ``targets`` for each candidate first hop set of ``source``.

    Node ``u``'s out-list is ``buf[starts[u]:ends[u]]``; candidate ``s`` replaces
    the source's out-list with ``cov_idx[cov_ptr[s]:cov_ptr[s + 1]]``.
    """
    k = cov_ptr.shape[0] - 1
    n = starts.shape[0]
    out = np.full((k, targets.shape[0]), -1, dtype=np.int32)
    dist = np.empty(n, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    for s in range(k):
        dist[:] = -1
        dist[source] = 0
        tail = 0
        if limit != 0:
            for i in range(cov_ptr[s], cov_ptr[s + 1]):
                w = cov_idx[i]
                if dist[w] < 0:
                    dist[w] = 1
                    queue[tail] = w
                    tail += 1
        head = 0
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u]
            if limit >= 0 and du >= limit:
                continue
            for j in range(starts[u], ends[u]):
                w = buf[j]
                if dist[w] < 0:
                    dist[w] = du + 1
                    queue[tail] = w
                    tail += 1
        for t in range(targets.shape[0]):
            out[s, t] = dist[targets[t]]
    return out
