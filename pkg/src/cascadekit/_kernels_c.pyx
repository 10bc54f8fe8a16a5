# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled BFS kernels over CSR graphs (hot path for depth and distance sums)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def bfs_depths(cnp.int32_t[::1] indptr, cnp.int32_t[::1] indices, int root, int n):
    """Shortest hop count from ``root`` to every node; -1 where unreachable."""
    depth = np.full(n, -1, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] d = depth
    cdef cnp.int32_t[::1] q = queue
    cdef Py_ssize_t head = 0, tail = 0
    cdef int u, v, du
    cdef cnp.int32_t j, end

    d[root] = 0
    q[tail] = root
    tail += 1
    while head < tail:
        u = q[head]
        head += 1
        du = d[u] + 1
        end = indptr[u + 1]
        for j in range(indptr[u], end):
            v = indices[j]
            if d[v] < 0:
                d[v] = du
                q[tail] = v
                tail += 1
    return depth


def bfs_distance_stats(cnp.int32_t[::1] indptr, cnp.int32_t[::1] indices,
                       sources, int n):
    """Per-source sum of finite BFS distances and count of reached nodes.

    Uses stamped visit marks so per-source cost is O(visited), not O(n).
    """
    src_arr = np.ascontiguousarray(sources, dtype=np.int32)
    cdef cnp.int32_t[::1] src = src_arr
    cdef Py_ssize_t ns = src.shape[0]

    sums = np.zeros(ns, dtype=np.int64)
    reached = np.zeros(ns, dtype=np.int64)
    cdef cnp.int64_t[::1] sums_v = sums
    cdef cnp.int64_t[::1] reached_v = reached

    dist = np.zeros(n, dtype=np.int32)
    mark = np.zeros(n, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] d = dist
    cdef cnp.int32_t[::1] m = mark
    cdef cnp.int32_t[::1] q = queue

    cdef Py_ssize_t i, head, tail
    cdef int s, u, v, du, stamp
    cdef cnp.int32_t j, end
    cdef cnp.int64_t total, count

    for i in range(ns):
        s = src[i]
        stamp = <int> i + 1
        head = 0
        tail = 0
        d[s] = 0
        m[s] = stamp
        q[tail] = s
        tail += 1
        total = 0
        count = 0
        while head < tail:
            u = q[head]
            head += 1
            total += d[u]
            count += 1
            du = d[u] + 1
            end = indptr[u + 1]
            for j in range(indptr[u], end):
                v = indices[j]
                if m[v] != stamp:
                    m[v] = stamp
                    d[v] = du
                    q[tail] = v
                    tail += 1
        sums_v[i] = total
        reached_v[i] = count
    return sums, reached
