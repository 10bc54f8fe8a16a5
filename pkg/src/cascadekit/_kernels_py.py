"""Pure-python (numpy) BFS kernels; fallback when the compiled extension is absent.

Same contracts as the extension module: CSR graphs with int32 indptr/indices,
level-synchronous traversal. Correct but several times slower than the
compiled path on large cascades.
"""

import numpy as np


def bfs_depths(indptr, indices, root, n):
    """Shortest hop count from ``root`` to every node; -1 where unreachable."""
    depth = np.full(n, -1, dtype=np.int32)
    depth[root] = 0
    frontier = np.array([root], dtype=np.int32)
    level = 0
    while frontier.size:
        level += 1
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        # gather neighbours of the whole frontier in one shot
        base = np.repeat(starts.astype(np.int64), counts)
        offsets = np.arange(total, dtype=np.int64) - np.repeat(
            np.cumsum(counts, dtype=np.int64) - counts, counts)
        nbrs = indices[base + offsets]
        nbrs = nbrs[depth[nbrs] < 0]
        if nbrs.size == 0:
            break
        frontier = np.unique(nbrs)
        depth[frontier] = level
    return depth


def bfs_distance_stats(indptr, indices, sources, n):
    """Per-source sum of finite BFS distances and count of reached nodes.

    Returns (sums, reached) as int64 arrays aligned with ``sources``; the
    source itself counts as reached at distance 0.
    """
    sources = np.asarray(sources, dtype=np.int32)
    sums = np.zeros(sources.shape[0], dtype=np.int64)
    reached = np.zeros(sources.shape[0], dtype=np.int64)
    for i, s in enumerate(sources):
        depth = bfs_depths(indptr, indices, int(s), n)
        mask = depth >= 0
        sums[i] = int(depth[mask].sum(dtype=np.int64))
        reached[i] = int(mask.sum())
    return sums, reached
