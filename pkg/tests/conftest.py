"""Shared test fixtures and independent oracles.

The oracles here (Floyd-Warshall distances, dict-based BFS, contingency
ARI) are deliberately naive and separate from the library's code paths.
"""

import numpy as np
import pytest

from cascadekit.cascade import CascadeBuilder, RetweetEvent


def events_from_edges(edges, root="r", cascade_id="t", loops=(),
                      extra_actors=()):
    """Event list for a cascade given (source, actor) retweet pairs.

    Timestamps increase by one per event, so silhouettes are deterministic.
    """
    t = 0
    events = [RetweetEvent(cascade_id, f"{cascade_id}:p0", root, None, t)]
    for i, (u, v) in enumerate(edges, start=1):
        t += 1
        events.append(RetweetEvent(cascade_id, f"{cascade_id}:p{i}", v, u, t))
    for j, (u,) in enumerate(loops):
        t += 1
        events.append(RetweetEvent(cascade_id, f"{cascade_id}:loop{j}", u, u, t))
    return events


def cascade_from_edges(edges, root="r", cascade_id="t", loops=()):
    """CascadeGraph built from (source, actor) pairs; actor retweets source."""
    builder = CascadeBuilder()
    for i, ev in enumerate(events_from_edges(edges, root, cascade_id, loops)):
        builder.add(ev, i + 1)
    result = builder.finish()
    assert not result.rejects, result.rejects
    (c,) = result.cascades
    return c


def random_tree_cascade(n, rng, cascade_id="t"):
    """Uniform random recursive tree: node i attaches to a random earlier node."""
    parents = (rng.random(n - 1) * np.arange(1, n)).astype(int)
    edges = [(f"u{p}", f"u{i}") for i, p in zip(range(1, n), parents)]
    return cascade_from_edges(edges, root="u0", cascade_id=cascade_id)


def undirected_adjacency(c):
    """Simple undirected adjacency sets keyed by node index (oracle view)."""
    adj = {i: set() for i in range(c.n_nodes)}
    for s, d in zip(c.edge_src, c.edge_dst):
        if s != d:
            adj[int(s)].add(int(d))
            adj[int(d)].add(int(s))
    return adj


def floyd_warshall_mean_distance(c):
    """O(N^3) all-pairs mean distance oracle on the undirected simple view."""
    n = c.n_nodes
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for s, d in zip(c.edge_src, c.edge_dst):
        if s != d:
            dist[s, d] = dist[d, s] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    off = ~np.eye(n, dtype=bool)
    finite = np.isfinite(dist) & off
    return dist[finite].mean() if finite.any() else 0.0


def dict_bfs_depths(c):
    """Reference BFS over the deduplicated directed view (loops ignored)."""
    adj = {i: [] for i in range(c.n_nodes)}
    for s, d in zip(c.edge_src, c.edge_dst):
        if s != d:
            adj[int(s)].append(int(d))
    depth = {c.root_index: 0}
    frontier = [c.root_index]
    level = 0
    while frontier:
        level += 1
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in depth:
                    depth[v] = level
                    nxt.append(v)
        frontier = nxt
    return depth


def adjusted_rand_index(labels_a, labels_b):
    """Contingency-table ARI (independent of any clustering library)."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(len(a))
    expected = sum_rows * sum_cols / total
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return (sum_cells - expected) / (max_index - expected)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
