"""Growth-curve normalization and K-Means clustering of cascade dynamics.

Each cascade's growth-rate series is mapped onto a fixed grid: the time
axis is rescaled to [0, 1] (relative position within the cascade's life)
with mass-preserving rebinning, and values are scaled by their maximum
(shape). Lloyd's K-Means with k-means++ seeding and restarts then groups
the normalized curves by global shape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cascade import GrowthSeries


@dataclass(frozen=True)
class NormalizedSeries:
    """Max-scaled growth curve on a uniform [0, 1] grid; max(values) == 1."""

    cascade_id: str
    values: np.ndarray


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, grid_size)
    assignments: dict[str, int]
    inertia: float
    seed: int
    n_iter: int
    inertia_trace: tuple[float, ...]

    @property
    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for idx in self.assignments.values():
            counts[idx] += 1
        return counts


def _rebin_mass(counts: np.ndarray, grid_size: int) -> np.ndarray:
    """Redistribute bucket counts onto ``grid_size`` cells over the same span.

    Mass within a source bucket is treated as uniform, so overlap fractions
    are exact and the total is conserved.
    """
    nb = counts.shape[0]
    counts = counts.astype(np.float64)
    cum = np.concatenate(([0.0], np.cumsum(counts)))
    edges = np.linspace(0.0, nb, grid_size + 1)
    idx = np.minimum(np.floor(edges).astype(np.int64), nb)
    frac = edges - idx
    inner = np.where(idx < nb, counts[np.minimum(idx, nb - 1)], 0.0)
    cum_at_edges = cum[idx] + frac * inner
    return np.diff(cum_at_edges)


def normalize(series: GrowthSeries, grid_size: int = 100) -> NormalizedSeries:
    """Lifetime-normalized, max-scaled growth curve on a fixed grid.

    Raises on degenerate input (zero lifetime or empty series).
    """
    if grid_size < 1:
        raise ValueError("grid_size must be at least 1")
    if series.degenerate:
        raise ValueError(
            f"degenerate series for cascade {series.cascade_id}: zero lifetime")
    total = series.counts.sum()
    if total <= 0:
        raise ValueError(f"empty series for cascade {series.cascade_id}")
    values = _rebin_mass(series.counts, grid_size)
    return NormalizedSeries(series.cascade_id, values / values.max())


def kmeans(series_set, k: int, seed: int = 0, max_iter: int = 100,
           n_init: int = 10) -> ClusterModel:
    """Lloyd's iteration with k-means++ seeding and ``n_init`` restarts.

    Empty clusters are repaired by reseeding from the point farthest from
    its assigned centroid. Inertia is non-increasing across iterations
    within each restart; the best restart wins.
    """
    series = list(series_set)
    n = len(series)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of series ({n})")
    X = np.stack([s.values for s in series])
    ids = [s.cascade_id for s in series]

    root = np.random.SeedSequence(seed)
    best = None
    for child in root.spawn(n_init):
        rng = np.random.default_rng(child)
        result = _lloyd(X, k, rng, max_iter)
        if best is None or result[2] < best[2]:
            best = result
    centroids, labels, inertia, n_iter, trace = best
    assignments = {cid: int(lbl) for cid, lbl in zip(ids, labels)}
    return ClusterModel(k, centroids, assignments, float(inertia), seed,
                        n_iter, tuple(trace))


def _plus_plus_init(X: np.ndarray, k: int, rng) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    closest = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[j] = X[rng.integers(n)]
            continue
        probs = closest / total
        centroids[j] = X[rng.choice(n, p=probs)]
        closest = np.minimum(closest, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _lloyd(X: np.ndarray, k: int, rng, max_iter: int):
    n = X.shape[0]
    centroids = _plus_plus_init(X, k, rng)
    labels = np.full(n, -1)
    trace = []
    for it in range(1, max_iter + 1):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        # repair empty clusters from the farthest point
        for j in range(k):
            if not (new_labels == j).any():
                far = d2[np.arange(n), new_labels].argmax()
                centroids[j] = X[far]
                d2[:, j] = ((X - centroids[j]) ** 2).sum(axis=1)
                new_labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), new_labels].sum())
        trace.append(inertia)
        changed = not np.array_equal(new_labels, labels)
        labels = new_labels
        for j in range(k):
            members = X[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
        if not changed:
            break
    return centroids, labels, trace[-1], it, trace


def write_cluster_json(path_or_fh, model: ClusterModel) -> None:
    payload = json.dumps({
        "k": model.k,
        "seed": model.seed,
        "inertia": model.inertia,
        "centroids": [[float(v) for v in row] for row in model.centroids],
        "sizes": model.sizes,
    }, indent=2)
    if hasattr(path_or_fh, "write"):
        path_or_fh.write(payload + "\n")
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")


def write_assignments_tsv(path_or_fh, model: ClusterModel) -> None:
    def _write(fh):
        fh.write("cascade_id\tcluster\n")
        for cid in sorted(model.assignments):
            fh.write(f"{cid}\t{model.assignments[cid]}\n")

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            _write(fh)
