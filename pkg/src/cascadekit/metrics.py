"""The ten structural metrics of a cascade, plus direction-type classification.

Size: mass N (unique users), length L (largest depth), breadth B (widest
level). Silhouette: trend (Wiener index, the mean shortest distance over
node pairs in the undirected view) and fluctuation (coefficient of variation
of the breadth-by-depth histogram). Direction: branch deviation (CV of
out-degrees), converge deviation (CV of in-degrees, loops excluded),
reciprocity, self-loop ratio. Activity: retweets per unique user.

Coefficients of variation use the sample standard deviation (n-1); that is
the convention under which a star of N nodes has branch deviation exactly
sqrt(N) and fluctuation sqrt(2)(1 - 2/N). Degree sequences count distinct
neighbours, ignoring multi-edge weights.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels
from .cascade import CascadeGraph, DepthAssignment, compute_depths


@dataclass(frozen=True)
class Silhouette:
    """Breadth histogram along depth: breadth_by_depth[d] = B(d), B(0) = 1."""

    breadth_by_depth: np.ndarray

    @property
    def length(self) -> int:
        return len(self.breadth_by_depth) - 1


@dataclass(frozen=True)
class DirectionFlags:
    has_converge: bool
    has_reciprocal: bool
    has_self_loop: bool

    def combo(self) -> str:
        parts = [name for name, on in (("converge", self.has_converge),
                                       ("reciprocal", self.has_reciprocal),
                                       ("self_loop", self.has_self_loop)) if on]
        return "+".join(parts) if parts else "none"


@dataclass(frozen=True)
class MetricVector:
    cascade_id: str
    mass: int
    length: int
    breadth: int
    trend: float
    fluctuation: float
    branch_deviation: float
    converge_deviation: float
    reciprocity: float
    self_loop_ratio: float
    avg_activity: float
    reciprocal_edge_count: int
    self_loop_count: int
    post_count: int
    has_converge: bool
    has_reciprocal: bool
    has_self_loop: bool

    @property
    def flags(self) -> DirectionFlags:
        return DirectionFlags(self.has_converge, self.has_reciprocal,
                              self.has_self_loop)


NUMERIC_FIELDS = ("mass", "length", "breadth", "trend", "fluctuation",
                  "branch_deviation", "converge_deviation", "reciprocity",
                  "self_loop_ratio", "avg_activity", "reciprocal_edge_count",
                  "self_loop_count", "post_count")
FLAG_FIELDS = ("has_converge", "has_reciprocal", "has_self_loop")
_INT_FIELDS = {"mass", "length", "breadth", "reciprocal_edge_count",
               "self_loop_count", "post_count"}


@dataclass(frozen=True)
class MetricConfig:
    """Knobs for corpus-wide metric computation.

    Cascades larger than ``exact_threshold`` get a sampled Wiener index with
    ``sample_sources`` BFS roots; the sample is seeded per cascade from
    ``seed`` and the cascade id, so results do not depend on processing
    order. ``include_original_post`` switches average activity to the
    post-inclusive variant.
    """

    exact_threshold: int = 10_000
    sample_sources: int = 1_000
    seed: int = 0
    include_original_post: bool = False


def cascade_seed(seed: int, cascade_id: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, zlib.crc32(cascade_id.encode())])


def silhouette(d: DepthAssignment) -> Silhouette:
    """Breadth per depth level over root-reachable nodes."""
    finite = d.depth[d.depth >= 0]
    return Silhouette(np.bincount(finite))


def size_metrics(c: CascadeGraph, d: DepthAssignment) -> tuple[int, int, int]:
    """(mass, length, breadth). Mass counts unreachable nodes too."""
    s = silhouette(d)
    return c.n_nodes, s.length, int(s.breadth_by_depth.max())


def _sample_cv(values: np.ndarray) -> float:
    """Sample coefficient of variation (std with n-1 over mean)."""
    n = values.size
    if n < 2:
        return 0.0
    mean = values.sum() / n
    if mean == 0:
        return 0.0
    centered = values - mean
    var = (centered @ centered) / (n - 1)
    return float(math.sqrt(var) / mean)


def wiener_trend(c: CascadeGraph, exact_threshold: int = 10_000,
                 sample_sources: int = 1_000, seed=0) -> float:
    """Mean shortest distance between node pairs in the undirected view.

    Exact (all-source BFS) up to ``exact_threshold`` nodes, otherwise an
    unbiased estimate from ``sample_sources`` uniformly sampled BFS roots.
    Pairs are averaged over reachable (source, target) combinations, so a
    disconnected cascade averages within components. Returns 0.0 for
    single-node cascades (degenerate).
    """
    n = c.n_nodes
    if n < 2:
        return 0.0
    indptr, indices = c.undirected_csr()
    if n <= exact_threshold or sample_sources >= n:
        sources = np.arange(n, dtype=np.int32)
    else:
        rng = np.random.default_rng(seed)
        sources = np.sort(rng.choice(n, size=sample_sources,
                                     replace=False).astype(np.int32))
    sums, reached = kernels.bfs_distance_stats(indptr, indices, sources, n)
    pairs = int((reached - 1).sum())
    if pairs <= 0:
        return 0.0
    return float(sums.sum() / pairs)


def silhouette_fluctuation(s: Silhouette) -> float:
    """Sample CV of B(0..L); 0.0 when the cascade has a single level."""
    if s.length < 1:
        return 0.0
    return _sample_cv(s.breadth_by_depth.astype(np.float64))


def _nonloop_mask(c: CascadeGraph) -> np.ndarray:
    return c.edge_src != c.edge_dst


def out_degrees(c: CascadeGraph) -> np.ndarray:
    """Distinct retweeters per user, loops ignored."""
    m = _nonloop_mask(c)
    return np.bincount(c.edge_src[m], minlength=c.n_nodes)


def in_degrees(c: CascadeGraph) -> np.ndarray:
    """Distinct users each user retweeted, loops excluded."""
    m = _nonloop_mask(c)
    return np.bincount(c.edge_dst[m], minlength=c.n_nodes)


def branch_deviation(c: CascadeGraph) -> float:
    """Sample CV of the out-degree sequence; a star of N nodes gives sqrt(N)."""
    if c.n_nodes < 2:
        return 0.0
    return _sample_cv(out_degrees(c).astype(np.float64))


def converge_deviation(c: CascadeGraph) -> float:
    """Sample CV of the in-degree sequence (loops excluded)."""
    if c.n_nodes < 2:
        return 0.0
    return _sample_cv(in_degrees(c).astype(np.float64))


def _count_reciprocal(src: np.ndarray, dst: np.ndarray, n: int) -> int:
    """Ordered non-loop pairs whose reverse pair is also present."""
    if len(src) == 0:
        return 0
    fwd = src.astype(np.int64) * n + dst
    rev = dst.astype(np.int64) * n + src
    if len(fwd) < 64:  # set intersection beats isin on tiny edge lists
        return len(set(fwd.tolist()) & set(rev.tolist()))
    return int(np.isin(fwd, rev, assume_unique=True).sum())


def _reciprocal_count(c: CascadeGraph) -> int:
    """Ordered pairs (u, v), u != v, whose reverse edge also exists."""
    m = _nonloop_mask(c)
    return _count_reciprocal(c.edge_src[m], c.edge_dst[m], c.n_nodes)


def reciprocity(c: CascadeGraph) -> float:
    """Reciprocal ordered pairs over all distinct edges (loops in denominator)."""
    if c.n_edges == 0:
        return 0.0
    return _reciprocal_count(c) / c.n_edges


def self_loop_count(c: CascadeGraph) -> int:
    return int((~_nonloop_mask(c)).sum())


def self_loop_ratio(c: CascadeGraph) -> float:
    """Fraction of users that retweeted themselves."""
    return self_loop_count(c) / c.n_nodes


def average_activity(c: CascadeGraph, include_original_post: bool = False) -> float:
    """Retweets per unique user; ``include_original_post`` adds the root post."""
    posts = c.post_count if include_original_post else c.retweet_count
    return posts / c.n_nodes


def direction_flags(c: CascadeGraph) -> DirectionFlags:
    """Converge / reciprocal / self-loop presence for the Venn classification."""
    return DirectionFlags(
        has_converge=bool(in_degrees(c).max(initial=0) >= 2),
        has_reciprocal=_reciprocal_count(c) > 0,
        has_self_loop=self_loop_count(c) > 0,
    )


def metric_vector(c: CascadeGraph, config: MetricConfig = MetricConfig()
                  ) -> MetricVector:
    """All ten metrics plus counts and direction flags for one cascade.

    Computes shared intermediates (degree sequences, loop/reciprocal
    counts, silhouette) once; equals composing the individual operations.
    """
    n = c.n_nodes
    d = compute_depths(c)
    s = silhouette(d)

    nonloop = c.edge_src != c.edge_dst
    n_loops = int((~nonloop).sum())
    src_nl = c.edge_src[nonloop]
    dst_nl = c.edge_dst[nonloop]
    k_out = np.bincount(src_nl, minlength=n).astype(np.float64)
    k_in = np.bincount(dst_nl, minlength=n).astype(np.float64)
    n_recip = _count_reciprocal(src_nl, dst_nl, n)
    posts = c.post_count if config.include_original_post else c.retweet_count

    return MetricVector(
        cascade_id=c.cascade_id,
        mass=n,
        length=s.length,
        breadth=int(s.breadth_by_depth.max()),
        trend=wiener_trend(c, config.exact_threshold, config.sample_sources,
                           seed=cascade_seed(config.seed, c.cascade_id)),
        fluctuation=silhouette_fluctuation(s),
        branch_deviation=_sample_cv(k_out) if n >= 2 else 0.0,
        converge_deviation=_sample_cv(k_in) if n >= 2 else 0.0,
        reciprocity=n_recip / c.n_edges if c.n_edges else 0.0,
        self_loop_ratio=n_loops / n,
        avg_activity=posts / n,
        reciprocal_edge_count=n_recip,
        self_loop_count=n_loops,
        post_count=c.post_count,
        has_converge=bool(k_in.max(initial=0.0) >= 2),
        has_reciprocal=n_recip > 0,
        has_self_loop=n_loops > 0,
    )


def metric_table(cascades: Iterable[CascadeGraph],
                 config: MetricConfig = MetricConfig()) -> list[MetricVector]:
    rows = [metric_vector(c, config) for c in cascades]
    rows.sort(key=lambda r: r.cascade_id)
    return rows


VENN_COMBOS = ("none", "converge", "reciprocal", "self_loop",
               "converge+reciprocal", "converge+self_loop",
               "reciprocal+self_loop", "converge+reciprocal+self_loop")


def venn_tallies(rows: Iterable[MetricVector]) -> dict[str, int]:
    """Cascade counts per direction-flag combination (all combos present)."""
    tallies = {combo: 0 for combo in VENN_COMBOS}
    for r in rows:
        tallies[r.flags.combo()] += 1
    return tallies


# ---------------------------------------------------------------------------
# Metric table TSV: cascade_id + 13 numeric columns + 3 flag columns (0/1).

METRIC_HEADER = ("cascade_id",) + NUMERIC_FIELDS + FLAG_FIELDS


def format_value(field: str, value) -> str:
    if field in _INT_FIELDS:
        return str(int(value))
    return repr(float(value))


def format_row(r: MetricVector) -> str:
    cols = [r.cascade_id]
    cols += [format_value(f, getattr(r, f)) for f in NUMERIC_FIELDS]
    cols += [str(int(getattr(r, f))) for f in FLAG_FIELDS]
    return "\t".join(cols) + "\n"


def write_metric_tsv(path_or_fh, rows: Iterable[MetricVector]) -> None:
    def _write(fh):
        fh.write("\t".join(METRIC_HEADER) + "\n")
        for r in rows:
            fh.write(format_row(r))

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            _write(fh)


def read_metric_tsv(path) -> list[MetricVector]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != METRIC_HEADER:
            raise ValueError(f"{path}: unexpected metric table header")
        rows = []
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(METRIC_HEADER):
                raise ValueError(f"{path}:{line_no}: bad column count")
            kwargs = {"cascade_id": parts[0]}
            for name, raw in zip(NUMERIC_FIELDS, parts[1:14]):
                kwargs[name] = int(raw) if name in _INT_FIELDS else float(raw)
            for name, raw in zip(FLAG_FIELDS, parts[14:]):
                kwargs[name] = raw == "1"
            rows.append(MetricVector(**kwargs))
    return rows


def write_venn_json(path_or_fh, tallies: dict[str, int]) -> None:
    payload = json.dumps(tallies, indent=2)
    if hasattr(path_or_fh, "write"):
        path_or_fh.write(payload + "\n")
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
