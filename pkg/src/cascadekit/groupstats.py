"""Do structures distinguish groups? Rank tests and pairwise classification.

Groups come from dynamic-cluster assignments or from an external topic
label file. Per metric, a Kruskal-Wallis rank test (with tie correction)
checks whether groups share one distribution. Pairwise distinguishability
is the best held-out accuracy of an L2-regularized logistic (linear)
classifier on balanced group pairs, with heavy-tailed metrics compared on
their order of magnitude (log-transformed); 0.5 means indistinguishable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaincc

from .metrics import MetricVector

log = logging.getLogger(__name__)

LOG_EPS = 1e-6

# (field, additive offset before log10); None = keep linear scale
FEATURE_TRANSFORMS = (
    ("mass", 0.0),
    ("length", 1.0),
    ("breadth", 0.0),
    ("trend", 0.0),
    ("fluctuation", LOG_EPS),
    ("branch_deviation", 0.0),
    ("converge_deviation", 0.0),
    ("reciprocity", None),
    ("self_loop_ratio", None),
    ("avg_activity", 0.0),
    ("reciprocal_edge_count", 1.0),
    ("self_loop_count", 1.0),
)


@dataclass(frozen=True)
class GroupedMetricTable:
    """Metric rows joined with one group label per cascade id."""

    rows: list[MetricVector]
    labels: list[str]

    def __post_init__(self):
        if len(self.rows) != len(self.labels):
            raise ValueError("rows and labels differ in length")
        seen = set()
        for r in self.rows:
            if r.cascade_id in seen:
                raise ValueError(f"duplicate cascade_id {r.cascade_id}")
            seen.add(r.cascade_id)

    @property
    def label_set(self) -> list[str]:
        return sorted(set(self.labels))

    def by_label(self) -> dict[str, list[MetricVector]]:
        out: dict[str, list[MetricVector]] = {}
        for row, lbl in zip(self.rows, self.labels):
            out.setdefault(lbl, []).append(row)
        return out


def join_labels(rows: Sequence[MetricVector], labels: dict[str, str]
                ) -> GroupedMetricTable:
    """Match metric rows to a cascade_id -> label map; unlabeled rows drop."""
    kept, kept_labels = [], []
    for r in rows:
        lbl = labels.get(r.cascade_id)
        if lbl is not None:
            kept.append(r)
            kept_labels.append(lbl)
    dropped = len(rows) - len(kept)
    if dropped:
        log.info("dropped %d rows without labels", dropped)
    return GroupedMetricTable(kept, kept_labels)


def read_label_tsv(path) -> dict[str, str]:
    """Two-column TSV (cascade_id, label); a header line is tolerated."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected 2 columns")
            if line_no == 1 and parts[0] == "cascade_id":
                continue
            out[parts[0]] = parts[1]
    return out


# ---------------------------------------------------------------------------
# Kruskal-Wallis

def rank_average(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their average rank."""
    order = np.argsort(values, kind="stable")
    sx = values[order]
    n = len(values)
    boundaries = np.concatenate(([True], sx[1:] != sx[:-1]))
    block_ids = np.cumsum(boundaries) - 1
    starts = np.flatnonzero(boundaries)
    counts = np.diff(np.concatenate((starts, [n])))
    avg_rank = starts + (counts + 1) / 2.0  # 1-based block averages
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = avg_rank[block_ids]
    return ranks


def kruskal_wallis(groups: Sequence[np.ndarray]) -> tuple[float, float]:
    """Rank-based H statistic with tie correction and chi-squared p-value.

    Needs at least two non-empty groups; the chi-squared approximation of
    the p-value assumes groups of five or more. Returns (0.0, 1.0) when
    every pooled value is identical.
    """
    if len(groups) < 2:
        raise ValueError("need at least 2 groups")
    sizes = [len(g) for g in groups]
    if min(sizes) < 1:
        raise ValueError("every group needs at least 1 observation")
    pooled = np.concatenate([np.asarray(g, dtype=np.float64) for g in groups])
    n = len(pooled)
    ranks = rank_average(pooled)
    h = 0.0
    offset = 0
    for size in sizes:
        r_mean = ranks[offset:offset + size].mean()
        h += size * (r_mean - (n + 1) / 2.0) ** 2
        offset += size
    h *= 12.0 / (n * (n + 1))
    # tie correction
    _, tie_counts = np.unique(pooled, return_counts=True)
    correction = 1.0 - (tie_counts.astype(np.float64) ** 3
                        - tie_counts).sum() / (n ** 3 - n)
    if correction <= 0.0:
        return 0.0, 1.0
    h /= correction
    df = len(groups) - 1
    p = float(gammaincc(df / 2.0, h / 2.0))  # chi-squared survival function
    return float(h), p


# ---------------------------------------------------------------------------
# Pairwise linear-classifier distinguishability

@dataclass(frozen=True)
class DistinguishabilityMatrix:
    """Symmetric pairwise accuracies; NaN on the diagonal and for pairs with
    too few cascades. ``pair_sizes`` records the balanced per-group count."""

    labels: list[str]
    accuracy: np.ndarray
    pair_sizes: np.ndarray

    @property
    def mean_accuracy(self) -> float:
        vals = self.accuracy[np.triu_indices(len(self.labels), k=1)]
        vals = vals[~np.isnan(vals)]
        return float(vals.mean()) if vals.size else math.nan


def feature_matrix(rows: Sequence[MetricVector]) -> np.ndarray:
    """Metric vectors as classifier features, heavy-tailed columns in log10."""
    cols = []
    for name, offset in FEATURE_TRANSFORMS:
        col = np.array([getattr(r, name) for r in rows], dtype=np.float64)
        if offset is not None:
            col = np.log10(np.maximum(col + offset, LOG_EPS))
        cols.append(col)
    return np.column_stack(cols)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_logistic(X: np.ndarray, y: np.ndarray, l2: float,
                 max_iter: int = 50, tol: float = 1e-8) -> np.ndarray:
    """L2-regularized logistic regression by damped Newton iteration.

    Deterministic (no stochastic steps); the intercept is unpenalized.
    Returns weights of shape (d + 1,) with the intercept last.
    """
    n, d = X.shape
    Xa = np.column_stack((X, np.ones(n)))
    w = np.zeros(d + 1)
    penalty = np.full(d + 1, l2)
    penalty[-1] = 0.0

    def loss(wv):
        z = Xa @ wv
        # log(1 + exp(-|z|)) is stable for both signs
        ll = np.logaddexp(0.0, -z * (2 * y - 1)).sum()
        return ll + 0.5 * (penalty * wv * wv).sum()

    current = loss(w)
    for _ in range(max_iter):
        p = _sigmoid(Xa @ w)
        grad = Xa.T @ (p - y) + penalty * w
        r = np.maximum(p * (1 - p), 1e-12)
        hess = (Xa * r[:, None]).T @ Xa + np.diag(np.maximum(penalty, 1e-10))
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        for _ in range(30):
            candidate = w - scale * step
            new = loss(candidate)
            if new <= current:
                break
            scale *= 0.5
        else:
            break
        if abs(current - new) <= tol * max(current, 1.0):
            w = candidate
            break
        w, current = candidate, new
    return w


def _stratified_folds(y: np.ndarray, folds: int, rng) -> np.ndarray:
    """Fold index per sample, class-balanced, shuffled deterministically."""
    fold_of = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        fold_of[idx] = np.arange(len(idx)) % folds
    return fold_of

def best_linear_accuracy(X: np.ndarray, y: np.ndarray, rng,
                         c_grid: Sequence[float] = (1e-3, 1e-2, 1e-1, 1.0, 10.0),
                         folds: int = 5) -> float:
    """Best mean held-out accuracy over a small regularization grid.

    Stratified k-fold cross-validation; features are standardized with
    training-fold statistics; zero-variance features are dropped.
    """
    variances = X.var(axis=0)
    keep = variances > 0
    if not keep.all():
        log.warning("dropping %d zero-variance features", int((~keep).sum()))
    X = X[:, keep]
    if X.shape[1] == 0:
        return 0.5
    fold_of = _stratified_folds(y, folds, rng)
    accuracies = {c: [] for c in c_grid}
    for f in range(folds):
        train = fold_of != f
        test = ~train
        mu = X[train].mean(axis=0)
        sd = X[train].std(axis=0)
        sd[sd == 0] = 1.0
        Xtr = (X[train] - mu) / sd
        Xte = (X[test] - mu) / sd
        for c in c_grid:
            w = fit_logistic(Xtr, y[train], l2=1.0 / c)
            pred = (Xte @ w[:-1] + w[-1]) > 0
            accuracies[c].append((pred == (y[test] == 1)).mean())
    return float(max(np.mean(a) for a in accuracies.values()))


def pairwise_distinguishability(table: GroupedMetricTable, seed: int = 0,
                                min_group: int = 50, folds: int = 5,
                                c_grid: Sequence[float] = (1e-3, 1e-2, 1e-1,
                                                           1.0, 10.0)
                                ) -> DistinguishabilityMatrix:
    """Balanced pairwise linear-classifier accuracy for every label pair.

    The larger group is downsampled to the smaller (seeded); pairs where
    either group has fewer than ``min_group`` cascades are reported as NaN
    with size 0.
    """
    by_label = table.by_label()
    labels = table.label_set
    g = len(labels)
    acc = np.full((g, g), np.nan)
    sizes = np.zeros((g, g), dtype=np.int64)
    features = {lbl: feature_matrix(rows) for lbl, rows in by_label.items()}
    for i in range(g):
        for j in range(i + 1, g):
            a, b = features[labels[i]], features[labels[j]]
            if len(a) < min_group or len(b) < min_group:
                log.warning("pair (%s, %s) has insufficient cascades",
                            labels[i], labels[j])
                continue
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, i, j]))
            m = min(len(a), len(b))
            a_bal = a[rng.choice(len(a), size=m, replace=False)]
            b_bal = b[rng.choice(len(b), size=m, replace=False)]
            X = np.vstack((a_bal, b_bal))
            y = np.concatenate((np.zeros(m), np.ones(m)))
            score = best_linear_accuracy(X, y, rng, c_grid, folds)
            acc[i, j] = acc[j, i] = score
            sizes[i, j] = sizes[j, i] = m
    return DistinguishabilityMatrix(labels, acc, sizes)


# ---------------------------------------------------------------------------
# Joint (2-D) histograms with analytic boundary overlays

LINEAR_SCALE_METRICS = frozenset({"reciprocity", "self_loop_ratio"})


@dataclass(frozen=True)
class JointHistogram:
    metric_x: str
    metric_y: str
    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray  # (nx, ny)
    dropped: int  # non-positive values excluded from log axes

    @property
    def x_centers(self) -> np.ndarray:
        if self.metric_x in LINEAR_SCALE_METRICS:
            return 0.5 * (self.x_edges[:-1] + self.x_edges[1:])
        return np.sqrt(self.x_edges[:-1] * self.x_edges[1:])

    @property
    def y_centers(self) -> np.ndarray:
        if self.metric_y in LINEAR_SCALE_METRICS:
            return 0.5 * (self.y_edges[:-1] + self.y_edges[1:])
        return np.sqrt(self.y_edges[:-1] * self.y_edges[1:])

    @property
    def density(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else self.counts.astype(float)


def _axis_edges(values: np.ndarray, metric: str, bins_per_decade: int,
                linear_bins: int = 20) -> np.ndarray:
    if metric in LINEAR_SCALE_METRICS:
        return np.linspace(0.0, 1.0, linear_bins + 1)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return np.array([lo, lo * 10 ** (1.0 / bins_per_decade)])
    nb = max(1, math.ceil(math.log10(hi / lo) * bins_per_decade))
    edges = lo * 10.0 ** (np.arange(nb + 1) / bins_per_decade)
    while edges[-1] <= hi:
        nb += 1
        edges = lo * 10.0 ** (np.arange(nb + 1) / bins_per_decade)
    return edges


def joint_histogram(rows: Sequence[MetricVector], metric_x: str,
                    metric_y: str, bins_per_decade: int = 10
                    ) -> JointHistogram:
    """2-D histogram of two metrics, log-binned except for bounded ratios.

    Cascades with non-positive values on a log axis are excluded and counted
    in ``dropped``.
    """
    x = np.array([getattr(r, metric_x) for r in rows], dtype=np.float64)
    y = np.array([getattr(r, metric_y) for r in rows], dtype=np.float64)
    keep = np.ones(len(x), dtype=bool)
    if metric_x not in LINEAR_SCALE_METRICS:
        keep &= x > 0
    if metric_y not in LINEAR_SCALE_METRICS:
        keep &= y > 0
    dropped = int((~keep).sum())
    x, y = x[keep], y[keep]
    if x.size == 0:
        raise ValueError("no plottable cascades for this metric pair")
    xe = _axis_edges(x, metric_x, bins_per_decade)
    ye = _axis_edges(y, metric_y, bins_per_decade)
    xi = np.clip(np.searchsorted(xe, x, side="right") - 1, 0, len(xe) - 2)
    yi = np.clip(np.searchsorted(ye, y, side="right") - 1, 0, len(ye) - 2)
    counts = np.zeros((len(xe) - 1, len(ye) - 1), dtype=np.int64)
    np.add.at(counts, (xi, yi), 1)
    return JointHistogram(metric_x, metric_y, xe, ye, counts, dropped)


def trend_boundaries(mass_values: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic floor and ceiling of trend vs. mass.

    A maximally fanned cascade of N nodes has mean pair distance 2 - 2/N
    (the floor); a maximally elongated one has (N + 1)/3 (the ceiling).
    """
    n = np.asarray(mass_values, dtype=np.float64)
    return {"floor": 2.0 - 2.0 / n, "ceiling": (n + 1.0) / 3.0}


# ---------------------------------------------------------------------------
# Report writers

def write_kw_tsv(path_or_fh, results: Iterable[tuple[str, str, float, float]]
                 ) -> None:
    """Rows of (metric, group_source, H, p)."""
    def _write(fh):
        fh.write("metric\tgroup_source\tH\tp\n")
        for metric, source, h, p in results:
            fh.write(f"{metric}\t{source}\t{h!r}\t{p!r}\n")

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            _write(fh)


def write_distinguishability_tsv(path_or_fh, matrix: DistinguishabilityMatrix
                                 ) -> None:
    def _write(fh):
        fh.write("label\t" + "\t".join(matrix.labels) + "\n")
        for i, lbl in enumerate(matrix.labels):
            cells = []
            for j in range(len(matrix.labels)):
                v = matrix.accuracy[i, j]
                cells.append("" if math.isnan(v) else repr(float(v)))
            fh.write(lbl + "\t" + "\t".join(cells) + "\n")

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            _write(fh)


def write_joint_tsv(path_or_fh, hist: JointHistogram) -> None:
    """Occupied cells only: (x_center, y_center, density) plus a count column."""
    def _write(fh):
        fh.write("x_center\ty_center\tdensity\tcount\n")
        density = hist.density
        xc, yc = hist.x_centers, hist.y_centers
        for i, j in zip(*np.nonzero(hist.counts)):
            fh.write(f"{float(xc[i])!r}\t{float(yc[j])!r}\t"
                     f"{float(density[i, j])!r}\t{int(hist.counts[i, j])}\n")

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            _write(fh)


def write_boundary_tsv(path_or_fh, mass_values: np.ndarray) -> None:
    """Overlay curves for the (mass, trend) joint plot."""
    curves = trend_boundaries(mass_values)

    def _write(fh):
        fh.write("mass\tfloor\tceiling\n")
        for n, f, c in zip(mass_values, curves["floor"], curves["ceiling"]):
            fh.write(f"{float(n)!r}\t{float(f)!r}\t{float(c)!r}\n")

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            _write(fh)
