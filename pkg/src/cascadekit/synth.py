"""Synthetic cascades with known ground truth.

Canonical shapes (star, chain, star-with-chain, double-star) carry closed
forms for trend, fluctuation and branch deviation, making them exact test
oracles. A branching-process generator with tunable mutation rates adds
repeated retweets, converging edges, reciprocal pairs and self-loops for
realistic mixed corpora. Everything is seed-deterministic, including event
bytes, so corpora double as regression fixtures.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .cascade import RetweetEvent
from .distfit import sample_bimodal

SHAPES = ("star", "chain", "star_with_chain", "double_star",
          "branching_process")


@dataclass(frozen=True)
class GeneratorSpec:
    """One cascade recipe: a canonical shape or a mutated branching process.

    ``n`` is the target mass (exact for canonical shapes, an upper cap for
    the branching process). Rates are per-opportunity probabilities; the
    inter-event waiting time is exponential with ``time_scale`` seconds.
    """

    shape: str
    n: int = 0
    k: int = 0
    offspring_mean: float = 0.8
    p_repeat: float = 0.0
    p_converge: float = 0.0
    p_reciprocal: float = 0.0
    p_self_loop: float = 0.0
    time_scale: float = 60.0
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        for rate in (self.p_repeat, self.p_converge, self.p_reciprocal,
                     self.p_self_loop):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"rate {rate} outside [0, 1]")
        if self.n < 0:
            raise ValueError("n must be non-negative")

    @property
    def effective_label(self) -> str:
        return self.label or self.shape


@dataclass
class GroundTruth:
    cascade_id: str
    shape: str
    n: int
    label: str
    trend: float | None = None
    fluctuation: float | None = None
    branch: float | None = None
    branch_approximate: bool = False
    mutations: dict[str, int] = field(default_factory=dict)


def star_trend(n: int) -> float:
    """Mean pair distance of a maximally fanned cascade: 2 - 2/N."""
    return 2.0 - 2.0 / n


def chain_trend(n: int) -> float:
    """Mean pair distance of a maximally elongated cascade: (N + 1)/3."""
    return (n + 1.0) / 3.0


def star_fluctuation(n: int) -> float:
    return math.sqrt(2.0) * (1.0 - 2.0 / n)


def star_with_chain_fluctuation(n: int, k: int) -> float:
    """Sample CV of the level histogram (1, N-K-1, 1, ..., 1)."""
    return math.sqrt(2.0 + k) * (1.0 - (2.0 + k) / n)


def star_branch(n: int) -> float:
    return math.sqrt(n)


def double_star_branch(n: int) -> float:
    """Two-hub approximation, accurate to about 10 percent."""
    return math.sqrt(n / 2.0)


class _EventSink:
    """Accumulates events for one cascade with sequential post ids."""

    def __init__(self, cascade_id: str, rng, time_scale: float):
        self.cascade_id = cascade_id
        self.rng = rng
        self.time_scale = time_scale
        self.events: list[RetweetEvent] = []
        self._post = 0

    def user(self, i: int) -> str:
        return f"{self.cascade_id}:u{i}"

    def wait(self) -> int:
        return max(1, round(self.rng.exponential(self.time_scale)))

    def emit(self, actor: str, source: str | None, t: int) -> None:
        self.events.append(RetweetEvent(
            self.cascade_id, f"{self.cascade_id}:p{self._post}", actor,
            source, int(t)))
        self._post += 1


def _gen_star(sink: _EventSink, n: int, t0: int) -> None:
    root = sink.user(0)
    sink.emit(root, None, t0)
    for i in range(1, n):
        sink.emit(sink.user(i), root, t0 + sink.wait())


def _gen_chain(sink: _EventSink, n: int, t0: int) -> None:
    sink.emit(sink.user(0), None, t0)
    t = t0
    for i in range(1, n):
        t += sink.wait()
        sink.emit(sink.user(i), sink.user(i - 1), t)


def _gen_star_with_chain(sink: _EventSink, n: int, k: int, t0: int) -> None:
    if k >= n - 1:
        raise ValueError(f"chain tail k={k} needs at least {k + 2} nodes")
    root = sink.user(0)
    sink.emit(root, None, t0)
    leaves = n - k - 1
    for i in range(1, leaves + 1):
        sink.emit(sink.user(i), root, t0 + sink.wait())
    t = t0 + sink.wait()
    prev = sink.user(1)  # the chain hangs off the first leaf
    for i in range(leaves + 1, n):
        t += sink.wait()
        sink.emit(sink.user(i), prev, t)
        prev = sink.user(i)


def _gen_double_star(sink: _EventSink, n: int, t0: int) -> None:
    if n < 4 or n % 2:
        raise ValueError("double star needs an even mass of at least 4")
    root = sink.user(0)
    sink.emit(root, None, t0)
    half = n // 2
    for i in range(1, half):  # root's fan: half - 1 users
        sink.emit(sink.user(i), root, t0 + sink.wait())
    hub = sink.user(1)
    hub_t = t0 + sink.wait()
    for i in range(half, n):  # second hub's fan: half users
        sink.emit(sink.user(i), hub, hub_t + sink.wait())


def _gen_branching(sink: _EventSink, spec: GeneratorSpec, t0: int
                   ) -> dict[str, int]:
    rng = sink.rng
    cap = max(1, spec.n)
    root = sink.user(0)
    sink.emit(root, None, t0)
    times = {0: t0}
    parents = {0: None}
    queue = deque([0])
    total = 1
    base_edges: list[tuple[int, int, int]] = []  # (parent, child, t)
    while queue and total < cap:
        u = queue.popleft()
        for _ in range(rng.poisson(spec.offspring_mean)):
            if total >= cap:
                break
            v = total
            total += 1
            t = times[u] + sink.wait()
            times[v] = t
            parents[v] = u
            sink.emit(sink.user(v), sink.user(u), t)
            base_edges.append((u, v, t))
            queue.append(v)

    mutations = {"repeat": 0, "converge": 0, "reciprocal": 0, "self_loop": 0}
    for u, v, t in base_edges:
        if spec.p_repeat and rng.random() < spec.p_repeat:
            sink.emit(sink.user(v), sink.user(u), t + sink.wait())
            mutations["repeat"] += 1
        if spec.p_reciprocal and rng.random() < spec.p_reciprocal:
            sink.emit(sink.user(u), sink.user(v), t + sink.wait())
            mutations["reciprocal"] += 1
    if total > 2 and spec.p_converge:
        for v in range(1, total):
            if rng.random() < spec.p_converge:
                u = int(rng.integers(total))
                if u == v or u == parents[v]:
                    continue
                t = max(times[u], times[v]) + sink.wait()
                sink.emit(sink.user(v), sink.user(u), t)
                mutations["converge"] += 1
    if spec.p_self_loop:
        for v in range(total):
            if rng.random() < spec.p_self_loop:
                sink.emit(sink.user(v), sink.user(v), times[v] + sink.wait())
                mutations["self_loop"] += 1
    return mutations


def _closed_forms(spec: GeneratorSpec, truth: GroundTruth) -> None:
    n, k = spec.n, spec.k
    if spec.shape == "star" and n >= 2:
        truth.trend = star_trend(n)
        truth.fluctuation = star_fluctuation(n)
        truth.branch = star_branch(n)
    elif spec.shape == "chain" and n >= 2:
        truth.trend = chain_trend(n)
        truth.fluctuation = 0.0
    elif spec.shape == "star_with_chain" and n >= 2:
        truth.fluctuation = star_with_chain_fluctuation(n, k)
        if k == 0:
            truth.trend = star_trend(n)
            truth.branch = star_branch(n)
    elif spec.shape == "double_star":
        truth.branch = double_star_branch(n)
        truth.branch_approximate = True


def generate(spec: GeneratorSpec, cascade_id: str = "c0", t0: int = 0,
             rng=None) -> tuple[list[RetweetEvent], GroundTruth]:
    """Event stream plus ground truth for one cascade.

    Rebuilding the events yields exactly the specified shape; closed-form
    metric values are attached where the shape defines them.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    sink = _EventSink(cascade_id, rng, spec.time_scale)
    truth = GroundTruth(cascade_id, spec.shape, spec.n, spec.effective_label)
    if spec.shape == "star":
        _gen_star(sink, spec.n, t0)
    elif spec.shape == "chain":
        _gen_chain(sink, spec.n, t0)
    elif spec.shape == "star_with_chain":
        _gen_star_with_chain(sink, spec.n, spec.k, t0)
    elif spec.shape == "double_star":
        _gen_double_star(sink, spec.n, t0)
    else:
        truth.mutations = _gen_branching(sink, spec, t0)
        truth.n = len({ev.actor for ev in sink.events})
    _closed_forms(spec, truth)
    return sink.events, truth


def generate_corpus(specs: Sequence[GeneratorSpec],
                    weights: Sequence[float], n_cascades: int, seed: int = 0,
                    id_prefix: str = "c", start_window: int = 86_400,
                    mass_sampler: Callable | None = None
                    ) -> tuple[list[RetweetEvent], list[GroundTruth]]:
    """Deterministic mixture corpus with a ground-truth sidecar.

    Cascade i draws its recipe by weight, its own RNG from (seed, i), and a
    start time inside ``start_window``; events are interleaved by global
    timestamp order. Recipes with ``n == 0`` draw their mass from
    ``mass_sampler(rng)``.
    """
    if len(specs) != len(weights):
        raise ValueError("specs and weights differ in length")
    if n_cascades < 1:
        raise ValueError("n_cascades must be positive")
    w = np.asarray(weights, dtype=np.float64)
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("weights must be non-negative and sum > 0")
    w = w / w.sum()
    master = np.random.default_rng(np.random.SeedSequence([seed]))
    picks = master.choice(len(specs), size=n_cascades, p=w)
    starts = master.integers(0, max(1, start_window), size=n_cascades)
    width = len(str(n_cascades - 1))
    events: list[RetweetEvent] = []
    truths: list[GroundTruth] = []
    for i in range(n_cascades):
        spec = specs[picks[i]]
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        if spec.n == 0:
            if mass_sampler is None:
                raise ValueError("spec has n=0 but no mass_sampler given")
            spec = replace(spec, n=max(1, int(mass_sampler(rng))))
        cid = f"{id_prefix}{i:0{width}d}"
        evs, truth = generate(spec, cid, t0=int(starts[i]), rng=rng)
        events.extend(evs)
        truths.append(truth)
    events.sort(key=lambda e: (e.timestamp, e.cascade_id, e.post_id))
    return events, truths


# ---------------------------------------------------------------------------
# Corpus description files (JSON) and the ground-truth sidecar (TSV)

def corpus_from_json(config: dict
                     ) -> tuple[list[RetweetEvent], list[GroundTruth]]:
    """Build a corpus from a JSON description.

    Expected keys: n_cascades, mixture (list of recipe objects with a
    "weight" and GeneratorSpec fields), optional seed, start_window and
    mass_law {params, min, max} for entries without a fixed "n".
    """
    try:
        n_cascades = int(config["n_cascades"])
        mixture = config["mixture"]
    except KeyError as exc:
        raise ValueError(f"corpus config missing key {exc}") from None
    if not mixture:
        raise ValueError("corpus config has an empty mixture")
    seed = int(config.get("seed", 0))
    start_window = int(config.get("start_window", 86_400))
    specs, weights = [], []
    for entry in mixture:
        entry = dict(entry)
        weights.append(float(entry.pop("weight", 1.0)))
        specs.append(GeneratorSpec(**entry))
    sampler = None
    law = config.get("mass_law")
    if law:
        params = [float(v) for v in law["params"]]
        lo = float(law.get("min", 2.0))
        hi = float(law.get("max", 1e5))

        def sampler(rng, _p=params, _lo=lo, _hi=hi):
            return float(sample_bimodal(_p, 1, _lo, _hi, seed=rng)[0])

    return generate_corpus(specs, weights, n_cascades, seed=seed,
                           start_window=start_window, mass_sampler=sampler)


TRUTH_HEADER = ("cascade_id", "shape", "closed_form_trend",
                "closed_form_fluct", "closed_form_branch", "label")


def write_truth_tsv(path_or_fh, truths: Iterable[GroundTruth]) -> None:
    def _fmt(v):
        return "" if v is None else repr(float(v))

    def _write(fh):
        fh.write("\t".join(TRUTH_HEADER) + "\n")
        for t in truths:
            fh.write(f"{t.cascade_id}\t{t.shape}\t{_fmt(t.trend)}\t"
                     f"{_fmt(t.fluctuation)}\t{_fmt(t.branch)}\t{t.label}\n")

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            _write(fh)


def read_truth_labels(path) -> dict[str, str]:
    """Ground-truth sidecar as a cascade_id -> label map (topic-file shaped)."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != TRUTH_HEADER:
            raise ValueError(f"{path}: unexpected truth header")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            out[parts[0]] = parts[5]
    return out
