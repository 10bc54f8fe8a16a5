"""Cascade graph model and streaming reconstruction from retweet event logs.

A cascade is a weighted directed multigraph: an edge (u, v) with weight w
records that user v retweeted user u's post w times. Loops (u retweets
himself) and reciprocal pairs are allowed. The builder consumes an event
stream in which events from different cascades may interleave; per-cascade
state stays proportional to the cascade's own size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

UNREACHABLE = -1


@dataclass(frozen=True, slots=True)
class RetweetEvent:
    """One post: ``source`` is the retweeted user, None for the original post."""

    cascade_id: str
    post_id: str
    actor: str
    source: str | None
    timestamp: int


@dataclass(frozen=True, slots=True)
class RejectRecord:
    line_number: int
    reason: str


class CascadeGraph:
    """One finalized cascade.

    Node order, edge order and timestamps are canonical (nodes sorted by
    (infection time, user id), edges by index pair), so two builds of the
    same cascade compare equal regardless of event arrival order. Instances
    are immutable by convention and safe for concurrent read-only use.
    """

    __slots__ = ("cascade_id", "order", "t", "root_index", "edge_src",
                 "edge_dst", "edge_w", "post_count", "_index", "_dir_csr",
                 "_undir_csr")

    def __init__(self, cascade_id, order, t, root_index, edge_src, edge_dst,
                 edge_w, post_count):
        self.cascade_id = cascade_id
        self.order = order
        self.t = t
        self.root_index = root_index
        self.edge_src = edge_src
        self.edge_dst = edge_dst
        self.edge_w = edge_w
        self.post_count = post_count
        self._index = None
        self._dir_csr = None
        self._undir_csr = None

    @property
    def n_nodes(self) -> int:
        return len(self.order)

    @property
    def n_edges(self) -> int:
        """Distinct ordered pairs, loops included; multiplicity lives in edge_w."""
        return len(self.edge_src)

    @property
    def root(self) -> str:
        return self.order[self.root_index]

    @property
    def nodes(self) -> list[str]:
        return list(self.order)

    @property
    def edges(self) -> dict[tuple[str, str], int]:
        return {(self.order[s], self.order[d]): int(w)
                for s, d, w in zip(self.edge_src, self.edge_dst, self.edge_w)}

    @property
    def event_times(self) -> dict[str, int]:
        return {u: int(tu) for u, tu in zip(self.order, self.t)}

    @property
    def retweet_count(self) -> int:
        return self.post_count - 1

    def node_index(self, user: str) -> int:
        if self._index is None:
            self._index = {u: i for i, u in enumerate(self.order)}
        return self._index[user]

    def directed_csr(self):
        """Deduplicated directed adjacency without self-loops (for depths)."""
        if self._dir_csr is None:
            nonloop = self.edge_src != self.edge_dst
            self._dir_csr = kernels.build_csr(
                self.edge_src[nonloop], self.edge_dst[nonloop], self.n_nodes)
        return self._dir_csr

    def undirected_csr(self):
        """Simple undirected adjacency (for Wiener-index distances)."""
        if self._undir_csr is None:
            self._undir_csr = kernels.build_undirected_csr(
                self.edge_src, self.edge_dst, self.n_nodes)
        return self._undir_csr

    def __eq__(self, other):
        if not isinstance(other, CascadeGraph):
            return NotImplemented
        return (self.cascade_id == other.cascade_id
                and self.order == other.order
                and self.root_index == other.root_index
                and self.post_count == other.post_count
                and np.array_equal(self.t, other.t)
                and np.array_equal(self.edge_src, other.edge_src)
                and np.array_equal(self.edge_dst, other.edge_dst)
                and np.array_equal(self.edge_w, other.edge_w))

    def __repr__(self):
        return (f"CascadeGraph({self.cascade_id!r}, nodes={self.n_nodes}, "
                f"edges={self.n_edges}, posts={self.post_count})")


@dataclass(frozen=True)
class DepthAssignment:
    """Per-node shortest-path depth from the root; -1 marks unreachable nodes."""

    order: list[str]
    depth: np.ndarray

    @property
    def length(self) -> int:
        finite = self.depth[self.depth >= 0]
        return int(finite.max()) if finite.size else 0

    def of(self, user: str) -> int | None:
        i = self.order.index(user)
        d = int(self.depth[i])
        return None if d == UNREACHABLE else d


@dataclass(frozen=True)
class GrowthSeries:
    """Counts of first-infection times bucketed by ``time_unit`` seconds.

    ``start`` is the bucket index of counts[0] relative to the root post
    (negative only when some infection precedes the root post, which loops
    and reciprocal edges permit). Bucket counts always sum to the node count.
    """

    cascade_id: str
    counts: np.ndarray
    time_unit: int
    start: int
    lifetime: int
    degenerate: bool

    @property
    def total(self) -> int:
        return int(self.counts.sum())


class _CascadeState:
    """Mutable per-cascade accumulator used by the builder."""

    __slots__ = ("index", "users", "t_actor", "t_cited", "edges", "root",
                 "root_time", "post_ids", "retweets", "first_line", "reject")

    def __init__(self, first_line: int):
        self.index: dict[str, int] = {}
        self.users: list[str] = []
        self.t_actor: list[int] = []
        self.t_cited: list[int] = []
        self.edges: dict[tuple[int, int], int] = {}
        self.root: str | None = None
        self.root_time = 0
        self.post_ids: set[str] = set()
        self.retweets = 0
        self.first_line = first_line
        self.reject: RejectRecord | None = None

    def user_idx(self, user: str) -> int:
        i = self.index.get(user)
        if i is None:
            i = len(self.users)
            self.index[user] = i
            self.users.append(user)
            self.t_actor.append(-1)
            self.t_cited.append(-1)
        return i


@dataclass
class BuildResult:
    cascades: list[CascadeGraph]
    rejects: list[RejectRecord]
    events_seen: int = 0
    events_accepted: int = 0
    dangling_sources: int = 0


class CascadeBuilder:
    """Streaming assembler: feed events in any order, then ``finish()``.

    Event-level problems (duplicate post id, negative timestamp) drop the
    event; cascade-level problems (no root post, multiple root posts) drop
    the whole cascade. Both are recorded in the rejects report. Retweeted
    users that never post ("dangling sources") are kept as nodes, timed by
    the earliest retweet citing them.
    """

    def __init__(self):
        self._states: dict[str, _CascadeState] = {}
        self._rejects: list[RejectRecord] = []
        self._seen = 0
        self._accepted = 0
        self._finished = False

    @property
    def events_seen(self) -> int:
        return self._seen

    def add(self, ev: RetweetEvent, line_number: int = 0) -> None:
        if self._finished:
            raise RuntimeError("builder already finished")
        self._seen += 1
        st = self._states.get(ev.cascade_id)
        if st is None:
            st = self._states[ev.cascade_id] = _CascadeState(line_number)
        if st.reject is not None:
            return
        if ev.timestamp < 0:
            self._rejects.append(RejectRecord(
                line_number, f"negative timestamp for post {ev.post_id}"))
            return
        if ev.post_id in st.post_ids:
            log.warning("duplicate post id %s in cascade %s (line %d)",
                        ev.post_id, ev.cascade_id, line_number)
            self._rejects.append(RejectRecord(
                line_number, f"duplicate post_id {ev.post_id}"))
            return
        st.post_ids.add(ev.post_id)

        if ev.source is None:
            if st.root is not None:
                st.reject = RejectRecord(
                    line_number,
                    f"multiple root events for cascade {ev.cascade_id}")
                return
            st.root = ev.actor
            st.root_time = ev.timestamp
            i = st.user_idx(ev.actor)
            if st.t_actor[i] < 0 or ev.timestamp < st.t_actor[i]:
                st.t_actor[i] = ev.timestamp
        else:
            a = st.user_idx(ev.actor)
            s = st.user_idx(ev.source)
            if st.t_actor[a] < 0 or ev.timestamp < st.t_actor[a]:
                st.t_actor[a] = ev.timestamp
            if st.t_cited[s] < 0 or ev.timestamp < st.t_cited[s]:
                st.t_cited[s] = ev.timestamp
            key = (s, a)
            st.edges[key] = st.edges.get(key, 0) + 1
            st.retweets += 1
        self._accepted += 1

    def finish(self) -> BuildResult:
        """Finalize every cascade; returns cascades sorted by cascade id."""
        if self._finished:
            raise RuntimeError("builder already finished")
        self._finished = True
        cascades = []
        dangling = 0
        dropped_events = 0
        for cid in sorted(self._states):
            st = self._states[cid]
            if st.reject is not None:
                self._rejects.append(st.reject)
                dropped_events += len(st.post_ids)
                continue
            if st.root is None:
                self._rejects.append(RejectRecord(
                    st.first_line, f"no root event for cascade {cid}"))
                dropped_events += len(st.post_ids)
                continue
            graph, n_dangling = _finalize(cid, st)
            dangling += n_dangling
            cascades.append(graph)
        if dangling:
            log.warning("%d retweeted users never posted; kept as nodes", dangling)
        return BuildResult(cascades, self._rejects, self._seen,
                           self._accepted - dropped_events, dangling)


def _finalize(cid: str, st: _CascadeState) -> tuple[CascadeGraph, int]:
    n = len(st.users)
    t_actor = np.asarray(st.t_actor, dtype=np.int64)
    t_cited = np.asarray(st.t_cited, dtype=np.int64)
    dangling = t_actor < 0
    t = np.where(dangling, t_cited, t_actor)
    root_old = st.index[st.root]
    t[root_old] = st.root_time  # root participates at its original post

    # canonical node order: (infection time, user id)
    perm = sorted(range(n), key=lambda i: (t[i], st.users[i]))
    remap = np.empty(n, dtype=np.int64)
    for new, old in enumerate(perm):
        remap[old] = new
    order = [st.users[i] for i in perm]
    t_sorted = t[perm]

    m = len(st.edges)
    src = np.empty(m, dtype=np.int64)
    dst = np.empty(m, dtype=np.int64)
    w = np.empty(m, dtype=np.int64)
    for j, ((s, d), wt) in enumerate(st.edges.items()):
        src[j] = remap[s]
        dst[j] = remap[d]
        w[j] = wt
    eperm = np.lexsort((dst, src))
    graph = CascadeGraph(
        cascade_id=cid,
        order=order,
        t=t_sorted,
        root_index=int(remap[root_old]),
        edge_src=src[eperm].astype(np.int32),
        edge_dst=dst[eperm].astype(np.int32),
        edge_w=w[eperm],
        post_count=1 + st.retweets,
    )
    return graph, int(dangling.sum())


def build_cascades(events: Iterable[RetweetEvent]) -> BuildResult:
    """Assemble all cascades from an event stream (line numbers = ordinals)."""
    b = CascadeBuilder()
    for i, ev in enumerate(events, start=1):
        b.add(ev, i)
    return b.finish()


def compute_depths(c: CascadeGraph) -> DepthAssignment:
    """BFS depths from the root over directed edges; loops are ignored."""
    indptr, indices = c.directed_csr()
    depth = kernels.bfs_depths(indptr, indices, c.root_index, c.n_nodes)
    return DepthAssignment(c.order, depth)


def growth_series(c: CascadeGraph, time_unit: int = 1) -> GrowthSeries:
    """Histogram of first-infection times relative to the root post.

    Bucket counts sum to the node count. Lifetime is the gap between the
    root post and the last infection; a zero lifetime flags the series
    degenerate (singleton or fully simultaneous cascade).
    """
    if time_unit <= 0:
        raise ValueError("time_unit must be positive")
    rel = c.t - c.t[c.root_index]
    buckets = rel // time_unit
    start = int(buckets.min())
    counts = np.bincount((buckets - start).astype(np.int64))
    lifetime = int(rel.max())
    return GrowthSeries(c.cascade_id, counts, time_unit, start, lifetime,
                        degenerate=lifetime == 0)


# ---------------------------------------------------------------------------
# Event TSV interface: cascade_id, post_id, actor, source (empty for the
# original post), timestamp. Lines starting with '#' are ignored.

def parse_event_line(line: str) -> RetweetEvent:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 5:
        raise ValueError(f"expected 5 tab-separated fields, got {len(parts)}")
    cid, post_id, actor, source, ts = parts
    if not cid or not post_id or not actor:
        raise ValueError("empty cascade_id, post_id or actor")
    try:
        timestamp = int(ts)
    except ValueError:
        raise ValueError(f"bad timestamp {ts!r}") from None
    return RetweetEvent(cid, post_id, actor, source or None, timestamp)


def read_events_tsv(path, rejects: list[RejectRecord] | None = None
                    ) -> Iterator[tuple[int, RetweetEvent]]:
    """Yield (line_number, event); malformed lines go to ``rejects``."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            try:
                yield line_no, parse_event_line(line)
            except ValueError as exc:
                if rejects is None:
                    raise ValueError(f"{path}:{line_no}: {exc}") from None
                rejects.append(RejectRecord(line_no, str(exc)))


def format_event(ev: RetweetEvent) -> str:
    return (f"{ev.cascade_id}\t{ev.post_id}\t{ev.actor}\t"
            f"{ev.source or ''}\t{ev.timestamp}\n")


def write_events_tsv(path_or_fh, events: Iterable[RetweetEvent]) -> int:
    """Write events in the TSV interchange format; returns the event count."""
    n = 0
    if hasattr(path_or_fh, "write"):
        for ev in events:
            path_or_fh.write(format_event(ev))
            n += 1
        return n
    with open(path_or_fh, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(format_event(ev))
            n += 1
    return n


def write_rejects_tsv(path_or_fh, rejects: Iterable[RejectRecord]) -> None:
    def _write(fh: TextIO):
        fh.write("line_number\treason\n")
        for r in rejects:
            fh.write(f"{r.line_number}\t{r.reason}\n")

    if hasattr(path_or_fh, "write"):
        _write(path_or_fh)
    else:
        with open(path_or_fh, "w", encoding="utf-8") as fh:
            _write(fh)


def build_from_tsv(path) -> tuple[BuildResult, list[RejectRecord]]:
    """Build all cascades from an event TSV; returns (result, parse rejects).

    The result's own rejects list already includes the parse rejects, so
    callers normally only need the first element.
    """
    parse_rejects: list[RejectRecord] = []
    builder = CascadeBuilder()
    for line_no, ev in read_events_tsv(path, parse_rejects):
        builder.add(ev, line_no)
    result = builder.finish()
    result.rejects.extend(parse_rejects)
    result.rejects.sort(key=lambda r: r.line_number)
    result.events_seen += len(parse_rejects)
    return result, parse_rejects
