"""Builder, depth and growth-series behavior of the cascade core."""

import numpy as np
import pytest

from cascadekit.cascade import (CascadeBuilder, RetweetEvent, build_cascades,
                                build_from_tsv, compute_depths, growth_series,
                                parse_event_line, read_events_tsv,
                                write_events_tsv)
from cascadekit.synth import GeneratorSpec, generate, generate_corpus

from conftest import cascade_from_edges, dict_bfs_depths, events_from_edges


def ev(cid, pid, actor, source, t):
    return RetweetEvent(cid, pid, actor, source, t)


class TestBuilder:
    def test_singleton_cascade(self):
        result = build_cascades([ev("1", "p0", "a", None, 0)])
        (c,) = result.cascades
        assert c.n_nodes == 1 and c.n_edges == 0 and c.post_count == 1
        assert c.root == "a"
        assert c.event_times == {"a": 0}

    def test_multi_edge_weight(self):
        result = build_cascades([
            ev("1", "p0", "a", None, 0),
            ev("1", "p1", "b", "a", 1),
            ev("1", "p2", "b", "a", 2),
        ])
        (c,) = result.cascades
        assert c.n_nodes == 2
        assert c.edges == {("a", "b"): 2}
        assert c.post_count == 3

    def test_duplicate_post_id_rejects_event(self):
        result = build_cascades([
            ev("1", "p0", "a", None, 0),
            ev("1", "p1", "b", "a", 1),
            ev("1", "p1", "c", "a", 2),
        ])
        (c,) = result.cascades
        assert c.n_nodes == 2 and c.post_count == 2
        assert len(result.rejects) == 1
        assert "duplicate post_id" in result.rejects[0].reason

    def test_multiple_roots_reject_cascade(self):
        result = build_cascades([
            ev("1", "p0", "a", None, 0),
            ev("1", "p1", "b", "a", 1),
            ev("1", "p2", "c", None, 2),
            ev("2", "q0", "x", None, 0),
        ])
        assert [c.cascade_id for c in result.cascades] == ["2"]
        assert any("multiple root" in r.reason for r in result.rejects)

    def test_no_root_rejects_cascade(self):
        result = build_cascades([ev("1", "p0", "b", "a", 1)])
        assert result.cascades == []
        assert any("no root" in r.reason for r in result.rejects)

    def test_negative_timestamp_rejects_event(self):
        result = build_cascades([
            ev("1", "p0", "a", None, 0),
            ev("1", "p1", "b", "a", -5),
        ])
        (c,) = result.cascades
        assert c.n_nodes == 1
        assert any("negative timestamp" in r.reason for r in result.rejects)

    def test_dangling_source_kept_with_cited_time(self):
        # b never posts, yet c retweets b: b joins at the citing timestamp
        result = build_cascades([
            ev("1", "p0", "a", None, 0),
            ev("1", "p1", "c", "b", 7),
        ])
        (c,) = result.cascades
        assert sorted(c.nodes) == ["a", "b", "c"]
        assert c.event_times["b"] == 7
        assert result.dangling_sources == 1

    def test_interleaved_cascades(self):
        result = build_cascades([
            ev("1", "a0", "a", None, 0),
            ev("2", "b0", "x", None, 0),
            ev("1", "a1", "b", "a", 1),
            ev("2", "b1", "y", "x", 2),
        ])
        assert [c.cascade_id for c in result.cascades] == ["1", "2"]
        assert all(c.n_nodes == 2 for c in result.cascades)

    def test_shuffled_stream_builds_identical_graph(self, rng):
        events, _ = generate(GeneratorSpec(
            "branching_process", n=40, offspring_mean=1.5, p_repeat=0.2,
            p_converge=0.1, p_reciprocal=0.1, p_self_loop=0.1, seed=5))
        base = build_cascades(events).cascades[0]
        for _ in range(3):
            shuffled = list(events)
            rng.shuffle(shuffled)
            again = build_cascades(shuffled).cascades[0]
            assert again == base

    def test_post_conservation_over_corpus(self):
        specs = [GeneratorSpec("star", n=8), GeneratorSpec("chain", n=5)]
        events, _ = generate_corpus(specs, [0.5, 0.5], 200, seed=3)
        result = build_cascades(events)
        assert sum(c.post_count for c in result.cascades) == len(events)
        assert not result.rejects

    def test_root_time_is_original_post_time(self):
        # root also acts later; its event time must stay the post time
        result = build_cascades([
            ev("1", "p0", "a", None, 5),
            ev("1", "p1", "b", "a", 6),
            ev("1", "p2", "a", "b", 9),  # root retweets back
        ])
        (c,) = result.cascades
        assert c.event_times["a"] == 5

    def test_builder_single_use(self):
        b = CascadeBuilder()
        b.finish()
        with pytest.raises(RuntimeError):
            b.finish()
        with pytest.raises(RuntimeError):
            b.add(ev("1", "p0", "a", None, 0))


class TestDepths:
    def test_star_depths(self):
        c = cascade_from_edges([("r", f"u{i}") for i in range(9)])
        d = compute_depths(c)
        assert d.of("r") == 0
        assert all(d.of(f"u{i}") == 1 for i in range(9))
        assert d.length == 1

    def test_chain_depths(self):
        c = cascade_from_edges([("r", "a"), ("a", "b"), ("b", "c"),
                                ("c", "d")])
        d = compute_depths(c)
        assert [d.of(u) for u in ("r", "a", "b", "c", "d")] == [0, 1, 2, 3, 4]
        assert d.length == 4

    def test_shortest_path_wins_on_extra_edge(self):
        # x sits at depth 1; it also retweets y (depth 3): depth(x) stays 1
        c = cascade_from_edges([
            ("r", "a"), ("a", "b"), ("b", "y"),  # chain to depth 3
            ("r", "x"),                           # x at depth 1
            ("y", "x"),                           # x retweets deep y too
        ])
        d = compute_depths(c)
        assert d.of("x") == 1
        assert d.of("y") == 3

    def test_self_loop_ignored_for_depth(self):
        c = cascade_from_edges([("r", "a")], loops=[("a",)])
        d = compute_depths(c)
        assert d.of("a") == 1 and d.length == 1

    def test_unreachable_marked(self):
        # c retweets dangling b: component {b, c} has no path from root
        c = cascade_from_edges([("r", "a"), ("b", "c")])
        d = compute_depths(c)
        assert d.of("b") is None and d.of("c") is None
        assert d.of("a") == 1

    def test_depth_minimality_brute_force(self, rng):
        # random multi-digraphs on <= 8 nodes vs. dict-BFS oracle
        for trial in range(25):
            n = int(rng.integers(2, 9))
            edges = [("n0", f"n{i}") for i in range(1, n)]
            for _ in range(int(rng.integers(0, 8))):
                u, v = rng.integers(0, n, size=2)
                edges.append((f"n{u}", f"n{v}"))
            c = cascade_from_edges(
                [e for e in edges if e[0] != e[1]], root="n0",
                cascade_id=f"t{trial}")
            d = compute_depths(c)
            oracle = dict_bfs_depths(c)
            for i in range(c.n_nodes):
                assert oracle.get(i, -1) == int(d.depth[i])


class TestGrowthSeries:
    def test_bucketing_example(self):
        events = [ev("1", "p0", "a", None, 0),
                  ev("1", "p1", "b", "a", 10),
                  ev("1", "p2", "c", "a", 70),
                  ev("1", "p3", "d", "b", 130)]
        (c,) = build_cascades(events).cascades
        gs = growth_series(c, 60)
        assert gs.counts.tolist() == [2, 1, 1]
        assert gs.lifetime == 130
        assert not gs.degenerate
        assert gs.start == 0

    def test_singleton_degenerate(self):
        (c,) = build_cascades([ev("1", "p0", "a", None, 42)]).cascades
        gs = growth_series(c, 60)
        assert gs.counts.tolist() == [1]
        assert gs.lifetime == 0
        assert gs.degenerate

    def test_node_conservation(self, rng):
        for seed in range(5):
            events, _ = generate(GeneratorSpec(
                "branching_process", n=60, offspring_mean=1.6, seed=seed))
            (c,) = build_cascades(events).cascades
            gs = growth_series(c, 30)
            assert gs.total == c.n_nodes

    def test_pre_root_infection_shifts_start(self):
        # reciprocal-style data: b acts before the root's post time
        result = build_cascades([
            ev("1", "p0", "a", None, 100),
            ev("1", "p1", "b", "a", 40),
        ])
        (c,) = result.cascades
        gs = growth_series(c, 60)
        assert gs.start == -1
        assert gs.total == 2

    def test_invalid_unit(self):
        (c,) = build_cascades([ev("1", "p0", "a", None, 0)]).cascades
        with pytest.raises(ValueError):
            growth_series(c, 0)


class TestEventTsv:
    def test_round_trip(self, tmp_path):
        events = events_from_edges([("r", "a"), ("a", "b")], loops=[("b",)])
        path = tmp_path / "events.tsv"
        write_events_tsv(path, events)
        rejects = []
        back = [e for _, e in read_events_tsv(path, rejects)]
        assert back == events and not rejects

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "events.tsv"
        path.write_text("# comment\n\n1\tp0\ta\t\t0\n", encoding="utf-8")
        back = list(read_events_tsv(path, []))
        assert back == [(3, RetweetEvent("1", "p0", "a", None, 0))]

    def test_malformed_lines_reported_with_line_numbers(self, tmp_path):
        path = tmp_path / "events.tsv"
        path.write_text("1\tp0\ta\t\t0\n"
                        "not enough columns\n"
                        "1\tp1\tb\ta\tnot_a_number\n"
                        "1\tp2\t\ta\t3\n", encoding="utf-8")
        result, parse_rejects = build_from_tsv(path)
        assert [r.line_number for r in parse_rejects] == [2, 3, 4]
        (c,) = result.cascades
        assert c.n_nodes == 1

    def test_parse_error_without_collector_raises(self, tmp_path):
        path = tmp_path / "events.tsv"
        path.write_text("garbled\n", encoding="utf-8")
        with pytest.raises(ValueError, match="events.tsv:1"):
            list(read_events_tsv(path))

    def test_parse_event_line_fields(self):
        e = parse_event_line("c\tp\tactor\tsrc\t12\n")
        assert e == RetweetEvent("c", "p", "actor", "src", 12)
        assert parse_event_line("c\tp\tactor\t\t12\n").source is None
