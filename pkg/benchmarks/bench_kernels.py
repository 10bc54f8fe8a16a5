#!/usr/bin/env python3
"""Benchmark: compiled BFS kernels vs. the pure-numpy fallback.

Times depth assignment and Wiener distance sums on random recursive trees,
plus an end-to-end metric pass over a small-cascade corpus. Run after
`pip install -e .`:

    python benchmarks/bench_kernels.py [--sizes 1000,5000,20000]
"""

import argparse
import time

import numpy as np

from cascadekit import _kernels_py
from cascadekit.kernels import build_undirected_csr

try:
    from cascadekit import _kernels_c
except ImportError:
    _kernels_c = None


def random_tree_edges(n, rng):
    parents = (rng.random(n - 1) * np.arange(1, n)).astype(np.int64)
    children = np.arange(1, n, dtype=np.int64)
    return parents, children


def time_call(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_graph(n, sources, rng):
    src, dst = random_tree_edges(n, rng)
    indptr, indices = build_undirected_csr(src, dst, n)
    picks = rng.choice(n, size=min(sources, n), replace=False).astype(np.int32)
    rows = []
    for name, mod in (("compiled", _kernels_c), ("pure", _kernels_py)):
        if mod is None:
            continue
        t_depth = time_call(mod.bfs_depths, indptr, indices, 0, n)
        t_dist = time_call(mod.bfs_distance_stats, indptr, indices, picks, n)
        rows.append((name, t_depth, t_dist))
    return rows


def bench_metrics_pass(n_cascades=2000, cascade_n=12):
    from cascadekit.cascade import build_cascades
    from cascadekit.metrics import metric_table
    from cascadekit.synth import GeneratorSpec, generate_corpus

    specs = [GeneratorSpec("star", n=cascade_n),
             GeneratorSpec("chain", n=cascade_n)]
    events, _ = generate_corpus(specs, [0.5, 0.5], n_cascades, seed=0)
    t0 = time.perf_counter()
    result = build_cascades(events)
    t_build = time.perf_counter() - t0
    t0 = time.perf_counter()
    metric_table(result.cascades)
    t_metrics = time.perf_counter() - t0
    return len(events), t_build, t_metrics


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="1000,5000,20000")
    ap.add_argument("--sources", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _kernels_c is None:
        print("note: compiled extension not built; showing pure only\n")
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>8} {'backend':>9} {'bfs_depths':>12} "
          f"{'distance_stats':>15}  ({args.sources} sources)")
    for n in (int(s) for s in args.sizes.split(",")):
        rows = bench_graph(n, args.sources, rng)
        for name, t_depth, t_dist in rows:
            print(f"{n:>8} {name:>9} {t_depth * 1e3:>10.2f}ms"
                  f"{t_dist * 1e3:>13.1f}ms")
        if len(rows) == 2:
            print(f"{'':>8} {'speedup':>9} {rows[1][1] / rows[0][1]:>11.1f}x"
                  f"{rows[1][2] / rows[0][2]:>14.1f}x")

    n_events, t_build, t_metrics = bench_metrics_pass()
    print(f"\nend-to-end ({n_events} events, current backend): "
          f"build {t_build:.2f}s, metrics {t_metrics:.2f}s")


if __name__ == "__main__":
    main()
