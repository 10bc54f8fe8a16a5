"""Command-line pipeline: synth | build | metrics | dist | dynamics | stats | joint.

Each command owns its output directory (lock file), writes outputs
atomically (partial files are removed on failure), and records a
manifest.json with every knob and input digest so runs are reproducible
byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import cascade as cas
from . import distfit, dynamics, groupstats, metrics, store, synth

log = logging.getLogger("cascadekit")


class CliError(Exception):
    """Input or validation problem: reported without a traceback, exit 2."""


class OutputDir:
    """Exclusive, transactional output directory.

    Files are written under temporary names and renamed into place only if
    the command succeeds; a lock file guards against concurrent writers.
    """

    def __init__(self, path):
        self.root = Path(path)
        self._tmp: list[tuple[Path, Path]] = []
        self._lock: Path | None = None

    def __enter__(self):
        self.root.mkdir(parents=True, exist_ok=True)
        lock = self.root / ".lock"
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise CliError(
                f"output directory {self.root} is locked by another run "
                f"(remove {lock} if stale)") from None
        os.close(fd)
        self._lock = lock
        return self

    def stage(self, name: str) -> Path:
        """Temporary path that will be renamed to ``name`` on success."""
        final = self.root / name
        tmp = self.root / (name + ".tmp")
        self._tmp.append((tmp, final))
        return tmp

    def stage_prefix(self, name: str, exts: tuple[str, ...]) -> str:
        """Like stage() for multi-file outputs sharing a prefix."""
        tmp = self.root / (name + ".tmp")
        for ext in exts:
            self._tmp.append((Path(str(tmp) + ext), self.root / (name + ext)))
        return str(tmp)

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                for tmp, final in self._tmp:
                    os.replace(tmp, final)
            else:
                for tmp, _ in self._tmp:
                    tmp.unlink(missing_ok=True)
        finally:
            if self._lock is not None:
                self._lock.unlink(missing_ok=True)
        return False


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: OutputDir, command: str, knobs: dict,
                   inputs: dict[str, str]) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "knobs": knobs,
        "inputs": {name: _sha256(p) for name, p in inputs.items()},
    }
    with open(out.stage("manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _store_prefix(path) -> str:
    """Accept a build output directory or an explicit store prefix."""
    p = Path(path)
    if p.is_dir():
        p = p / "cascades"
    if not Path(str(p) + ".idx").exists():
        raise CliError(f"no cascade store at {p} (missing {p}.idx)")
    return str(p)


# ---------------------------------------------------------------------------
# Commands

def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    if not spec_path.exists():
        raise CliError(f"spec file {spec_path} not found")
    try:
        config = json.loads(spec_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"{spec_path}:{exc.lineno}: invalid JSON ({exc.msg})")
    try:
        events, truths = synth.corpus_from_json(config)
    except (ValueError, TypeError) as exc:
        raise CliError(f"{spec_path}: {exc}")
    with OutputDir(args.output_dir) as out:
        n = cas.write_events_tsv(out.stage("events.tsv"), events)
        synth.write_truth_tsv(out.stage("truth.tsv"), truths)
        write_manifest(out, "synth", {"spec": str(spec_path)},
                       {"spec": spec_path})
        log.info("wrote %d events for %d cascades", n, len(truths))
    return 0


def cmd_build(args) -> int:
    events_path = Path(args.events)
    if not events_path.exists():
        raise CliError(f"event file {events_path} not found")
    parse_rejects: list[cas.RejectRecord] = []
    builder = cas.CascadeBuilder()
    for line_no, ev in cas.read_events_tsv(events_path, parse_rejects):
        builder.add(ev, line_no)
    if builder.events_seen == 0:
        if parse_rejects:
            first = parse_rejects[0]
            raise CliError(f"{events_path}:{first.line_number}: "
                           f"{first.reason} (no valid events)")
        raise CliError(f"no events in {events_path}")
    result = builder.finish()
    result.rejects.extend(parse_rejects)
    result.rejects.sort(key=lambda r: r.line_number)
    with OutputDir(args.output_dir) as out:
        prefix = out.stage_prefix("cascades", (".bin", ".idx"))
        with store.StoreWriter(prefix) as writer:
            for c in result.cascades:
                writer.add(c)
        cas.write_rejects_tsv(out.stage("rejects.tsv"), result.rejects)
        write_manifest(out, "build", {"events": str(events_path)},
                       {"events": events_path})
        log.info("built %d cascades (%d rejects)", len(result.cascades),
                 len(result.rejects))
    return 0


def _metrics_chunk(task) -> tuple[list[str], list[str]]:
    """Worker: format metric rows for a contiguous slice of the store.

    Returns (formatted rows, flag combos); chunks are deterministic so the
    merged output does not depend on the worker count.
    """
    prefix, ids, config = task
    index = store.read_index(prefix)
    lines, combos = [], []
    path = prefix + ".bin"
    with open(path, "rb") as fh:
        for cid in ids:
            off, length = index[cid]
            fh.seek(off)
            c = store._decode(fh.read(length))
            row = metrics.metric_vector(c, config)
            lines.append(metrics.format_row(row))
            combos.append(row.flags.combo())
    return lines, combos


def cmd_metrics(args) -> int:
    prefix = _store_prefix(args.store)
    config = metrics.MetricConfig(
        exact_threshold=args.exact_threshold,
        sample_sources=args.sample_sources,
        seed=args.seed,
        include_original_post=args.include_original_post,
    )
    ids = list(store.read_index(prefix))
    if not ids:
        raise CliError(f"store {prefix} holds no cascades")
    with OutputDir(args.output_dir) as out:
        tallies = {combo: 0 for combo in metrics.VENN_COMBOS}
        count = 0
        with open(out.stage("metrics.tsv"), "w", encoding="utf-8") as fh:
            fh.write("\t".join(metrics.METRIC_HEADER) + "\n")
            if args.threads > 1:
                import multiprocessing

                chunk = max(256, len(ids) // (args.threads * 8) + 1)
                tasks = [(prefix, ids[i:i + chunk], config)
                         for i in range(0, len(ids), chunk)]
                with multiprocessing.Pool(args.threads) as pool:
                    for lines, combos in pool.imap(_metrics_chunk, tasks):
                        fh.writelines(lines)
                        count += len(lines)
                        for combo in combos:
                            tallies[combo] += 1
            else:
                for c in store.iter_store(prefix):
                    row = metrics.metric_vector(c, config)
                    tallies[row.flags.combo()] += 1
                    fh.write(metrics.format_row(row))
                    count += 1
        metrics.write_venn_json(out.stage("venn.json"), tallies)
        write_manifest(
            out, "metrics",
            {"store": prefix, "exact_threshold": args.exact_threshold,
             "sample_sources": args.sample_sources, "seed": args.seed,
             "include_original_post": args.include_original_post},
            {"store_index": prefix + ".idx"})
        log.info("metric rows: %d", count)
    return 0


def _load_metric_rows(path):
    p = Path(path)
    if not p.exists():
        raise CliError(f"metric table {p} not found")
    try:
        return metrics.read_metric_tsv(p)
    except ValueError as exc:
        raise CliError(str(exc))


def cmd_dist(args) -> int:
    rows = _load_metric_rows(args.metrics)
    if args.metric not in metrics.NUMERIC_FIELDS:
        raise CliError(f"unknown metric {args.metric!r}; choose from "
                       f"{', '.join(metrics.NUMERIC_FIELDS)}")
    values = np.array([getattr(r, args.metric) for r in rows], dtype=float)
    positive = values[values > 0]
    if len(positive) < len(values):
        log.info("excluded %d non-positive values from log binning",
                 len(values) - len(positive))
    try:
        pdf = distfit.log_binned_pdf(positive, args.bins_per_decade)
        fit = distfit.fit_bimodal(pdf, fix_c2_zero=args.fix_c2_zero,
                                  min_occupied=args.min_occupied)
    except ValueError as exc:
        raise CliError(f"{args.metrics}: {exc}")
    with OutputDir(args.output_dir) as out:
        distfit.write_pdf_tsv(out.stage("pdf.tsv"), pdf)
        distfit.write_fit_json(out.stage("fit.json"), fit, args.metric)
        write_manifest(
            out, "dist",
            {"metrics": str(args.metrics), "metric": args.metric,
             "bins_per_decade": args.bins_per_decade,
             "fix_c2_zero": args.fix_c2_zero,
             "min_occupied": args.min_occupied},
            {"metrics": args.metrics})
        log.info("fit %s: alpha=%.4g sse=%.4g converged=%s", args.metric,
                 fit.alpha, fit.sse, fit.converged)
    return 0


def cmd_dynamics(args) -> int:
    prefix = _store_prefix(args.store)
    series = []
    skipped = 0
    for c in store.iter_store(prefix):
        if c.n_nodes < args.min_mass:
            continue
        gs = cas.growth_series(c, args.time_unit)
        if gs.degenerate:
            skipped += 1
            continue
        series.append(dynamics.normalize(gs, args.grid_size))
    if skipped:
        log.info("skipped %d degenerate series", skipped)
    if len(series) < args.k:
        raise CliError(
            f"only {len(series)} usable series for k={args.k} "
            f"(mass >= {args.min_mass}, nonzero lifetime)")
    model = dynamics.kmeans(series, args.k, seed=args.seed,
                            max_iter=args.max_iter, n_init=args.n_init)
    with OutputDir(args.output_dir) as out:
        dynamics.write_cluster_json(out.stage("clusters.json"), model)
        dynamics.write_assignments_tsv(out.stage("assignments.tsv"), model)
        write_manifest(
            out, "dynamics",
            {"store": prefix, "k": args.k, "seed": args.seed,
             "grid_size": args.grid_size, "min_mass": args.min_mass,
             "time_unit": args.time_unit, "max_iter": args.max_iter,
             "n_init": args.n_init},
            {"store_index": prefix + ".idx"})
        log.info("k=%d inertia=%.6g sizes=%s", model.k, model.inertia,
                 model.sizes)
    return 0


def cmd_stats(args) -> int:
    rows = _load_metric_rows(args.metrics)
    labels_path = Path(args.labels)
    if not labels_path.exists():
        raise CliError(f"label file {labels_path} not found")
    try:
        labels = groupstats.read_label_tsv(labels_path)
    except ValueError as exc:
        raise CliError(str(exc))
    table = groupstats.join_labels(rows, labels)
    if len(table.label_set) < 2:
        raise CliError("need at least two groups for statistics")
    by_label = table.by_label()
    kw_rows = []
    for name, _offset in groupstats.FEATURE_TRANSFORMS:
        groups = []
        for lbl in table.label_set:
            vals = np.array([getattr(r, name) for r in by_label[lbl]],
                            dtype=float)
            if len(vals) >= 5:
                groups.append(vals)
        if len(groups) < 2:
            log.warning("metric %s: fewer than 2 groups with >= 5 rows", name)
            continue
        h, p = groupstats.kruskal_wallis(groups)
        kw_rows.append((name, args.group_source, h, p))
    matrix = groupstats.pairwise_distinguishability(
        table, seed=args.seed, min_group=args.min_group)
    with OutputDir(args.output_dir) as out:
        groupstats.write_kw_tsv(out.stage("kw.tsv"), kw_rows)
        groupstats.write_distinguishability_tsv(out.stage("disting.tsv"),
                                                matrix)
        write_manifest(
            out, "stats",
            {"metrics": str(args.metrics), "labels": str(labels_path),
             "group_source": args.group_source, "seed": args.seed,
             "min_group": args.min_group},
            {"metrics": args.metrics, "labels": labels_path})
        log.info("groups=%d mean distinguishability=%.3f",
                 len(table.label_set), matrix.mean_accuracy)
    return 0


def cmd_joint(args) -> int:
    rows = _load_metric_rows(args.metrics)
    for m in (args.x, args.y):
        if m not in metrics.NUMERIC_FIELDS:
            raise CliError(f"unknown metric {m!r}")
    try:
        hist = groupstats.joint_histogram(rows, args.x, args.y,
                                          args.bins_per_decade)
    except ValueError as exc:
        raise CliError(str(exc))
    with OutputDir(args.output_dir) as out:
        groupstats.write_joint_tsv(out.stage("joint.tsv"), hist)
        if {args.x, args.y} == {"mass", "trend"}:
            masses = np.unique([r.mass for r in rows if r.mass >= 2])
            groupstats.write_boundary_tsv(out.stage("boundaries.tsv"),
                                          masses.astype(float))
        write_manifest(
            out, "joint",
            {"metrics": str(args.metrics), "x": args.x, "y": args.y,
             "bins_per_decade": args.bins_per_decade},
            {"metrics": args.metrics})
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascadekit",
        description="Cascade structure analytics pipeline")
    parser.add_argument("--verbose", action="store_true",
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=False, threads=False):
        p.add_argument("--output-dir", "-o", required=True,
                       help="directory for this command's outputs")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if threads:
            p.add_argument("--threads", type=int, default=1,
                           help="worker processes (1 = in-process)")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("spec", help="corpus description JSON")
    add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="reconstruct cascades from events TSV")
    p.add_argument("events")
    add_common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("metrics", help="structural metric table + venn tallies")
    p.add_argument("store", help="build output dir or store prefix")
    add_common(p, seed=True, threads=True)
    p.add_argument("--exact-threshold", type=int, default=10_000)
    p.add_argument("--sample-sources", type=int, default=1_000)
    p.add_argument("--include-original-post", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("dist", help="log-binned pdf + bimodal fit of a metric")
    p.add_argument("metrics")
    add_common(p)
    p.add_argument("--metric", required=True)
    p.add_argument("--bins-per-decade", type=int, default=10)
    p.add_argument("--min-occupied", type=int, default=8)
    p.add_argument("--fix-c2-zero", action="store_true",
                   help="pure power-law fit")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("dynamics", help="normalize growth curves and cluster")
    p.add_argument("store")
    add_common(p, seed=True, threads=True)
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--grid-size", type=int, default=100)
    p.add_argument("--min-mass", type=int, default=100)
    p.add_argument("--time-unit", type=int, default=60)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--n-init", type=int, default=10)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("stats", help="Kruskal-Wallis + distinguishability")
    p.add_argument("metrics")
    add_common(p, seed=True, threads=True)
    p.add_argument("--labels", required=True,
                   help="TSV of cascade_id, label (topic file or cluster "
                        "assignments)")
    p.add_argument("--group-source", default="labels")
    p.add_argument("--min-group", type=int, default=50)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("joint", help="2-D metric histogram export")
    p.add_argument("metrics")
    add_common(p)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--bins-per-decade", type=int, default=10)
    p.set_defaults(func=cmd_joint)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
