"""Command-line interface: a thin shell over the library.

    datmine ingest EVENTS METADATA COURSE -o cohort.bin
    datmine patterns COHORT -o patterns.csv [--pattern NAME] [--grades]
    datmine ldp COHORT -o sweep.csv [--n-min N] [--n-max N] [--window N]
                       [--certified-only] [--skip-group-test]
    datmine embed COHORT {features,dtw-mds,cnn-ae} -o embedding.csv [--seed N]
    datmine project EMBEDDING COHORT -o scatter.csv [--svg PATH] [--seed N]
    datmine synth COURSE PLAN -o OUTDIR [--seed N]

Every command computes through the library functions only — no analysis
logic lives here — and drops a RunManifest JSON (arguments, seed, input
digests, tool version, timestamps) next to its primary output.

Exit codes: 0 success, 1 runtime failure, 2 invalid input or usage.
Commands that use randomness take an explicit --seed; everything else is
deterministic, so reruns over identical inputs rewrite identical bytes
(manifests aside — they carry wall-clock timestamps).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, io
from .behavior import PATTERNS, cutoff_search, mine_patterns
from .cnn_ae import TrainConfig, embed_dats, save_checkpoint
from .dtw_mds import classical_mds, cohort_series, distance_matrix
from .features import feature_pipeline
from .forum_lag import group_grade_test, offset_sweep
from .ingest import Cohort, build_cohort, filter_cohort, parse_events
from .synth import generate
from .tsne import TsneConfig, project

PIPELINES = ("features", "dtw-mds", "cnn-ae")


def _load_cohort(path: str) -> Cohort:
    return io.read_cohort_archive(path)


def _grades(cohort: Cohort) -> dict[str, float | None]:
    return {i: cohort.record(i).grade for i in cohort.learner_ids}


def _finish(args: argparse.Namespace, command: str, seed: int | None,
            inputs: list[str], primary_out: str | Path,
            started: datetime) -> None:
    manifest = io.make_manifest(command, args.argv, seed, inputs, started)
    io.write_manifest(manifest, primary_out)


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    spec = io.read_course_spec(args.course)
    with open(args.events, encoding="utf-8") as fh:
        events, parse_report = parse_events(
            fh, max_malformed_fraction=args.max_malformed)
    records = io.read_metadata_csv(args.metadata)
    cohort, report = build_cohort(events, records, spec)
    io.write_cohort_archive(cohort, args.out)
    _finish(args, "ingest", None, [args.events, args.metadata, args.course],
            args.out, started)
    print(f"events read: {report.n_events_in}  used: {report.n_events_used}")
    print(f"malformed lines: {parse_report.n_malformed}")
    print(f"dropped: {report.n_out_of_range} out of range, "
          f"{report.n_unknown_component} unknown component")
    print(f"learners: {report.n_learners} "
          f"({report.n_learners_without_metadata} without metadata)")
    print(f"wrote {args.out}")
    return 0


def cmd_patterns(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    cohort = _load_cohort(args.cohort)
    rows = mine_patterns(cohort.dats("video"))
    if args.pattern != "all":
        rows = [r for r in rows if r.pattern == args.pattern]
    grades = _grades(cohort)
    io.write_patterns_csv(rows, grades, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    if args.grades:
        selected = PATTERNS if args.pattern == "all" else (args.pattern,)
        results = {}
        for pattern in selected:
            graded = [(r.count, grades[r.learner_id]) for r in rows
                      if r.pattern == pattern and grades[r.learner_id] is not None]
            if not graded:
                raise ValueError(f"no graded learners for pattern {pattern}")
            counts, gs = zip(*graded)
            results[pattern] = io.cutoff_result_to_dict(
                cutoff_search(counts, gs, pattern=pattern))
        cutoff_path = Path(str(args.out) + ".cutoff.json")
        cutoff_path.write_text(
            json.dumps(results, sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
        print(f"wrote {cutoff_path}")
    _finish(args, "patterns", None, [args.cohort], args.out, started)
    return 0


def cmd_ldp(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    cohort = _load_cohort(args.cohort)
    if args.certified_only:
        cohort = filter_cohort(cohort, {"certified": True})
    series = offset_sweep(cohort, args.n_min, args.n_max)
    io.write_ldp_csv(series, args.out)
    print(f"wrote {args.out} (offsets {args.n_min}..{args.n_max}, "
          f"baseline {series.baseline.p:.6f})")
    if not args.skip_group_test:
        result = group_grade_test(cohort, window_days=args.window)
        group_path = Path(str(args.out) + ".group.json")
        group_path.write_text(
            json.dumps(io.group_grade_to_dict(result), sort_keys=True,
                       indent=2) + "\n",
            encoding="utf-8")
        print(f"wrote {group_path} (p={result.p_value:.6g}, "
              f"groups {result.n_group_y}/{result.n_group_n})")
    _finish(args, "ldp", None, [args.cohort], args.out, started)
    return 0


def _embed_dtw_mds(args: argparse.Namespace, cohort: Cohort):
    """MDS over DTW distances, reusing a cached matrix when digests match."""
    source_digest = io.file_digest(args.cohort)
    cache_path = Path(str(args.out) + ".distances.bin")
    dm = None
    if cache_path.exists():
        try:
            cached, recorded = io.read_distance_matrix(cache_path)
        except ValueError:
            cached, recorded = None, ""
        if cached is not None and recorded == source_digest:
            dm = cached
            print(f"reusing cached distances {cache_path}")
    series, skipped = cohort_series(cohort.dats("video"), cohort.spec)
    if dm is None:
        dm = distance_matrix(series)
        io.write_distance_matrix(dm, cache_path, source_digest=source_digest)
        print(f"wrote {cache_path} ({dm.n} series)")
    if skipped:
        print(f"skipped {len(skipped)} learners with empty trajectories")
    return classical_mds(dm)


def cmd_embed(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    cohort = _load_cohort(args.cohort)
    if args.pipeline == "features":
        matrix = feature_pipeline(cohort.dats("video"))
    elif args.pipeline == "dtw-mds":
        matrix = _embed_dtw_mds(args, cohort)
    else:
        config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                             learning_rate=args.learning_rate, seed=args.seed)
        matrix, model, losses = embed_dats(cohort.dats("video"), cohort.spec,
                                           config)
        ckpt_path = Path(str(args.out) + ".ckpt")
        with open(ckpt_path, "wb") as fh:
            save_checkpoint(model, fh)
        io.write_loss_curve_csv(losses, str(args.out) + ".loss.csv")
        print(f"wrote {ckpt_path} and loss curve "
              f"(final loss {losses[-1]:.6f})")
    io.write_embedding_csv(matrix, args.out)
    seed = args.seed if args.pipeline == "cnn-ae" else None
    _finish(args, "embed", seed, [args.cohort], args.out, started)
    print(f"wrote {args.out} ({matrix.n_learners} x {matrix.n_dims}, "
          f"pipeline {matrix.pipeline})")
    return 0


def cmd_project(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    matrix = io.read_embedding_csv(args.embedding)
    cohort = _load_cohort(args.cohort)
    config = TsneConfig(perplexity=args.perplexity,
                        iterations=args.iterations, seed=args.seed)
    coords = project(matrix, config)
    grades = _grades(cohort)
    io.write_scatter_csv(coords, grades, args.out)
    svg_path = args.svg or str(Path(args.out).with_suffix(".svg"))
    io.write_scatter_svg(coords, grades, svg_path)
    _finish(args, "project", args.seed, [args.embedding, args.cohort],
            args.out, started)
    print(f"wrote {args.out} and {svg_path} ({coords.n_learners} points, "
          f"pipeline {coords.pipeline})")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    spec = io.read_course_spec(args.course)
    plan = io.read_cohort_plan(args.plan)
    if args.seed is not None:
        plan = dataclasses.replace(plan, seed=args.seed)
    synthetic = generate(plan, spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    events_path = out_dir / "events.jsonl"
    io.write_events_jsonl(synthetic.events, events_path)
    io.write_metadata_csv(synthetic.records, out_dir / "metadata.csv")
    io.write_groundtruth_json(synthetic, out_dir / "groundtruth.json")
    _finish(args, "synth", plan.seed, [args.course, args.plan],
            events_path, started)
    print(f"wrote {out_dir}/[events.jsonl metadata.csv groundtruth.json] "
          f"({len(synthetic.events)} events, {plan.n_learners} learners, "
          f"seed {plan.seed})")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="datmine",
        description="Mine learning behavior from clickstream trajectories.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a cohort archive from raw logs")
    p.add_argument("events", help="events JSON-lines file")
    p.add_argument("metadata", help="learner metadata CSV")
    p.add_argument("course", help="course spec file")
    p.add_argument("-o", "--out", required=True, help="cohort archive to write")
    p.add_argument("--max-malformed", type=float, default=0.1,
                   help="tolerated fraction of malformed event lines")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("patterns", help="count per-learner behavior patterns")
    p.add_argument("cohort", help="cohort archive")
    p.add_argument("-o", "--out", required=True, help="patterns CSV to write")
    p.add_argument("--pattern", default="all", choices=("all",) + PATTERNS,
                   help="restrict to one pattern")
    p.add_argument("--grades", action="store_true",
                   help="also run the grade cutoff search (JSON sidecar)")
    p.set_defaults(func=cmd_patterns)

    p = sub.add_parser("ldp", help="video-to-forum lag dependence analysis")
    p.add_argument("cohort", help="cohort archive")
    p.add_argument("-o", "--out", required=True, help="sweep CSV to write")
    p.add_argument("--n-min", type=int, default=0, help="first offset")
    p.add_argument("--n-max", type=int, default=14, help="last offset")
    p.add_argument("--window", type=int, default=2,
                   help="group test window in days")
    p.add_argument("--certified-only", action="store_true",
                   help="restrict to certificate earners")
    p.add_argument("--skip-group-test", action="store_true",
                   help="write the sweep only")
    p.set_defaults(func=cmd_ldp)

    p = sub.add_parser("embed", help="embed trajectories into 10 dimensions")
    p.add_argument("cohort", help="cohort archive")
    p.add_argument("pipeline", choices=PIPELINES)
    p.add_argument("-o", "--out", required=True, help="embedding CSV to write")
    p.add_argument("--seed", type=int, default=0,
                   help="training seed (cnn-ae only)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("project", help="project an embedding to 2-D")
    p.add_argument("embedding", help="embedding CSV")
    p.add_argument("cohort", help="cohort archive (for grades)")
    p.add_argument("-o", "--out", required=True, help="scatter CSV to write")
    p.add_argument("--svg", help="SVG path (default: out with .svg suffix)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("course", help="course spec file")
    p.add_argument("plan", help="cohort plan file")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the plan file seed")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    effective = list(sys.argv[1:]) if argv is None else list(argv)
    args = parser.parse_args(effective)
    args.argv = effective
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, IsADirectoryError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
