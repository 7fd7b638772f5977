"""Command-line entry points: patchify, run, sweep, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .config import parse_dataclass
from .patchify import PatchifyConfig, patchify_dataset
from .report import aggregate_runs_tree, emit_report, load_runs_tree
from .runner import ExperimentConfig, run_repeats, run_sweep

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepConfig:
    experiment: ExperimentConfig
    majority_counts: tuple[int, ...]
    methods: tuple[str, ...] = field(default_factory=tuple)


def _cmd_patchify(args) -> int:
    config = PatchifyConfig(
        patch_size=args.patch_size,
        class_patches_per_image=args.class_patches,
        background_patches_per_image=args.bg_patches,
        attempts_per_patch=args.attempts,
        seed=args.seed,
    )
    rows, stats = patchify_dataset(args.annotations, args.images, args.out, config)
    print(f"wrote {len(rows)} patches to {args.out}")
    for name, count in stats["per_class_counts"].items():
        print(f"  {name}: {count}")
    rejections = ", ".join(f"{k}={v}" for k, v in stats["rejections"].items())
    print(f"  rejections: {rejections or 'none'}")
    return 0


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_json_file(args.config)
    out_dir = Path(args.out) if args.out else Path("runs") / config.name
    records = run_repeats(config, out_dir=out_dir, resume=args.resume)
    for record in records:
        final = record.metrics[-1]
        print(
            f"repeat {record.repeat_index} (minority={record.minority_class}): "
            f"minority recall {final.minority_recall:.3f}, "
            f"accuracy {final.overall_accuracy:.3f}"
        )
    print(f"artifacts in {out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    payload = json.loads(Path(args.config).read_text())
    sweep = parse_dataclass(SweepConfig, payload)
    out_dir = Path(args.out) if args.out else Path("runs") / f"{sweep.experiment.name}-sweep"
    rows = run_sweep(
        sweep.experiment,
        sweep.majority_counts,
        methods=sweep.methods or None,
        out_dir=out_dir,
        resume=args.resume,
    )
    for row in rows:
        print(
            f"majority={row['majority_count']} method={row['method']}: "
            f"minority recall delta {row['delta_minority_recall']:+.3f}"
        )
    print(f"sweep table in {out_dir / 'sweep_table.csv'}")
    return 0


def _cmd_report(args) -> int:
    runs_dir = Path(args.runs)
    tree = load_runs_tree(runs_dir)
    if not tree:
        print(f"no metrics.jsonl files found under {runs_dir}", file=sys.stderr)
        return 1
    aggregates = aggregate_runs_tree(tree)
    sweep_rows = None
    sweep_table = runs_dir / "sweep_table.csv"
    if sweep_table.exists():
        with open(sweep_table, newline="") as fh:
            sweep_rows = [
                {**row, "majority_count": int(row["majority_count"])}
                for row in csv.DictReader(fh)
            ]
    out_dir = Path(args.out) if args.out else runs_dir / "report"
    written = emit_report(
        aggregates, out_dir, formats=tuple(args.formats.split(",")), sweep_rows=sweep_rows
    )
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="albench",
        description="Active-learning benchmark for class-imbalanced image classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("patchify", help="convert polygon annotations to a patch dataset")
    p.add_argument("--annotations", required=True, help="COCO-style JSON file")
    p.add_argument("--images", required=True, help="directory of source images")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--patch-size", type=int, default=160)
    p.add_argument("--class-patches", type=int, default=100)
    p.add_argument("--bg-patches", type=int, default=10)
    p.add_argument("--attempts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_patchify)

    p = sub.add_parser("run", help="run an AL experiment (all repeats)")
    p.add_argument("--config", required=True, help="experiment JSON file")
    p.add_argument("--out", default=None, help="output directory (default runs/<name>)")
    p.add_argument("--resume", action="store_true", help="continue from the last completed cycle")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="initial-pool-size sweep")
    p.add_argument("--config", required=True, help="sweep JSON file")
    p.add_argument("--out", default=None)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="aggregate runs into tables and plots")
    p.add_argument("--runs", required=True, help="directory of run outputs")
    p.add_argument("--out", default=None, help="report directory (default <runs>/report)")
    p.add_argument("--formats", default="csv,png,json")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
