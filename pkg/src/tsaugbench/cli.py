"""Command-line front end: profile datasets, augment a training set, run benchmarks.

Exit codes: 0 success, 1 usage/configuration error, 2 dataset parse error,
3 experiment error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench as bench_mod
from .augment import balance_dataset, parse_augmenter, synthesis_audit_csv
from .bench import ConfigError, build_config, parse_config_file, report_table
from .core import RngStream
from .metrics import profile, profile_csv
from .tsfile import (
    AllMissingChannelError,
    ImputePolicy,
    InconsistentHeaderError,
    TsParseError,
    header_for,
    impute,
    read_ts_file,
    write_ts_file,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit(2); we reserve 2 for parse errors
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tsaugbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="print the property vector of a train/test pair")
    p.add_argument("train", help="training .ts file")
    p.add_argument("test", help="test .ts file")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--impute", choices=("linear", "ffill", "zero"), default="linear")
    p.add_argument("--out", help="write the result here instead of stdout")

    a = sub.add_parser("augment", help="balance a training set with one technique")
    a.add_argument("train", help="training .ts file")
    a.add_argument("--technique", required=True, help="e.g. noise_3, smote, gaussian-cov")
    a.add_argument("--out", required=True, help="output .ts file")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--impute", choices=("linear", "ffill", "zero"), default="linear")
    a.add_argument("--audit", help="also write a synthesis audit CSV here")

    b = sub.add_parser("bench", help="run the augmentation benchmark sweep")
    b.add_argument("--config", help="flat key=value config file")
    b.add_argument("--train", help="training .ts file (alternative to --config)")
    b.add_argument("--test", help="test .ts file (alternative to --config)")
    b.add_argument("--name", help="dataset name for --train/--test")
    b.add_argument("--runs", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--kernels", type=int)
    b.add_argument("--techniques", help="comma-separated augmenter list (must include none)")
    b.add_argument("--format", choices=("markdown", "csv", "json"))
    b.add_argument("--out-dir", dest="out_dir")
    b.add_argument("--pinned-bank", action="store_true", default=None,
                   help="reuse one kernel bank across runs instead of a fresh bank per run")
    b.add_argument("--normalize-series", action="store_true", default=None,
                   help="z-normalise every series per channel before the transform")
    b.add_argument("--quiet", action="store_true", help="suppress per-cell progress lines")
    return parser


def _cmd_profile(args) -> int:
    _, train = read_ts_file(args.train)
    _, test = read_ts_file(args.test)
    name = train.name or Path(args.train).stem
    prof = profile(train, test, ImputePolicy(method=args.impute))
    if args.format == "csv":
        text = profile_csv({name: prof})
    else:
        lines = [f"dataset       {name}"]
        for label, value in (
            ("n_classes", prof.n_classes),
            ("train_size", prof.train_size),
            ("dim", prof.dim),
            ("length", prof.length),
            ("var_train", f"{prof.var_train:.6g}"),
            ("var_test", f"{prof.var_test:.6g}"),
            ("im_ratio", f"{prof.im_ratio:.6g}"),
            ("d_train_test", f"{prof.d_train_test:.6g}"),
            ("prop_miss", f"{prof.prop_miss:.6g}"),
        ):
            lines.append(f"{label:<13} {value}")
        text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_augment(args) -> int:
    try:
        spec = parse_augmenter(args.technique)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _, train = read_ts_file(args.train)
    train = impute(train, ImputePolicy(method=args.impute))
    stream = RngStream(args.seed).child(train.name or "train").child(spec.name)
    balanced = balance_dataset(train, spec.with_stream(stream))
    write_ts_file(args.out, header_for(balanced), balanced)
    if args.audit:
        Path(args.audit).write_text(synthesis_audit_csv(balanced), encoding="utf-8")
    n_new = len(balanced) - len(train)
    print(f"wrote {args.out}: {len(balanced)} series ({n_new} synthetic, technique {spec.name})")
    return 0


def _cmd_bench(args) -> int:
    file_values = parse_config_file(args.config) if args.config else None
    dataset_override = None
    if args.train or args.test:
        if not (args.train and args.test):
            raise UsageError("--train and --test must be given together")
        name = args.name or Path(args.train).stem.replace("_TRAIN", "")
        dataset_override = [bench_mod.DatasetPair(name, args.train, args.test)]
    cfg = build_config(
        file_values,
        dataset=dataset_override,
        runs=args.runs,
        seed=args.seed,
        kernels=args.kernels,
        techniques=args.techniques,
        format=args.format,
        out_dir=args.out_dir,
        pinned_bank=args.pinned_bank,
        normalize_series=args.normalize_series,
    )

    progress = None
    if not args.quiet:
        def progress(dataset, augmenter, run, acc):
            print(f"  {dataset} {augmenter} run {run}: {acc:.2f}", file=sys.stderr)

    report = bench_mod.run_experiment(cfg, progress=progress)
    text = report_table(report, cfg.report_format)
    sys.stdout.write(text)
    for name, intact in report.test_set_intact.items():
        if not intact:
            print(f"warning: test set for {name} changed during the run", file=sys.stderr)

    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ext = {"markdown": "md", "csv": "csv", "json": "json"}[cfg.report_format]
        (out / f"report.{ext}").write_text(text, encoding="utf-8")
        (out / "raw_accuracies.csv").write_text(bench_mod.raw_accuracies_csv(report), encoding="utf-8")
        (out / "synthesis_audit.csv").write_text(bench_mod.audit_csv(report), encoding="utf-8")
        print(f"wrote report and raw results to {out}", file=sys.stderr)

    failures = [key for key, cell in report.cells.items() if cell.error is not None]
    if failures and all(not report.cells[key].ok for key in report.cells):
        raise bench_mod.BenchError(f"every cell failed; first error: {report.cells[failures[0]].error}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "profile":
            return _cmd_profile(args)
        if args.command == "augment":
            return _cmd_augment(args)
        return _cmd_bench(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (TsParseError, AllMissingChannelError, InconsistentHeaderError, FileNotFoundError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"experiment error: {exc}", file=sys.stderr)
        return 3


def entry():  # console-script hook
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
