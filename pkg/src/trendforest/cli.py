"""``trendforest`` command line.

Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.
Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from . import forest as rf
from .config import load_config
from .errors import TrendForestError
from .evaluate import evaluate_pipeline, fmt
from .indicators import FEATURE_NAMES, FeatureMatrix, build_matrix, macd
from .inspect import export_forest, trace
from .market_data import fetch_remote, parse_csv, serialize, validate
from .preprocess import label, raw_channels, smooth
from .separability import separability_report


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _read(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def parse_features(text: str) -> np.ndarray:
    """``rsi=1,stoch_k=2,...`` -> vector in canonical feature order."""
    values = {}
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"bad feature assignment {item!r}; expected name=value")
        name, value = (p.strip() for p in item.split("=", 1))
        if name not in FEATURE_NAMES:
            raise UsageError(f"unknown feature {name!r}; expected {', '.join(FEATURE_NAMES)}")
        try:
            values[name] = float(value)
        except ValueError:
            raise UsageError(f"feature {name} has non-numeric value {value!r}") from None
    missing = [n for n in FEATURE_NAMES if n not in values]
    if missing:
        raise UsageError(f"missing feature(s): {', '.join(missing)}")
    return np.array([values[n] for n in FEATURE_NAMES])


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# ---------------------------------------------------------------- commands

def cmd_ingest(args):
    if bool(args.input) == bool(args.url):
        raise UsageError("ingest needs exactly one of --input or --url")
    text = _read(args.input) if args.input else fetch_remote(args.url, args.symbol)
    series = parse_csv(text, args.symbol)
    for v in validate(series):
        print(f"bar {v.index}: {v.kind}: {v.message}", file=sys.stderr)
    print(f"ingested {len(series)} bars", file=sys.stderr)
    _emit(serialize(series), args.out)


def cmd_features(args):
    series = parse_csv(_read(args.input))
    smoothed = smooth(series, args.alpha)
    source = smoothed if args.label_on == "smoothed" else raw_channels(series)
    labels = label(source["close"], args.horizon)
    matrix = build_matrix(smoothed, labels, args.proc_window or args.horizon, args.rsi_period,
                          args.stoch_period, args.flat_window == "strict")
    print(f"{len(matrix)} feature rows", file=sys.stderr)
    _emit(matrix.to_csv(), args.out)
    if args.signal_out:
        line, signal = macd(smoothed["close"])
        rows = ["index,macd,signal"] + [f"{i},{line[i]!r},{signal[i]!r}" for i in range(len(line))]
        _emit("\n".join(rows) + "\n", args.signal_out)


def cmd_separability(args):
    report = separability_report(FeatureMatrix.from_csv(_read(args.input)))
    verdict = "separable" if report.separable else "not separable"
    print(f"classes are {verdict} in the 2-D projection "
          f"(hull vertices: rise {len(report.hull_rise)}, fall {len(report.hull_fall)})",
          file=sys.stderr)
    _emit(report.points_csv(), args.out)
    if args.out not in (None, "-"):
        stem, ext = os.path.splitext(args.out)
        _emit(report.hulls_csv(), f"{stem}_hulls{ext or '.csv'}")
    else:
        sys.stdout.write("\n" + report.hulls_csv())


def cmd_train(args):
    matrix = FeatureMatrix.from_csv(_read(args.input))
    forest = rf.train(matrix, args.trees, args.mtry, args.criterion, args.seed,
                      args.subspace, args.max_depth, args.jobs)
    print(f"trained {forest.b} trees on {len(matrix)} rows", file=sys.stderr)
    _emit(rf.dumps(forest), args.model)


def cmd_predict(args):
    forest = rf.loads(_read(args.model))
    if bool(args.input) == bool(args.features):
        raise UsageError("predict needs exactly one of --input or --features")
    if args.features:
        lab, frac = forest.predict(parse_features(args.features))
        _emit(f"label,vote_fraction\n{lab},{fmt(frac)}\n", None)
        return
    matrix = FeatureMatrix.from_csv(_read(args.input))
    labels, frac = forest.predict_many(matrix.X)
    rows = ["index,label,vote_fraction"]
    rows += [f"{i},{lab},{fmt(f)}" for i, lab, f in zip(matrix.index, labels, frac)]
    _emit("\n".join(rows) + "\n", args.out)


def cmd_trace(args):
    forest = rf.loads(_read(args.model))
    sys.stdout.write(trace(forest, parse_features(args.features)).render())


def cmd_export_dot(args):
    forest = rf.loads(_read(args.model))
    paths = export_forest(forest, args.out_dir)
    print(f"wrote {len(paths)} DOT files to {args.out_dir}", file=sys.stderr)


def cmd_oob(args):
    forest = rf.loads(_read(args.model))
    matrix = FeatureMatrix.from_csv(_read(args.input))
    b_values = args.curve or [forest.b]
    if max(b_values) > forest.b:
        raise UsageError(f"--curve asks for {max(b_values)} trees; model has {forest.b}")
    curve = rf.forest_oob_curve(forest, matrix, b_values)
    rows = ["trees,sample_size,oob_error"] + [f"{b},{len(matrix)},{fmt(e)}" for b, e in curve]
    _emit("\n".join(rows) + "\n", args.out)


def cmd_evaluate(args):
    config = load_config(args.config)
    if args.out_dir:
        config.output_dir = args.out_dir
    report = evaluate_pipeline(config)
    print(f"wrote report for horizons {config.horizons} to {config.output_dir}", file=sys.stderr)
    sys.stdout.write(report.to_csv())


# ---------------------------------------------------------------- parser

def _add_forest_flags(p):
    p.add_argument("--trees", type=int, default=65)
    p.add_argument("--mtry", type=int, default=3)
    p.add_argument("--criterion", choices=rf.CRITERIA, default="gini")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--subspace", choices=rf.SUBSPACE_MODES, default="tree")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trendforest", description="Stock direction prediction with a random forest.")
    parser.add_argument("--version", action="version", version=f"trendforest {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse/validate an OHLCV CSV (file or URL)")
    p.add_argument("--input")
    p.add_argument("--url")
    p.add_argument("--symbol", default="")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="smooth, label and build the feature matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--label-on", choices=("smoothed", "raw"), default="smoothed")
    p.add_argument("--rsi-period", type=int, default=14)
    p.add_argument("--stoch-period", type=int, default=14)
    p.add_argument("--proc-window", type=int, default=None)
    p.add_argument("--flat-window", choices=("midpoint", "strict"), default="midpoint")
    p.add_argument("--out")
    p.add_argument("--signal-out", help="also write index,macd,signal for every bar")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("separability", help="PCA + convex hull separability test")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_separability)

    p = sub.add_parser("train", help="train a forest on a feature matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    _add_forest_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict rows of a matrix or one feature vector")
    p.add_argument("--model", required=True)
    p.add_argument("--input")
    p.add_argument("--features")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("trace", help="trace one sample through every tree")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("export-dot", help="write one DOT file per tree")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("oob", help="out-of-bag error, optionally per forest size")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--curve", type=_int_list, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oob)

    p = sub.add_parser("evaluate", help="full pipeline from a run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_evaluate)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (TrendForestError, OSError) as exc:
        print(f"trendforest: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
