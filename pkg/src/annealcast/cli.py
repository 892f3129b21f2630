"""Command-line entry point: ``annealcast <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, expand_suite
from .errors import AnnealcastError, ConfigError, DataError
from .evaluation import render


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None


def _apply_seed(doc, seed):
    if seed is not None:
        doc["seed"] = seed
    return doc


def _experiment(args):
    doc = _apply_seed(_read_json(args.config, "config"), args.seed)
    return ExperimentConfig(doc, Path(args.config).parent)


def _write(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_fetch(args):
    from .market_data import fetch_ohlcv, serialize_ohlcv_csv

    series = fetch_ohlcv(args.symbol, args.start, args.end, args.endpoint, args.timeout)
    _write(args.out, serialize_ohlcv_csv(series))
    print(f"{args.symbol}: {len(series)} rows ({series.dropped} dropped)", file=sys.stderr)


def cmd_features(args):
    from .features import series_targets, write_frame
    from .pipeline import feature_pool, load_dataset

    cfg = _experiment(args)
    series, _, fingerprint = load_dataset(cfg)
    if series is None:
        raise ConfigError("'features' needs a price dataset (ohlcv, fetch or synthetic)")
    X = feature_pool(series, cfg, fingerprint)
    ret, trend = series_targets(series, cfg["horizon"])
    _write(args.out, write_frame(X, {"log_return": ret.values[X.index], "trend": trend.values[X.index]}))
    print(f"{X.shape[0]} rows x {X.shape[1]} columns ({len(X.dropped_columns)} dropped)", file=sys.stderr)


def _stage(stop_after):
    def run(args):
        from .pipeline import run_experiment

        cfg = _experiment(args)
        out = args.out or cfg.doc.get("output")
        rec = run_experiment(cfg, out, stop_after=stop_after, resume=args.resume)
        summary = {"config_hash": rec.config_hash, "name": rec.name, "selected": len(rec.selected)}
        if rec.report is not None:
            summary["metrics"] = rec.metrics
        print(json.dumps(summary, sort_keys=True))

    return run


def cmd_suite(args):
    from .pipeline import run_suite

    doc = _read_json(args.config, "suite")
    if args.seed is not None:
        doc.setdefault("base", {})["seed"] = args.seed
    configs = expand_suite(doc, Path(args.config).parent)
    result = run_suite(configs, args.out, jobs=args.jobs, title=doc.get("title"))
    for table in result.tables.values():
        sys.stdout.write(render(table, args.format))


def cmd_report(args):
    from .pipeline import _write_tables, compare_runs, load_runs

    by_dataset, task = load_runs(args.input)
    reports, tables = compare_runs(by_dataset, task, args.alpha, args.title)
    if args.out:
        _write_tables(args.out, tables, reports, args.format)
    for table in tables.values():
        sys.stdout.write(render(table, args.format))


def build_parser():
    p = argparse.ArgumentParser(prog="annealcast", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"annealcast {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fetch", help="download daily OHLCV bars to CSV")
    f.add_argument("--symbol", required=True)
    f.add_argument("--start", required=True, help="YYYY-MM-DD")
    f.add_argument("--end", required=True, help="YYYY-MM-DD")
    f.add_argument("--endpoint", required=True, help="URL; '{symbol}' is substituted")
    f.add_argument("--timeout", type=float, default=30.0)
    f.add_argument("--out", help="output CSV (default stdout)")
    f.set_defaults(func=cmd_fetch)

    stage_help = {
        "features": "build the feature pool and write it as a frame CSV",
        "select": "run feature selection on the training rows",
        "train": "select features and fit the forecaster",
        "evaluate": "train and score on the test rows",
        "run": "full pipeline including report tables",
    }
    for name, text in stage_help.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True)
        s.add_argument("--seed", type=int)
        s.add_argument("--out")
        if name == "features":
            s.set_defaults(func=cmd_features)
        else:
            s.add_argument("--resume", action="store_true", help="reuse selection/model from --out when the config hash matches")
            s.set_defaults(func=_stage({"run": "report"}.get(name, name)))

    s = sub.add_parser("suite", help="run every variant on every dataset and compare")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--format", choices=("csv", "txt"), default="txt")
    s.set_defaults(func=cmd_suite)

    r = sub.add_parser("report", help="comparison tables from finished run directories")
    r.add_argument("--input", nargs="+", required=True)
    r.add_argument("--out")
    r.add_argument("--format", choices=("csv", "txt"), default="txt")
    r.add_argument("--alpha", type=float, default=0.05)
    r.add_argument("--title")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("annealcast: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except AnnealcastError as exc:
        stage = getattr(exc, "stage", None)
        where = f" [{stage}]" if stage else ""
        print(f"annealcast: {type(exc).__name__}{where}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"annealcast: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
