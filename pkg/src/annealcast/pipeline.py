"""End-to-end experiment runner: ingest, features, targets, split, select, train, evaluate, report."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__, indicators, kernels
from .config import ExperimentConfig, load_config
from .errors import AnnealcastError, ConfigError, DataError, ProtocolError, SchemaError
from .evaluation import ComparisonTable, EvalReport, comparison_table, evaluate, headline_metrics, render
from .features import FeatureMatrix, TargetVector, align_horizon, build_pool, read_frame, relabel, series_targets, write_frame
from .fsa import fsa_fit
from .lasso import lasso_fit
from .linear import LinearModel
from .market_data import NormalizationParams, apply_minmax, fetch_ohlcv, fit_minmax, parse_ohlcv_csv, serialize_ohlcv_csv, split
from .models import MlpModel, NullModel, linear_fit, logreg_fit, mlp_fit, null_fit
from .synthetic import synthetic_ohlcv

CACHE_ENV = "ANNEALCAST_CACHE"
VARIANT_FORMAT = "annealcast.variant/1"
STAGES = ("ingest", "features", "targets", "split", "select", "train", "evaluate", "report")


def versions():
    return {
        "annealcast": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


class _Clock:
    """Per-stage timings; errors leaving a stage are tagged with its name."""

    def __init__(self):
        self.timings = {}

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        try:
            yield
        except AnnealcastError as exc:
            if getattr(exc, "stage", None) is None:
                exc.stage = name
            raise
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


# -- ingest and features --------------------------------------------------------


def _sha(data):
    return hashlib.sha256(data if isinstance(data, bytes) else data.encode()).hexdigest()


def load_dataset(cfg):
    """(series or None, (FeatureMatrix, targets) or None, fingerprint)."""
    ds = cfg.dataset
    kind = ds["kind"]
    if kind == "synthetic":
        n, seed = ds.get("n", 1500), ds.get("seed", 0)
        series = synthetic_ohlcv(n=n, seed=seed, symbol=cfg.dataset_name)
        return series, None, _sha(f"synthetic:{n}:{seed}")
    if kind == "fetch":
        series = fetch_ohlcv(ds["symbol"], ds["start"], ds["end"], ds["endpoint"], ds.get("timeout", 30.0))
        return series, None, _sha(serialize_ohlcv_csv(series))
    path = cfg.dataset_path()
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        raise SchemaError(f"{path} is not UTF-8 text") from None
    if kind == "ohlcv":
        return parse_ohlcv_csv(text, symbol=cfg.dataset_name), None, _sha(raw)
    return None, read_frame(text), _sha(raw)


def _pool_key(fingerprint, cfg):
    spec = {
        "data": fingerprint,
        "periods": cfg["periods"],
        "lags": cfg["lags"],
        "nan_drop_frac": cfg["nan_drop_frac"],
        "catalog": indicators.dump_catalog(),
        "version": __version__,
    }
    return _sha(json.dumps(spec, sort_keys=True))[:24]


def feature_pool(series, cfg, fingerprint, cache_dir=None):
    """Build the pool, reading and writing the frame cache when one is configured."""
    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    path = None
    if cache_dir:
        path = Path(cache_dir) / f"pool-{_pool_key(fingerprint, cfg)}.csv"
        if path.exists():
            X, _ = read_frame(path.read_text())
            return X
    X = build_pool(series, cfg["periods"], cfg["lags"], cfg["nan_drop_frac"])
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(write_frame(X))
        os.replace(tmp, path)
    return X


@dataclass
class Prepared:
    """Aligned raw features, targets and the train/test split for one config.

    Regression targets are scaled log returns; classification targets are
    stored as -1/+1.
    """

    X: FeatureMatrix
    y: np.ndarray
    split: object
    fingerprint: str
    n_pool_columns: int


def prepare(cfg, clock=None):
    clock = clock or _Clock()
    with clock.stage("ingest"):
        series, frame, fingerprint = load_dataset(cfg)
    with clock.stage("features"):
        if series is not None:
            X = feature_pool(series, cfg, fingerprint)
        else:
            X, frame_targets = frame
    with clock.stage("targets"):
        kind = "log_return" if cfg.task == "regression" else "trend"
        if series is not None:
            ret, trend = series_targets(series, cfg["horizon"])
            target = ret if kind == "log_return" else trend
        else:
            if kind not in frame_targets:
                raise SchemaError(f"frame has no 'target:{kind}' column")
            target = TargetVector(kind, frame_targets[kind], cfg["horizon"], X.index)
        Xa, ya = align_horizon(X, target, cfg["horizon"])
        if kind == "trend":
            y = relabel(ya.values, "pm1")
        else:
            y = ya.values * cfg["return_scale"]
    with clock.stage("split"):
        sp = cfg["split"]
        idx = split(len(Xa), sp["frac"], sp["seed"], sp["mode"])
    return Prepared(Xa, y, idx, fingerprint, X.shape[1])


# -- fitting ----------------------------------------------------------------------


@dataclass(eq=False)
class FittedVariant:
    """Normalization, selection and forecaster fitted on training rows only."""

    task: str
    model_kind: str
    normalization: NormalizationParams
    input_names: list
    selected: list
    selector: Optional[LinearModel]
    model: object

    def transform(self, X):
        X = X.select(self.input_names)
        return apply_minmax(X, self.normalization).select(self.selected)

    def predict(self, X):
        """Values for regression, P(up) for classification."""
        Xs = self.transform(X)
        if self.model_kind == "null":
            return self.model.predict(len(Xs))
        if self.model_kind == "selector":
            return self.selector.predict(Xs)
        return self.model.predict(Xs)

    def to_dict(self):
        return {
            "format": VARIANT_FORMAT,
            "task": self.task,
            "model_kind": self.model_kind,
            "normalization": {
                "names": self.input_names,
                "minimum": self.normalization.minimum.tolist(),
                "maximum": self.normalization.maximum.tolist(),
            },
            "selected": self.selected,
            "selector": None if self.selector is None else self.selector.to_dict(),
            "model": None if self.model is None else self.model.to_dict(),
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != VARIANT_FORMAT:
            raise SchemaError(f"not a fitted-variant document: {d.get('format')!r}")
        norm = NormalizationParams(np.array(d["normalization"]["minimum"]), np.array(d["normalization"]["maximum"]))
        selector = None if d["selector"] is None else LinearModel.from_dict(d["selector"])
        m = d["model"]
        if m is None:
            model = None
        elif m["format"] == "annealcast.null/1":
            model = NullModel(float(m["mean"]))
        elif m["format"] == "annealcast.mlp/1":
            model = MlpModel.from_dict(m)
        else:
            model = LinearModel.from_dict(m)
        return cls(d["task"], d["model_kind"], norm, d["normalization"]["names"], d["selected"], selector, model)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def fit_selection(cfg, X_train, y_train):
    """Min-max scaling and feature selection on training rows; returns (params, names, selector)."""
    params = fit_minmax(X_train)
    Xn = apply_minmax(X_train, params)
    sel_cfg = cfg.selector_config()
    kind = cfg["selector"]["kind"]
    if kind == "none":
        return params, list(X_train.column_names), None
    if kind == "fsa":
        selector = fsa_fit(Xn, y_train, sel_cfg)
    else:
        selector = lasso_fit(Xn, y_train, sel_cfg)
    return params, selector.support, selector


def fit_model(cfg, Xs, y_train):
    """Forecaster on the selected (normalized) training columns."""
    kind = cfg["model"]["kind"]
    mcfg = cfg.model_config()
    y01 = relabel(y_train, "zero_one") if cfg.task == "classification" else y_train
    if kind == "null":
        return null_fit(y01)
    if kind == "selector":
        return None
    if kind == "linear":
        return linear_fit(Xs, y01)
    if kind == "logreg":
        return logreg_fit(Xs, y01, mcfg)
    return mlp_fit(Xs, y01, mcfg)


def fit_variant(cfg, X_train, y_train, clock=None, selection=None):
    clock = clock or _Clock()
    with clock.stage("select"):
        if selection is None:
            selection = fit_selection(cfg, X_train, y_train)
        params, selected, selector = selection
        Xs = apply_minmax(X_train, params).select(selected)
    with clock.stage("train"):
        model = fit_model(cfg, Xs, y_train)
    return FittedVariant(cfg.task, cfg["model"]["kind"], params, list(X_train.column_names), list(selected), selector, model)


def _validation_score(cfg, fv, X_val, y_val):
    pred = fv.predict(X_val)
    if cfg.task == "regression":
        return float(np.mean((y_val - pred) ** 2))
    labels = np.where(pred >= 0.5, 1.0, -1.0)
    return -float(np.mean(labels == y_val))


def grid_search(cfg, X_train, y_train):
    """Pick grid overrides on a validation fold carved from the training rows.

    Returns (chosen overrides, [(overrides, score)]); lower scores are better
    (MSE, or negated accuracy). Ties keep the earlier grid point.
    """
    points = cfg.grid_points()
    if not points:
        return {}, []
    fold = split(len(X_train), 1.0 - cfg["validation_frac"], cfg["seed"], cfg["split"]["mode"])
    X_fit, y_fit = X_train.take_rows(fold.train_rows), y_train[fold.train_rows]
    X_val, y_val = X_train.take_rows(fold.test_rows), y_train[fold.test_rows]
    results = []
    for point in points:
        sub = cfg.with_overrides(point)
        fv = fit_variant(sub, X_fit, y_fit)
        results.append((point, _validation_score(sub, fv, X_val, y_val)))
    best = min(range(len(results)), key=lambda i: (results[i][1], i))
    return results[best][0], results


# -- run --------------------------------------------------------------------------


@dataclass(eq=False)
class RunRecord:
    config_hash: str
    name: str
    dataset: str
    task: str
    config: dict
    versions: dict
    backend: str
    timings: dict
    selected: list
    variant: Optional[FittedVariant]
    report: Optional[EvalReport]
    n_pool_columns: int
    n_train: int
    n_test: int
    grid: list = field(default_factory=list)
    completed_stage: str = "report"
    test_index: np.ndarray = None
    y_test: np.ndarray = None
    predictions: np.ndarray = None

    @property
    def metrics(self):
        return None if self.report is None else self.report.metrics[self.name]

    def metrics_document(self):
        """Everything needed to compare runs; no timings, so reruns match byte for byte."""
        return {
            "config_hash": self.config_hash,
            "name": self.name,
            "dataset": self.dataset,
            "task": self.task,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_pool_columns": self.n_pool_columns,
            "n_selected": len(self.selected),
            "metrics": self.metrics,
        }

    def to_dict(self):
        return {
            "config_hash": self.config_hash,
            "name": self.name,
            "dataset": self.dataset,
            "task": self.task,
            "config": self.config,
            "versions": self.versions,
            "backend": self.backend,
            "timings": self.timings,
            "completed_stage": self.completed_stage,
            "n_pool_columns": self.n_pool_columns,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "selected": self.selected,
            "grid": [{"params": p, "score": s} for p, s in self.grid],
            "report": None if self.report is None else self.report.to_dict(),
        }


def _predictions_csv(prep, rows, y_true, pred):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "date", "y_true", "prediction"])
    X = prep.X
    for r, yt, p in zip(rows, y_true, pred):
        date = "" if X.dates is None else str(X.dates[r])
        w.writerow([int(X.index[r]), date, format(yt, ".17g"), format(p, ".17g")])
    return buf.getvalue()


def read_predictions(text):
    rows, y, p = [], [], []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(int(rec["row"]))
        y.append(float(rec["y_true"]))
        p.append(float(rec["prediction"]))
    return np.array(rows, dtype=np.int64), np.array(y), np.array(p)


def _dump(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


class _Output:
    """Stages files in a scratch directory and moves them in place on success."""

    def __init__(self, out):
        self.out = None if out is None else Path(out)
        self.scratch = None
        if self.out is not None:
            self.out.parent.mkdir(parents=True, exist_ok=True)
            self.scratch = Path(tempfile.mkdtemp(prefix=f".{self.out.name}-", dir=self.out.parent))

    def write(self, name, text):
        if self.scratch is not None:
            (self.scratch / name).write_text(text)

    def commit(self):
        if self.scratch is None:
            return
        self.out.mkdir(parents=True, exist_ok=True)
        for f in sorted(self.scratch.iterdir()):
            os.replace(f, self.out / f.name)
        self.scratch.rmdir()

    def discard(self):
        if self.scratch is not None:
            shutil.rmtree(self.scratch, ignore_errors=True)


def _resume(out, config_hash):
    """Previously written variant or selection for the same config, if any."""
    if out is None:
        return None, None
    out = Path(out)
    variant = selection = None
    mpath, spath = out / "model.json", out / "selected.json"
    if mpath.exists():
        doc = json.loads(mpath.read_text())
        if doc.get("config_hash") == config_hash:
            variant = FittedVariant.from_dict(doc["variant"])
    if variant is None and spath.exists():
        doc = json.loads(spath.read_text())
        if doc.get("config_hash") == config_hash:
            norm = NormalizationParams(np.array(doc["normalization"]["minimum"]), np.array(doc["normalization"]["maximum"]))
            selector = None if doc["selector"] is None else LinearModel.from_dict(doc["selector"])
            selection = (norm, doc["selected"], selector)
    return variant, selection


def run_experiment(cfg, out=None, stop_after="report", resume=False):
    """Run one config; with ``out`` the artifacts land in that directory.

    ``stop_after`` is one of select, train, evaluate, report. On failure
    nothing is written and the error carries the failing ``stage``.
    """
    cfg = load_config(cfg)
    if stop_after not in ("select", "train", "evaluate", "report"):
        raise ConfigError(f"unknown stop stage {stop_after!r}")
    clock = _Clock()
    output = _Output(out)
    try:
        record = _run(cfg, clock, output, stop_after, out if resume else None)
        output.commit()
    except BaseException:
        output.discard()
        raise
    return record


def _run(cfg, clock, output, stop_after, resume_dir):
    prep = prepare(cfg, clock)
    config_hash = cfg.config_hash(prep.fingerprint)
    tr, te = prep.split.train_rows, prep.split.test_rows
    X_train, y_train = prep.X.take_rows(tr), prep.y[tr]
    output.write("config.json", _dump(cfg.doc))

    variant, selection = _resume(resume_dir, config_hash)
    grid = []
    if variant is None:
        chosen, grid = grid_search(cfg, X_train, y_train)
        final = cfg.with_overrides(chosen) if chosen else cfg
        if stop_after == "select":
            with clock.stage("select"):
                selection = selection or fit_selection(final, X_train, y_train)
        else:
            variant = fit_variant(final, X_train, y_train, clock, selection)
            selection = (variant.normalization, variant.selected, variant.selector)
    else:
        selection = (variant.normalization, variant.selected, variant.selector)

    norm, selected, selector = selection
    output.write(
        "selected.json",
        _dump(
            {
                "config_hash": config_hash,
                "selected": list(selected),
                "normalization": {"names": list(prep.X.column_names), "minimum": norm.minimum.tolist(), "maximum": norm.maximum.tolist()},
                "selector": None if selector is None else selector.to_dict(),
            }
        ),
    )
    record = RunRecord(
        config_hash, cfg.name, cfg.dataset_name, cfg.task, cfg.doc, versions(), kernels.BACKEND, clock.timings,
        list(selected), variant, None, prep.n_pool_columns, len(tr), len(te), grid, stop_after,
    )
    if variant is not None:
        output.write("model.json", _dump({"config_hash": config_hash, "variant": variant.to_dict()}))
    if stop_after in ("select", "train"):
        output.write("run_record.json", _dump(record.to_dict()))
        return record

    with clock.stage("evaluate"):
        pred = variant.predict(prep.X.take_rows(te))
        y_test = prep.y[te]
        y_eval = relabel(y_test, "zero_one") if cfg.task == "classification" else y_test
        report = evaluate(cfg.task, y_eval, {cfg.name: pred}, cfg["alpha"])
    record.report = report
    record.test_index = prep.X.index[te]
    record.y_test = y_eval
    record.predictions = pred
    output.write("predictions.csv", _predictions_csv(prep, te, y_eval, pred))
    output.write("metrics.json", _dump(record.metrics_document()))
    if stop_after == "report":
        with clock.stage("report"):
            for metric in headline_metrics(cfg.task):
                table = comparison_table({cfg.dataset_name: report}, metric)
                output.write(f"report_{metric}.txt", render(table, "txt"))
                output.write(f"report_{metric}.csv", render(table, "csv"))
    output.write("run_record.json", _dump(record.to_dict()))
    return record


# -- suites -----------------------------------------------------------------------


@dataclass
class SuiteResult:
    records: list
    reports: dict  # dataset -> EvalReport
    tables: dict  # metric -> ComparisonTable


def _group_by_dataset(configs):
    groups = {}
    for cfg in configs:
        groups.setdefault(cfg.dataset_name, []).append(cfg)
    for name, group in groups.items():
        keys = {c.protocol_key() for c in group}
        if len(keys) > 1:
            raise ProtocolError(f"configs on dataset {name!r} disagree on data, task, split or horizon")
        names = [c.name for c in group]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate variant names on dataset {name!r}")
    tasks = {c.task for c in configs}
    if len(tasks) > 1:
        raise ProtocolError("a suite must use a single task")
    return groups


def _suite_job(args):
    cfg, out = args
    return run_experiment(cfg, out)


def compare_runs(by_dataset, task, alpha=0.05, title=None):
    """Evaluate runs that share test rows; returns (reports, tables)."""
    reports = {}
    for ds, runs in by_dataset.items():
        first = runs[0]
        for r in runs[1:]:
            if not np.array_equal(r["test_index"], first["test_index"]) or not np.array_equal(r["y_test"], first["y_test"]):
                raise ProtocolError(f"runs on {ds!r} were evaluated on different test rows")
        reports[ds] = evaluate(task, first["y_test"], {r["name"]: r["predictions"] for r in runs}, alpha)
    tables = {}
    for metric in headline_metrics(task):
        label = f"{title}: {metric}" if title else None
        tables[metric] = comparison_table(reports, metric, label)
    return reports, tables


def _write_tables(out, tables, reports, fmt=None):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for metric, table in tables.items():
        for f in ("txt", "csv") if fmt is None else (fmt,):
            (out / f"report_{metric}.{f}").write_text(render(table, f))
    (out / "suite.json").write_text(_dump({ds: rep.to_dict() for ds, rep in reports.items()}))


def run_suite(configs, out=None, jobs=1, title=None):
    """Run every config and compare variants per dataset (rows: variants, columns: datasets)."""
    configs = [load_config(c) for c in configs]
    if not configs:
        raise ConfigError("empty suite")
    groups = _group_by_dataset(configs)
    work = []
    for ds, group in groups.items():
        for cfg in group:
            sub = None if out is None else Path(out) / _safe(ds) / _safe(cfg.name)
            work.append((cfg, sub))
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_suite_job, work))
    else:
        records = [_suite_job(w) for w in work]
    by_dataset = {}
    for rec in records:
        by_dataset.setdefault(rec.dataset, []).append(
            {"name": rec.name, "test_index": rec.test_index, "y_test": rec.y_test, "predictions": rec.predictions}
        )
    reports, tables = compare_runs(by_dataset, configs[0].task, configs[0]["alpha"], title)
    if out is not None:
        _write_tables(out, tables, reports)
    return SuiteResult(records, reports, tables)


def _safe(name):
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def load_runs(paths):
    """Completed run directories (searched recursively) grouped by dataset, plus the task."""
    by_dataset, tasks = {}, set()
    found = []
    for p in paths:
        p = Path(p)
        found += [p] if (p / "run_record.json").exists() else sorted(q.parent for q in p.rglob("run_record.json"))
    for d in found:
        rec = json.loads((d / "run_record.json").read_text())
        if rec.get("completed_stage") not in ("evaluate", "report"):
            continue
        rows, y, pred = read_predictions((d / "predictions.csv").read_text())
        tasks.add(rec["task"])
        by_dataset.setdefault(rec["dataset"], []).append({"name": rec["name"], "test_index": rows, "y_test": y, "predictions": pred})
    if not by_dataset:
        raise DataError("no completed runs found")
    if len(tasks) > 1:
        raise ProtocolError("runs mix regression and classification")
    return by_dataset, tasks.pop()
