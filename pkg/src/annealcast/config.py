"""Experiment configuration: JSON documents checked against experiment.schema.json."""
from __future__ import annotations

import copy
import hashlib
import itertools
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .features import DEFAULT_HORIZON, DEFAULT_LAGS, DEFAULT_NAN_DROP_FRAC, DEFAULT_PERIODS
from .fsa import FsaConfig
from .lasso import LassoConfig
from .market_data import DEFAULT_SPLIT_SEED
from .models import LogRegConfig, MlpConfig

DEFAULTS = {
    "horizon": DEFAULT_HORIZON,
    "periods": list(DEFAULT_PERIODS),
    "lags": list(DEFAULT_LAGS),
    "nan_drop_frac": DEFAULT_NAN_DROP_FRAC,
    "split": {"frac": 0.7, "mode": "random"},
    "selector": {"kind": "none"},
    "return_scale": 100.0,
    "validation_frac": 0.2,
    "seed": DEFAULT_SPLIT_SEED,
    "alpha": 0.05,
    "grid": {},
}

DEFAULT_MODEL = {"regression": "linear", "classification": "logreg"}

MODELS_FOR_TASK = {
    "regression": ("null", "linear", "mlp", "selector"),
    "classification": ("null", "logreg", "mlp", "selector"),
}


def schema():
    return json.loads(resources.files("annealcast").joinpath("experiment.schema.json").read_text())


def _validate(doc):
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def _params(section):
    return {k: v for k, v in section.items() if k != "kind"}


def _build(cls, params, what):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(params) - known)
    if unknown:
        raise ConfigError(f"unknown {what} parameter(s): {', '.join(unknown)}")
    try:
        return cls(**params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad {what} parameters: {exc}") from None


def _selector_config(doc):
    sel = doc["selector"]
    kind = sel["kind"]
    params = _params(sel)
    if kind == "none":
        if params:
            raise ConfigError("selector 'none' takes no parameters")
        return None
    if kind == "fsa":
        params.setdefault("loss", "squared" if doc["task"] == "regression" else "logistic")
        params.setdefault("seed", doc["seed"])
        if isinstance(params.get("eta"), list):
            params["eta"] = tuple(params["eta"])
        return _build(FsaConfig, params, "fsa")
    if "lam" not in params and "target_support" not in params:
        params["target_support"] = 10
    return _build(LassoConfig, params, "lasso")


def _model_config(doc):
    model = doc["model"]
    kind = model["kind"]
    params = _params(model)
    if kind == "logreg":
        return _build(LogRegConfig, params, "logreg")
    if kind == "mlp":
        params.setdefault("loss", "mse" if doc["task"] == "regression" else "bce")
        params.setdefault("seed", doc["seed"])
        return _build(MlpConfig, params, "mlp")
    if params:
        raise ConfigError(f"model {kind!r} takes no parameters")
    return None


@dataclass
class ExperimentConfig:
    """A validated experiment document with defaults filled in.

    ``doc`` is the canonical form; relative dataset paths are resolved
    against ``base_dir``.
    """

    doc: dict
    base_dir: Path = Path(".")

    def __post_init__(self):
        _validate(self.doc)
        merged = copy.deepcopy(DEFAULTS)
        for key, value in self.doc.items():
            if key == "split":
                merged["split"].update(value)
            else:
                merged[key] = copy.deepcopy(value)
        merged.setdefault("model", {"kind": DEFAULT_MODEL[merged["task"]]})
        merged["split"].setdefault("seed", merged["seed"])
        merged.setdefault("name", self._default_name(merged))
        self.doc = merged
        self.base_dir = Path(self.base_dir)
        self._check_semantics()

    @staticmethod
    def _default_name(doc):
        sel = doc["selector"]["kind"]
        model = doc["model"]["kind"]
        return model if sel == "none" else f"{sel}-{model}"

    # -- accessors -------------------------------------------------------

    @property
    def name(self):
        return self.doc["name"]

    @property
    def task(self):
        return self.doc["task"]

    @property
    def dataset(self):
        return self.doc["dataset"]

    @property
    def dataset_name(self):
        ds = self.dataset
        if "name" in ds:
            return ds["name"]
        if "symbol" in ds:
            return ds["symbol"]
        if "path" in ds:
            return Path(ds["path"]).stem
        return f"synthetic-{ds.get('seed', 0)}"

    def dataset_path(self):
        path = Path(self.dataset["path"])
        return path if path.is_absolute() else self.base_dir / path

    def __getitem__(self, key):
        return self.doc[key]

    def with_overrides(self, overrides):
        """Copy with dotted-path overrides such as ``{"model.c": 0.1}``."""
        doc = copy.deepcopy(self.doc)
        for path, value in overrides.items():
            section, key = path.split(".", 1)
            doc[section][key] = value
        doc["grid"] = {}
        return ExperimentConfig(doc, self.base_dir)

    def grid_points(self):
        """Cartesian product of the grid lists, keys in sorted order."""
        grid = self.doc["grid"]
        keys = sorted(grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]

    def selector_config(self):
        return _selector_config(self.doc)

    def model_config(self):
        return _model_config(self.doc)

    def _check_semantics(self):
        kind = self.doc["model"]["kind"]
        sel = self.doc["selector"]["kind"]
        if kind not in MODELS_FOR_TASK[self.task]:
            raise ConfigError(f"model {kind!r} is not available for {self.task}")
        if kind == "selector" and sel == "none":
            raise ConfigError("model 'selector' needs a selector")
        if kind == "selector" and sel == "lasso" and self.task == "classification":
            raise ConfigError("the Lasso selector is not a classifier; pair it with logreg or mlp")
        for key in self.doc["grid"]:
            section, param = key.split(".", 1)
            if param == "kind":
                raise ConfigError("grid cannot vary the selector or model kind")
        for point in self.grid_points() or [{}]:
            probe = copy.deepcopy(self.doc)
            for path, value in point.items():
                section, key = path.split(".", 1)
                probe[section][key] = value
            cfg = _model_config(probe)
            if isinstance(cfg, MlpConfig) and cfg.loss != ("mse" if self.task == "regression" else "bce"):
                raise ConfigError(f"mlp loss {cfg.loss!r} does not fit the {self.task} task")
            _selector_config(probe)

    # -- identity --------------------------------------------------------

    def canonical(self):
        doc = {k: v for k, v in self.doc.items() if k != "output"}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def config_hash(self, data_fingerprint=""):
        h = hashlib.sha256(self.canonical().encode())
        h.update(data_fingerprint.encode())
        return h.hexdigest()[:16]

    def protocol_key(self):
        """Fields that must agree for two runs to be compared row by row."""
        d = self.doc
        return json.dumps(
            {
                "dataset": d["dataset"],
                "task": d["task"],
                "split": d["split"],
                "horizon": d["horizon"],
                "periods": d["periods"],
                "lags": d["lags"],
                "nan_drop_frac": d["nan_drop_frac"],
                "return_scale": d["return_scale"],
            },
            sort_keys=True,
        )


def load_config(source, base_dir=None):
    """Load from a path, JSON text, or a dict."""
    if isinstance(source, ExperimentConfig):
        return source
    if isinstance(source, dict):
        return ExperimentConfig(copy.deepcopy(source), Path(base_dir or "."))
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return ExperimentConfig(doc, Path(base_dir) if base_dir else path.parent)


def expand_suite(doc, base_dir="."):
    """Configs for a suite document: every variant on every dataset.

    ``{"base": {...}, "datasets": [{...}], "variants": [{"name", "selector", "model"}]}``
    """
    if not isinstance(doc, dict) or "datasets" not in doc or "variants" not in doc:
        raise ConfigError("suite needs 'datasets' and 'variants'")
    base = doc.get("base", {})
    configs = []
    for ds in doc["datasets"]:
        for var in doc["variants"]:
            if "name" not in var:
                raise ConfigError("every variant needs a name")
            merged = copy.deepcopy(base)
            merged["dataset"] = copy.deepcopy(ds)
            for key, value in var.items():
                merged[key] = copy.deepcopy(value)
            configs.append(ExperimentConfig(merged, Path(base_dir)))
    return configs


def load_suite(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read suite {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg})") from None
    return expand_suite(doc, path.parent)
