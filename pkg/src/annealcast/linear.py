"""Sparse linear model shared by the FSA, Lasso and logistic-regression fitters."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

LOSSES = ("squared", "logistic")
FORMAT = "annealcast.linear/1"


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=float)
    return np.exp(-np.logaddexp(0.0, -x))


def as_matrix(X):
    """(names or None, 2-D float array) from a FeatureMatrix or an array."""
    if hasattr(X, "column_names"):
        return list(X.column_names), X.data
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise SchemaError("expected a 2-D feature matrix")
    return None, arr


def as_vector(y):
    return np.asarray(getattr(y, "values", y), dtype=float).ravel()


@dataclass(eq=False)
class LinearModel:
    names: list
    coef: np.ndarray
    intercept: float
    loss: str = "squared"
    train_loss_trace: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=float)
        if len(self.names) != len(self.coef):
            raise SchemaError("one coefficient per feature name required")
        if self.loss not in LOSSES:
            raise SchemaError(f"unknown loss {self.loss!r}")

    @property
    def beta(self):
        return dict(zip(self.names, self.coef.tolist()))

    @property
    def support(self):
        return [n for n, w in zip(self.names, self.coef) if w != 0.0]

    def decision_function(self, X):
        """Intercept plus the linear score; only support columns are read."""
        names, data = as_matrix(X)
        nz = np.flatnonzero(self.coef)
        if names is None:
            if data.shape[1] != len(self.names):
                raise SchemaError(f"expected {len(self.names)} columns, got {data.shape[1]}")
            cols = nz
        else:
            pos = {n: i for i, n in enumerate(names)}
            missing = [self.names[j] for j in nz if self.names[j] not in pos]
            if missing:
                raise SchemaError(f"feature(s) missing from input: {', '.join(missing[:5])}")
            cols = [pos[self.names[j]] for j in nz]
        return self.intercept + data[:, cols] @ self.coef[nz]

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def predict(self, X):
        """Regression output, or P(y = 1) for the logistic loss."""
        if self.loss == "logistic":
            return self.predict_proba(X)
        return self.decision_function(X)

    def to_dict(self):
        return {
            "format": FORMAT,
            "loss": self.loss,
            "intercept": float(self.intercept),
            "weights": [[n, float(w)] for n, w in zip(self.names, self.coef)],
            "train_loss_trace": [float(v) for v in self.train_loss_trace],
            "meta": self.meta,
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT:
            raise SchemaError(f"not a linear model document: {d.get('format')!r}")
        names = [w[0] for w in d["weights"]]
        coef = np.array([w[1] for w in d["weights"]], dtype=float)
        return cls(names, coef, float(d["intercept"]), d["loss"], list(d["train_loss_trace"]), dict(d.get("meta", {})))

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))
