"""Forecasters: null model, least squares, logistic regression and a feed-forward net."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, ConvergenceError, DegenerateTargetError, DivergenceError, EncodingError, SchemaError
from .linear import LinearModel, as_matrix, as_vector, sigmoid

# -- null ----------------------------------------------------------------------


@dataclass
class NullModel:
    mean: float

    def predict(self, X):
        n = X if isinstance(X, (int, np.integer)) else len(as_matrix(X)[1])
        return np.full(int(n), self.mean)

    def to_dict(self):
        return {"format": "annealcast.null/1", "mean": self.mean}


def null_fit(y_train):
    y = as_vector(y_train)
    if y.size == 0:
        raise DegenerateTargetError("empty training target")
    return NullModel(float(y.mean()))


def null_predict(model, n):
    return model.predict(n)


# -- ordinary least squares ------------------------------------------------------


def linear_fit(X, y):
    """Least squares with intercept; minimum-norm solution when rank deficient."""
    names, data = as_matrix(X)
    y = as_vector(y)
    names = names or [f"x{j}" for j in range(data.shape[1])]
    mean = data.mean(axis=0)
    ybar = float(y.mean())
    coef = np.linalg.lstsq(data - mean, y - ybar, rcond=None)[0] if data.shape[1] else np.zeros(0)
    return LinearModel(names, coef, ybar - float(coef @ mean), "squared", [], {"model": "linear"})


# -- logistic regression ----------------------------------------------------------


@dataclass
class LogRegConfig:
    c: float = 1.0
    penalty: str = "l2"
    tol: float = 1e-4
    max_iter: int = 20_000

    def __post_init__(self):
        if self.c <= 0:
            raise ConfigError("c must be > 0")
        if self.penalty not in ("l2", "none"):
            raise ConfigError(f"unknown penalty {self.penalty!r}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ConfigError("tol must be > 0 and max_iter >= 1")


def logreg_objective(theta, Z, y, c, penalty="l2"):
    """Mean negative log-likelihood + ||w||^2 / (2 c n); theta = [intercept, w]."""
    s = theta[0] + Z @ theta[1:]
    nll = float(np.mean(np.logaddexp(0.0, s) - y * s))
    if penalty == "l2":
        w = theta[1:]
        nll += float(w @ w) / (2.0 * c * len(y))
    return nll


def logreg_gradient(theta, Z, y, c, penalty="l2"):
    n = len(y)
    resid = (sigmoid(theta[0] + Z @ theta[1:]) - y) / n
    g = np.empty_like(theta)
    g[0] = resid.sum()
    g[1:] = Z.T @ resid
    if penalty == "l2":
        g[1:] += theta[1:] / (c * n)
    return g


def _canonical_rows(data, y):
    """Row order that depends only on row contents (lexicographic on y, then columns)."""
    keys = [data[:, j] for j in range(data.shape[1] - 1, -1, -1)] + [y]
    return np.lexsort(keys)


def logreg_fit(X, y, cfg=None):
    """L2-regularized logistic regression by gradient descent with backtracking.

    Rows are put in a canonical order first, so any permutation of the
    training rows gives a bit-identical model. Columns are centered
    internally (an exact reparametrization of the unpenalized intercept).
    Each iteration tries double the previous step and halves it until the
    Armijo condition f(t) <= f - t/2 * ||g||^2 holds; stops when
    ||g||_inf < tol.
    """
    cfg = cfg or LogRegConfig()
    names, data = as_matrix(X)
    y = as_vector(y)
    names = names or [f"x{j}" for j in range(data.shape[1])]
    if not np.isin(y, (0.0, 1.0)).all():
        raise EncodingError("logistic regression needs labels coded as 0/1")
    if np.unique(y).size < 2:
        raise DegenerateTargetError("both classes must be present")
    order = _canonical_rows(data, y)
    data = data[order]
    y = y[order]
    mean = data.mean(axis=0)
    Z = data - mean

    theta = np.zeros(Z.shape[1] + 1)
    f = logreg_objective(theta, Z, y, cfg.c, cfg.penalty)
    trace = [f]
    step = 1.0
    for it in range(1, cfg.max_iter + 1):
        g = logreg_gradient(theta, Z, y, cfg.c, cfg.penalty)
        if float(np.max(np.abs(g))) < cfg.tol:
            break
        gg = float(g @ g)
        step = min(step * 2.0, 1e6)
        while True:
            cand = theta - step * g
            fc = logreg_objective(cand, Z, y, cfg.c, cfg.penalty)
            if fc <= f - 0.5 * step * gg:
                break
            step *= 0.5
            if step < 1e-20:
                raise ConvergenceError("line search failed", residual=float(np.max(np.abs(g))))
        theta, f = cand, fc
        trace.append(f)
    else:
        g = logreg_gradient(theta, Z, y, cfg.c, cfg.penalty)
        raise ConvergenceError(
            f"logistic regression did not reach tol {cfg.tol} in {cfg.max_iter} iterations",
            residual=float(np.max(np.abs(g))),
        )
    coef = theta[1:].copy()
    meta = {"model": "logreg", "c": cfg.c, "penalty": cfg.penalty, "iterations": it}
    return LinearModel(names, coef, float(theta[0] - coef @ mean), "logistic", trace, meta)


def logreg_predict_proba(model, X):
    return model.predict_proba(X)


def predict_label(proba, threshold=0.5):
    """1 where proba >= threshold (a probability of exactly 0.5 is class 1)."""
    return (np.asarray(proba) >= threshold).astype(int)


# -- feed-forward network ------------------------------------------------------------

ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(float)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "sigmoid": (sigmoid, lambda z, a: a * (1.0 - a)),
}
ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


@dataclass
class MlpConfig:
    hidden_layers: Sequence[int] = (20,)
    activation: str = "tanh"
    optimizer: str = "adam"
    eta: float = 0.01
    momentum: float = 0.9
    epochs: int = 100
    batch_size: int = 32
    loss: str = "mse"
    seed: int = 0

    def __post_init__(self):
        self.hidden_layers = tuple(int(h) for h in self.hidden_layers)
        if not 1 <= len(self.hidden_layers) <= 3:
            raise ConfigError("an MLP needs 1 to 3 hidden layers")
        if any(h < 1 for h in self.hidden_layers):
            raise ConfigError("hidden layer widths must be positive")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.optimizer not in ("sgd_momentum", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in ("mse", "bce"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.eta <= 0 or not 0 <= self.momentum < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("invalid eta / momentum / epochs / batch_size")


@dataclass(eq=False)
class MlpModel:
    """Weights are stored (fan_in, fan_out); the last layer has one unit."""

    weights: list
    biases: list
    config: MlpConfig
    input_names: list = None
    train_loss_trace: list = field(default_factory=list)

    def _input(self, X):
        names, data = as_matrix(X)
        if names is not None and self.input_names is not None:
            pos = {n: i for i, n in enumerate(names)}
            missing = [n for n in self.input_names if n not in pos]
            if missing:
                raise SchemaError(f"feature(s) missing from input: {', '.join(missing[:5])}")
            data = data[:, [pos[n] for n in self.input_names]]
        if data.shape[1] != self.weights[0].shape[0]:
            raise SchemaError(f"expected {self.weights[0].shape[0]} inputs, got {data.shape[1]}")
        return data

    def forward(self, data):
        """Return (pre-activations, activations); activations[0] is the input."""
        act, dact = ACTIVATIONS[self.config.activation]
        zs, acts = [], [data]
        a = data
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            zs.append(z)
            if i < last:
                a = act(z)
            else:
                a = sigmoid(z) if self.config.loss == "bce" else z
            acts.append(a)
        return zs, acts

    def predict(self, X):
        """Regression output, or P(y = 1) for the bce loss."""
        return self.forward(self._input(X))[1][-1][:, 0]

    def to_dict(self):
        return {
            "format": "annealcast.mlp/1",
            "config": asdict(self.config),
            "input_names": self.input_names,
            "layers": [
                {"shape": list(W.shape), "weights": W.ravel().tolist(), "bias": b.tolist()}
                for W, b in zip(self.weights, self.biases)
            ],
            "train_loss_trace": [float(v) for v in self.train_loss_trace],
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "annealcast.mlp/1":
            raise SchemaError(f"not an MLP document: {d.get('format')!r}")
        cfg = MlpConfig(**d["config"])
        weights = [np.array(L["weights"], dtype=float).reshape(L["shape"]) for L in d["layers"]]
        biases = [np.array(L["bias"], dtype=float) for L in d["layers"]]
        for prev, nxt in zip(weights, weights[1:]):
            if prev.shape[1] != nxt.shape[0]:
                raise SchemaError("layer shapes do not chain")
        return cls(weights, biases, cfg, d.get("input_names"), list(d.get("train_loss_trace", [])))

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def mlp_init(n_inputs, cfg, rng=None):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    sizes = [n_inputs, *cfg.hidden_layers, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def mlp_loss(model, data, y):
    out = model.forward(data)[1][-1][:, 0]
    if model.config.loss == "mse":
        return float(np.mean((out - y) ** 2))
    p = np.clip(out, 1e-12, 1.0 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def mlp_gradients(model, data, y):
    """Backpropagation; returns (loss, [dW...], [db...])."""
    _, dact = ACTIVATIONS[model.config.activation]
    zs, acts = model.forward(data)
    out = acts[-1][:, 0]
    n = len(y)
    if model.config.loss == "mse":
        loss = float(np.mean((out - y) ** 2))
        delta = (2.0 / n) * (out - y)[:, None]
    else:
        p = np.clip(out, 1e-12, 1.0 - 1e-12)
        loss = float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
        # sigmoid output with cross-entropy: dL/dz = (p - y) / n
        delta = ((out - y) / n)[:, None]
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * dact(zs[i - 1], acts[i])
    return loss, grads_w, grads_b


def mlp_fit(X, y, cfg=None):
    cfg = cfg or MlpConfig()
    names, data = as_matrix(X)
    y = as_vector(y)
    if not np.isfinite(data).all() or not np.isfinite(y).all():
        raise SchemaError("features and targets must be finite")
    if cfg.loss == "bce" and not np.isin(y, (0.0, 1.0)).all():
        raise EncodingError("bce loss needs labels coded as 0/1")
    rng = np.random.default_rng(cfg.seed)
    weights, biases = mlp_init(data.shape[1], cfg, rng)
    model = MlpModel(weights, biases, cfg, names)
    params = [*model.weights, *model.biases]
    m1 = [np.zeros_like(q) for q in params]
    m2 = [np.zeros_like(q) for q in params]
    n = len(y)
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = perm[start : start + cfg.batch_size]
            loss, gw, gb = mlp_gradients(model, data[rows], y[rows])
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            step += 1
            for q, g, a, v in zip(params, [*gw, *gb], m1, m2):
                if cfg.optimizer == "adam":
                    a *= ADAM_BETA1
                    a += (1.0 - ADAM_BETA1) * g
                    v *= ADAM_BETA2
                    v += (1.0 - ADAM_BETA2) * g * g
                    a_hat = a / (1.0 - ADAM_BETA1**step)
                    v_hat = v / (1.0 - ADAM_BETA2**step)
                    q -= cfg.eta * a_hat / (np.sqrt(v_hat) + ADAM_EPS)
                else:
                    a *= cfg.momentum
                    a -= cfg.eta * g
                    q += a
        epoch_loss = mlp_loss(model, data, y)
        if not np.isfinite(epoch_loss):
            raise DivergenceError(epoch)
        model.train_loss_trace.append(epoch_loss)
    return model


def mlp_predict(model, X):
    return model.predict(X)
