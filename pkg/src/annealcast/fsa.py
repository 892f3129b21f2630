"""Feature Selection with Annealing.

Gradient descent on a linear model's loss, interleaved with pruning: after
the gradient step of epoch ``e`` only the ``M_e`` coefficients of largest
magnitude survive, where ``M_e`` shrinks from the full feature count ``M``
to the target ``k`` along an annealing schedule. Pruned features never come
back. The intercept is unpenalized and never pruned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DivergenceError, EncodingError, InsufficientDataError
from .linear import LinearModel, as_matrix, as_vector, sigmoid

SCALINGS = ("none", "center", "standardize")


def annealing_schedule(e, M, k, mu, n_iter):
    """Features kept after epoch ``e``.

    M_e = k + (M - k) * max(0, (n_iter - 2e) / (2e*mu + n_iter)), rounded half
    up and clamped to [k, M]. M_0 = M and M_e = k from e = n_iter/2 on.
    """
    if M < k:
        raise ConfigError(f"initial feature count {M} is below k={k}")
    if not 0 <= e <= n_iter:
        raise ConfigError(f"epoch {e} outside 0..{n_iter}")
    frac = max(0.0, (n_iter - 2.0 * e) / (2.0 * e * mu + n_iter))
    m = math.floor(k + (M - k) * frac + 0.5)
    return int(min(M, max(k, m)))


@dataclass
class FsaConfig:
    k: int = 10
    mu: float = 300.0
    # a float, or (start, end) interpolated linearly over the epochs
    eta: Union[float, Sequence[float]] = 0.01
    n_iter: int = 300
    loss: str = "squared"
    seed: int = 0
    # accepted so external FSA configs load unchanged; has no effect
    s: Optional[float] = None
    scaling: str = "center"
    batch_size: Optional[int] = None
    schedule: Callable = annealing_schedule

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.mu < 0:
            raise ConfigError("mu must be >= 0")
        if self.n_iter < 1:
            raise ConfigError("n_iter must be >= 1")
        if min(self.eta_range) <= 0:
            raise ConfigError("eta must be > 0")
        if self.loss not in ("squared", "logistic"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.scaling not in SCALINGS:
            raise ConfigError(f"unknown scaling {self.scaling!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    @property
    def eta_range(self):
        if isinstance(self.eta, (int, float)):
            return float(self.eta), float(self.eta)
        start, end = self.eta
        return float(start), float(end)

    def eta_at(self, e):
        """Learning rate for epoch e (1-based)."""
        start, end = self.eta_range
        if self.n_iter == 1:
            return start
        return start + (end - start) * (e - 1) / (self.n_iter - 1)


# -- losses on transformed features (Z) with intercept b ----------------------


def squared_loss(w, b, Z, y):
    r = y - b - Z @ w
    return float(r @ r) / len(y)


def squared_grad(w, b, Z, y):
    r = y - b - Z @ w
    n = len(y)
    return -2.0 / n * (Z.T @ r), -2.0 / n * float(r.sum())


def logistic_loss(w, b, Z, y):
    """Mean log(1 + exp(-y*s)) for labels in {-1, +1}."""
    s = b + Z @ w
    return float(np.logaddexp(0.0, -y * s).mean())


def logistic_grad(w, b, Z, y):
    s = b + Z @ w
    g = -y * sigmoid(-y * s) / len(y)
    return Z.T @ g, float(g.sum())


LOSS_FUNCS = {"squared": (squared_loss, squared_grad), "logistic": (logistic_loss, logistic_grad)}


def lipschitz_bound(Z, loss="squared", n_power=100, seed=0):
    """Power-iteration estimate of the gradient's Lipschitz constant in (b, w)."""
    n = Z.shape[0]
    A = np.hstack([np.ones((n, 1)), Z])
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    lam = 0.0
    for _ in range(n_power):
        u = A.T @ (A @ v) / n
        lam = float(np.linalg.norm(u))
        if lam == 0.0:
            break
        v = u / lam
    return (2.0 if loss == "squared" else 0.25) * lam


def _scaling(data, how):
    p = data.shape[1]
    if how == "none":
        return np.zeros(p), np.ones(p)
    mean = data.mean(axis=0)
    if how == "center":
        return mean, np.ones(p)
    sd = data.std(axis=0)
    return mean, np.where(sd > 0, sd, 1.0)


def _check_labels(y, loss):
    if loss == "logistic" and not np.isin(y, (-1.0, 1.0)).all():
        raise EncodingError("logistic FSA needs labels coded as -1/+1")


def fsa_fit(X, y, cfg=None, record_support=False):
    """Fit a linear model with at most ``cfg.k`` nonzero coefficients.

    With ``record_support`` the surviving column indices after every epoch
    are stored in ``model.meta['support_trace']``.
    """
    cfg = cfg or FsaConfig()
    names, data = as_matrix(X)
    y = as_vector(y)
    n, M = data.shape
    names = names or [f"x{j}" for j in range(M)]
    if n < 2 or len(y) != n:
        raise InsufficientDataError("need at least two rows and one target per row")
    if not np.isfinite(data).all() or not np.isfinite(y).all():
        raise InsufficientDataError("features and targets must be finite")
    if M < cfg.k:
        raise ConfigError(f"k={cfg.k} exceeds the {M} available features")
    _check_labels(y, cfg.loss)
    loss_fn, grad_fn = LOSS_FUNCS[cfg.loss]

    mean, scale = _scaling(data, cfg.scaling)
    Z = (data - mean) / scale
    active = np.arange(M)
    Za = Z
    w = np.zeros(M)
    b = 0.0
    trace = []
    support_trace = []
    rng = np.random.default_rng(cfg.seed)

    for e in range(1, cfg.n_iter + 1):
        eta = cfg.eta_at(e)
        if cfg.batch_size is None or cfg.batch_size >= n:
            batches = [None]
        else:
            perm = rng.permutation(n)
            batches = [perm[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
        with np.errstate(over="ignore", invalid="ignore"):
            for rows in batches:
                if rows is None:
                    gw, gb = grad_fn(w, b, Za, y)
                else:
                    gw, gb = grad_fn(w, b, Za[rows], y[rows])
                if not (np.isfinite(gb) and np.isfinite(gw).all()):
                    raise DivergenceError(e)
                w = w - eta * gw
                b = b - eta * gb

        keep = cfg.schedule(e, M, cfg.k, cfg.mu, cfg.n_iter)
        if keep < len(active):
            # largest |w| first; equal magnitudes keep the lower column index
            order = np.lexsort((active, -np.abs(w)))[:keep]
            order.sort()
            active = active[order]
            w = w[order]
            Za = Z[:, active]
        with np.errstate(over="ignore", invalid="ignore"):
            current = loss_fn(w, b, Za, y)
        if not np.isfinite(current):
            raise DivergenceError(e)
        trace.append(current)
        if record_support:
            support_trace.append(active.tolist())

    coef = np.zeros(M)
    coef[active] = w / scale[active]
    intercept = b - float(coef[active] @ mean[active])
    meta = {
        "selector": "fsa",
        "k": cfg.k,
        "mu": cfg.mu,
        "eta": list(cfg.eta_range),
        "n_iter": cfg.n_iter,
        "scaling": cfg.scaling,
    }
    if record_support:
        meta["support_trace"] = support_trace
    return LinearModel(list(names), coef, intercept, cfg.loss, trace, meta)
