"""L1-penalized least squares by cyclic coordinate descent.

Minimizes  1/2 * sum_i (y_i - b0 - x_i . beta)^2 + lam * sum_j |beta_j|
with the intercept unpenalized. Columns are centered and scaled to
||z_j||^2 = n for the solve; the per-coordinate penalty becomes lam/s_j so
the back-transformed coefficients solve the original problem exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConfigError, ConvergenceError, InsufficientDataError
from .linear import LinearModel, as_matrix, as_vector

BRACKET_RTOL = 1e-7


@dataclass
class LassoConfig:
    lam: Optional[float] = None
    target_support: Optional[int] = None
    tol: float = 1e-10
    max_sweeps: int = 100_000
    bisection_steps: int = 60

    def __post_init__(self):
        if (self.lam is None) == (self.target_support is None):
            raise ConfigError("set exactly one of lam / target_support")
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.target_support is not None and self.target_support < 1:
            raise ConfigError("target_support must be >= 1")
        if self.tol <= 0:
            raise ConfigError("tol must be > 0")


def soft_threshold(z, gamma):
    """sign(z) * max(|z| - gamma, 0)."""
    if np.any(np.asarray(gamma) < 0):
        raise ConfigError("threshold must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


def objective(X, y, coef, intercept, lam):
    r = y - intercept - X @ coef
    return 0.5 * float(r @ r) + lam * float(np.abs(coef).sum())


def lambda_max(X, y):
    """Smallest penalty at which every coefficient is zero."""
    _, data = as_matrix(X)
    y = as_vector(y)
    return float(np.max(np.abs(data.T @ (y - y.mean()))))


class _Problem:
    """Standardized design shared across penalty values (warm starts)."""

    def __init__(self, data, y):
        n = data.shape[0]
        self.n = n
        self.mean = data.mean(axis=0)
        centered = data - self.mean
        norms = np.sqrt((centered**2).sum(axis=0))
        self.scale = norms / math.sqrt(n)
        live = self.scale > 0
        safe = np.where(live, self.scale, 1.0)
        self.Z = np.asfortranarray(centered / safe)
        self.nrm2 = np.where(live, float(n), 0.0)
        self.safe = safe
        self.live = live
        self.ybar = float(y.mean())
        self.yc = y - self.ybar
        self.gamma = np.zeros(data.shape[1])

    def solve(self, lam, tol, max_sweeps, trace=None):
        """Full sweeps alternate with sweeps over the nonzero coordinates only.

        Converged when a full sweep moves no coordinate by ``tol`` or more.
        """
        pen = np.where(self.live, lam / self.safe, 0.0)
        r = self.yc - self.Z @ self.gamma
        everything = np.arange(len(self.gamma), dtype=np.intp)
        sweeps = 0
        change = math.inf
        while sweeps < max_sweeps:
            change = kernels.cd_sweep(self.Z, r, self.gamma, pen, self.nrm2, everything)
            sweeps += 1
            if trace is not None:
                trace.append(0.5 * float(r @ r) + float(pen @ np.abs(self.gamma)))
            if change < tol:
                return sweeps
            while sweeps < max_sweeps:
                active = np.flatnonzero(self.gamma).astype(np.intp)
                inner = kernels.cd_sweep(self.Z, r, self.gamma, pen, self.nrm2, active)
                sweeps += 1
                if trace is not None:
                    trace.append(0.5 * float(r @ r) + float(pen @ np.abs(self.gamma)))
                if inner < tol:
                    break
        raise ConvergenceError(
            f"coordinate descent did not converge in {max_sweeps} sweeps (last change {change:.3g})",
            residual=change,
        )

    def coefficients(self):
        coef = np.where(self.live, self.gamma / self.safe, 0.0)
        return coef, self.ybar - float(coef @ self.mean)


def _search_support(prob, cfg):
    """Largest penalty whose support reaches ``cfg.target_support``.

    Walks down a warm-started geometric path from lambda_max (ratio 0.8,
    floor lambda_max * 1e-6) until the support is big enough, then bisects
    the last bracket on a log scale until it is narrower than a relative
    1e-7 (or ``bisection_steps`` run out). If the floor is reached first, the
    floor solution is returned.
    """
    target = cfg.target_support
    top = float(np.max(np.abs(prob.Z.T @ prob.yc) * np.where(prob.live, prob.safe, 0.0)))
    sweeps = 0
    if top == 0.0:
        return 0.0, prob.solve(0.0, cfg.tol, cfg.max_sweeps)
    floor = top * 1e-6
    hi = top
    lam = top
    while True:
        lam = max(lam * 0.8, floor)
        sweeps += prob.solve(lam, cfg.tol, cfg.max_sweeps)
        if np.count_nonzero(prob.gamma) >= target or lam == floor:
            break
        hi = lam
    if np.count_nonzero(prob.gamma) < target:
        return lam, sweeps
    best = (lam, prob.gamma.copy())
    lo_log, hi_log = math.log(lam), math.log(hi)
    for _ in range(cfg.bisection_steps):
        if hi_log - lo_log < BRACKET_RTOL:
            break
        mid = math.exp(0.5 * (lo_log + hi_log))
        prob.gamma = best[1].copy()
        sweeps += prob.solve(mid, cfg.tol, cfg.max_sweeps)
        if np.count_nonzero(prob.gamma) >= target:
            best = (mid, prob.gamma.copy())
            lo_log = math.log(mid)
        else:
            hi_log = math.log(mid)
    prob.gamma = best[1]
    return best[0], sweeps


def lasso_fit(X, y, cfg=None):
    """Solve at ``cfg.lam``, or find the largest penalty reaching ``cfg.target_support``."""
    cfg = cfg or LassoConfig(target_support=10)
    names, data = as_matrix(X)
    y = as_vector(y)
    n, p = data.shape
    names = names or [f"x{j}" for j in range(p)]
    if n < 2 or len(y) != n:
        raise InsufficientDataError("need at least two rows and one target per row")
    if not np.isfinite(data).all() or not np.isfinite(y).all():
        raise InsufficientDataError("features and targets must be finite")
    prob = _Problem(data, y)
    trace = []

    if cfg.lam is not None:
        lam = float(cfg.lam)
        sweeps = prob.solve(lam, cfg.tol, cfg.max_sweeps, trace)
        coef, intercept = prob.coefficients()
    else:
        lam, sweeps = _search_support(prob, cfg)
        coef, intercept = prob.coefficients()
    meta = {"selector": "lasso", "lam": lam, "sweeps": sweeps, "backend": kernels.BACKEND}
    return LinearModel(list(names), coef, intercept, "squared", trace, meta)


def kkt_residual(X, y, model, lam):
    """Worst violation of the Lasso optimality conditions at ``model``.

    Zero coefficients need |x_j . r| <= lam; nonzero ones x_j . r = lam * sign.
    Returned in the units of x_j . r (absolute, not relative to lam).
    """
    _, data = as_matrix(X)
    y = as_vector(y)
    r = y - model.intercept - data @ model.coef
    g = data.T @ r
    nz = model.coef != 0
    worst = 0.0
    if nz.any():
        worst = float(np.max(np.abs(g[nz] - lam * np.sign(model.coef[nz]))))
    if (~nz).any():
        worst = max(worst, float(np.max(np.abs(g[~nz]) - lam)))
    return max(worst, abs(float(r.sum())))
