"""Seeded synthetic data: random-walk OHLCV bars and planted sparse models."""
from __future__ import annotations

import numpy as np

from .features import FeatureMatrix
from .market_data import OhlcvSeries


def synthetic_ohlcv(n=1500, seed=0, symbol="SYN", start="2017-01-02", drift=2e-4, vol=0.02):
    """Geometric random walk with consistent open/high/low/close bars on business days."""
    rng = np.random.default_rng(seed)
    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    close = 100.0 * np.exp(np.cumsum(rng.normal(drift, vol, n)))
    prev = np.concatenate([[100.0], close[:-1]])
    open_ = prev * np.exp(rng.normal(0.0, vol / 4, n))
    top = np.maximum(open_, close)
    bottom = np.minimum(open_, close)
    high = top * np.exp(np.abs(rng.normal(0.0, vol / 2, n)))
    low = bottom * np.exp(-np.abs(rng.normal(0.0, vol / 2, n)))
    volume = np.round(rng.lognormal(13.0, 0.4, n))
    return OhlcvSeries(symbol, dates, open_, high, low, close, close.copy(), volume)


def planted_support(p, k, rng):
    return np.sort(rng.choice(p, size=k, replace=False))


def planted_regression(n=1000, p=500, k=10, snr=5.0, seed=0):
    """y = X @ beta + noise with ``k`` unit-magnitude, random-sign coefficients.

    Noise variance is k / snr so that var(X beta) / var(noise) = snr.
    Returns (X, y, support, beta).
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    support = planted_support(p, k, rng)
    beta = np.zeros(p)
    beta[support] = rng.choice([-1.0, 1.0], size=k)
    y = X @ beta + rng.normal(0.0, np.sqrt(k / snr), n)
    return X, y, support, beta


def planted_classification(n=1000, p=500, k=10, snr=5.0, seed=0):
    """Labels in {-1, +1}: sign of the planted regression response."""
    X, y, support, beta = planted_regression(n, p, k, snr, seed)
    return X, np.where(y > 0, 1.0, -1.0), support, beta


def planted_frame(n=1000, p=1000, k=10, snr=5.0, seed=0, horizon=3):
    """A prepared pipeline frame where the target at row t is planted on row t - horizon.

    Returns (FeatureMatrix, targets, support) with targets holding both
    ``log_return`` (the planted response) and ``trend`` (its sign, +/-1).
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    support = planted_support(p, k, rng)
    beta = np.zeros(p)
    beta[support] = rng.choice([-1.0, 1.0], size=k)
    response = np.full(n, np.nan)
    response[horizon:] = X[:-horizon] @ beta + rng.normal(0.0, np.sqrt(k / snr), n - horizon)
    trend = np.where(np.isnan(response), np.nan, np.where(response > 0, 1.0, -1.0))
    names = [f"x{j:04d}" for j in range(p)]
    return FeatureMatrix(names, X), {"log_return": response, "trend": trend}, [names[j] for j in support]
