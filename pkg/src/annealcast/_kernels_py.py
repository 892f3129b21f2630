"""Pure-Python reference versions of the compiled kernels.

Same recurrences, same operation order, as ``_ckernels.pyx``.
"""
import math

import numpy as np


def ema(x, alpha, start=0):
    n = len(x)
    out = np.full(n, np.nan)
    if start >= n:
        return out
    beta = 1.0 - alpha
    xs = x.tolist()
    prev = xs[start]
    out[start] = prev
    for t in range(start + 1, n):
        prev = alpha * xs[t] + beta * prev
        out[t] = prev
    return out


def wilder(x, period, start):
    n = len(x)
    out = np.full(n, np.nan)
    if start >= n:
        return out
    xs = x.tolist()
    acc = 0.0
    for t in range(start - period + 1, start + 1):
        acc = acc + xs[t]
    p = float(period)
    pm1 = float(period - 1)
    prev = acc / p
    out[start] = prev
    for t in range(start + 1, n):
        prev = (prev * pm1 + xs[t]) / p
        out[t] = prev
    return out


def cd_sweep(Z, r, gamma, pen, nrm2, coords):
    max_change = 0.0
    for j in coords.tolist():
        if nrm2[j] == 0.0:
            continue
        col = Z[:, j]
        rho = float(col @ r) + nrm2[j] * gamma[j]
        a = abs(rho) - pen[j]
        new = math.copysign(a, rho) / nrm2[j] if a > 0.0 else 0.0
        d = new - gamma[j]
        if d != 0.0:
            r -= d * col
            gamma[j] = new
            max_change = max(max_change, abs(d))
    return max_change
