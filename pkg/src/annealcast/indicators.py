"""Technical indicator catalog.

Every indicator is a function of past bars only. Formulas, with ``p`` the
period, ``c``/``h``/``l``/``v`` close/high/low/volume and windows ending at
(and including) row ``t``:

==========  ==================================================================
SMA         mean(c[t-p+1..t])
EMA         e[0] = c[0]; e[t] = a*c[t] + (1-a)*e[t-1], a = 2/(p+1)
WMA         sum_{i<p} (p-i)*c[t-i] / (p(p+1)/2)
MACD        line = EMA_p - EMA_2p; signal = EMA_p(line); hist = line - signal
ADX         TR[t] = max(h-l, |h-c[t-1]|, |l-c[t-1]|); +DM = up if up>down and
            up>0, -DM = down if down>up and down>0 (up = h[t]-h[t-1],
            down = l[t-1]-l[t]); Wilder averages from row p; DI = 100*DM/TR
            (0 when TR = 0); DX = 100*|+DI - -DI|/(+DI + -DI) (0 when the sum
            is 0); ADX = Wilder average of DX seeded at row 2p-1
CCI         TP = (h+l+c)/3; (TP - SMA_p(TP)) / (0.015 * meandev_p(TP)); 0 when
            the mean deviation is 0
Aroon       over the p+1 bars t-p..t: up = 100*(bars since start of window of
            the most recent highest high)/p, down likewise for the lowest low;
            osc = up - down
RSI         Wilder averages of gains/losses seeded at row p by the plain mean
            of rows 1..p; 100 - 100/(1 + gain/loss); 100 when loss = 0
ROC         100*(c[t]/c[t-p] - 1)
StochK      100*(c - LL_p)/(HH_p - LL_p) on high/low; 50 when HH = LL
StochD      SMA_3(StochK)
WilliamsR   -100*(HH_p - c)/(HH_p - LL_p); -50 when HH = LL
Momentum    c[t] - c[t-p]
ATR         Wilder average of TR seeded at row p
Bollinger   middle = SMA_p; upper/lower = middle +/- 2*sigma_p (ddof 0)
StdDev      sigma_p of close (ddof 0)
OBV         o[0] = 0; o[t] = o[t-1] + sign(c[t]-c[t-1])*v[t]
MFI         money flow TP*v split by sign of TP[t]-TP[t-1], summed over rows
            t-p+1..t; 100 - 100/(1 + pos/neg); 100 when neg = 0 < pos, 50
            when both are 0
VROC        100*(v[t]/v[t-p] - 1); 0 when v[t-p] = 0
CMF         sum_p(MFM*v)/sum_p(v), MFM = ((c-l)-(h-c))/(h-l) (0 when h = l);
            0 when the volume sum is 0
raw         Close, Open, High, Low, Volume as given; LogReturn = ln(c[t]/c[t-1])
==========  ==================================================================

The Wilder average is ``A[s] = mean(x[s-p+1..s])``, ``A[t] = (A[t-1]*(p-1) +
x[t])/p``. Each output carries ``warmup``: the first row where its recurrence
is defined; earlier rows are NaN.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import kernels
from .errors import ConfigError, InsufficientDataError

CLASSES = ("trend", "momentum", "volatility", "volume")


@dataclass(frozen=True)
class IndicatorSpec:
    name: str
    category: str
    sub_outputs: tuple
    periodic: bool = True
    # True when a value depends on the whole history back to the seed row
    recursive: bool = False
    func: Callable = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.category not in CLASSES:
            raise ConfigError(f"unknown indicator class {self.category!r}")
        if not self.sub_outputs:
            raise ConfigError(f"{self.name}: sub_outputs must be nonempty")


@dataclass(eq=False)
class IndicatorColumn:
    name: str
    values: np.ndarray
    warmup: int


def column_name(spec, sub, period=None):
    if spec.periodic:
        return f"{spec.name}_{sub}_p{period}"
    return f"{spec.name}_{sub}"


# -- helpers -----------------------------------------------------------------


def _nan(n):
    return np.full(n, np.nan)


def _rolling(x, p, reducer):
    out = _nan(len(x))
    if len(x) >= p:
        out[p - 1 :] = reducer(sliding_window_view(x, p))
    return out


def _lagged(x, p):
    """x[t-p] aligned at row t."""
    out = _nan(len(x))
    out[p:] = x[:-p]
    return out


def _true_range(h, l, c):
    tr = _nan(len(c))
    prev = c[:-1]
    tr[1:] = np.maximum.reduce([h[1:] - l[1:], np.abs(h[1:] - prev), np.abs(l[1:] - prev)])
    return tr


def _safe_div(num, den, fill):
    out = np.full(np.broadcast(num, den).shape, fill, dtype=float)
    np.divide(num, den, out=out, where=den != 0)
    return out


def _keep_nan(out, ref):
    out[np.isnan(ref)] = np.nan
    return out


# -- indicator functions: (o, h, l, c, v, p) -> {sub: (values, warmup)} -------


def _sma(o, h, l, c, v, p):
    return {"value": (_rolling(c, p, lambda w: w.mean(axis=1)), p - 1)}


def _ema(o, h, l, c, v, p):
    return {"value": (kernels.ema(c, 2.0 / (p + 1)), 0)}


def _wma(o, h, l, c, v, p):
    weights = np.arange(1, p + 1, dtype=float)
    denom = p * (p + 1) / 2.0
    return {"value": (_rolling(c, p, lambda w: (w @ weights) / denom), p - 1)}


def _macd(o, h, l, c, v, p):
    line = kernels.ema(c, 2.0 / (p + 1)) - kernels.ema(c, 2.0 / (2 * p + 1))
    signal = kernels.ema(line, 2.0 / (p + 1))
    return {"line": (line, 0), "signal": (signal, 0), "hist": (line - signal, 0)}


def _adx(o, h, l, c, v, p):
    n = len(c)
    tr = _true_range(h, l, c)
    up = _nan(n)
    down = _nan(n)
    up[1:] = h[1:] - h[:-1]
    down[1:] = l[:-1] - l[1:]
    plus_dm = np.where((up > down) & (up > 0), up, 0.0)
    minus_dm = np.where((down > up) & (down > 0), down, 0.0)
    plus_dm[0] = minus_dm[0] = np.nan
    atr = kernels.wilder(tr, p, p)
    plus_di = _keep_nan(100.0 * _safe_div(kernels.wilder(plus_dm, p, p), atr, 0.0), atr)
    minus_di = _keep_nan(100.0 * _safe_div(kernels.wilder(minus_dm, p, p), atr, 0.0), atr)
    di_sum = plus_di + minus_di
    dx = _keep_nan(100.0 * _safe_div(np.abs(plus_di - minus_di), di_sum, 0.0), atr)
    adx = kernels.wilder(dx, p, 2 * p - 1)
    return {"adx": (adx, 2 * p - 1), "plus_di": (plus_di, p), "minus_di": (minus_di, p)}


def _cci(o, h, l, c, v, p):
    tp = (h + l + c) / 3.0

    def reducer(w):
        mean = w.mean(axis=1)
        md = np.abs(w - mean[:, None]).mean(axis=1)
        return _safe_div(w[:, -1] - mean, 0.015 * md, 0.0)

    return {"value": (_rolling(tp, p, reducer), p - 1)}


def _aroon(o, h, l, c, v, p):
    n = len(c)
    up = _nan(n)
    down = _nan(n)
    if n > p:
        # argmax on the reversed window picks the most recent extreme
        wh = sliding_window_view(h, p + 1)[:, ::-1]
        wl = sliding_window_view(l, p + 1)[:, ::-1]
        up[p:] = 100.0 * (p - np.argmax(wh, axis=1)) / p
        down[p:] = 100.0 * (p - np.argmin(wl, axis=1)) / p
    return {"up": (up, p), "down": (down, p), "osc": (up - down, p)}


def _gains_losses(c):
    delta = _nan(len(c))
    delta[1:] = np.diff(c)
    gain = np.where(delta > 0, delta, 0.0)
    loss = np.where(delta < 0, -delta, 0.0)
    gain[0] = loss[0] = np.nan
    return gain, loss


def _rsi(o, h, l, c, v, p):
    gain, loss = _gains_losses(c)
    avg_gain = kernels.wilder(gain, p, p)
    avg_loss = kernels.wilder(loss, p, p)
    rs = _safe_div(avg_gain, avg_loss, np.inf)
    rsi = np.where(avg_loss == 0, 100.0, 100.0 - 100.0 / (1.0 + rs))
    return {"value": (_keep_nan(rsi, avg_loss), p)}


def _roc(o, h, l, c, v, p):
    return {"value": (100.0 * (c / _lagged(c, p) - 1.0), p)}


def _highest_lowest(h, l, p):
    return _rolling(h, p, lambda w: w.max(axis=1)), _rolling(l, p, lambda w: w.min(axis=1))


def _stoch_k_values(h, l, c, p):
    hh, ll = _highest_lowest(h, l, p)
    k = 100.0 * _safe_div(c - ll, hh - ll, np.nan)
    return np.where((hh == ll) & ~np.isnan(hh), 50.0, k)


def _stoch_k(o, h, l, c, v, p):
    return {"value": (_stoch_k_values(h, l, c, p), p - 1)}


def _stoch_d(o, h, l, c, v, p):
    k = _stoch_k_values(h, l, c, p)
    d = _nan(len(c))
    if len(c) >= p + 2:
        d[p + 1 :] = sliding_window_view(k[p - 1 :], 3).mean(axis=1)
    return {"value": (d, p + 1)}


def _williams_r(o, h, l, c, v, p):
    hh, ll = _highest_lowest(h, l, p)
    r = -100.0 * _safe_div(hh - c, hh - ll, np.nan)
    return {"value": (np.where((hh == ll) & ~np.isnan(hh), -50.0, r), p - 1)}


def _momentum(o, h, l, c, v, p):
    return {"value": (c - _lagged(c, p), p)}


def _atr(o, h, l, c, v, p):
    return {"value": (kernels.wilder(_true_range(h, l, c), p, p), p)}


def _bollinger(o, h, l, c, v, p):
    mid = _rolling(c, p, lambda w: w.mean(axis=1))
    sd = _rolling(c, p, lambda w: w.std(axis=1))
    return {"upper": (mid + 2.0 * sd, p - 1), "middle": (mid, p - 1), "lower": (mid - 2.0 * sd, p - 1)}


def _stddev(o, h, l, c, v, p):
    return {"value": (_rolling(c, p, lambda w: w.std(axis=1)), p - 1)}


def _obv(o, h, l, c, v, p):
    signed = np.zeros(len(c))
    signed[1:] = np.sign(np.diff(c)) * v[1:]
    return {"value": (np.cumsum(signed), 0)}


def _mfi(o, h, l, c, v, p):
    n = len(c)
    tp = (h + l + c) / 3.0
    flow = tp * v
    pos = np.zeros(n)
    neg = np.zeros(n)
    pos[1:] = np.where(tp[1:] > tp[:-1], flow[1:], 0.0)
    neg[1:] = np.where(tp[1:] < tp[:-1], flow[1:], 0.0)
    out = _nan(n)
    if n > p:
        ps = sliding_window_view(pos[1:], p).sum(axis=1)
        ns = sliding_window_view(neg[1:], p).sum(axis=1)
        ratio = _safe_div(ps, ns, np.inf)
        mfi = np.where(ns == 0, np.where(ps == 0, 50.0, 100.0), 100.0 - 100.0 / (1.0 + ratio))
        out[p:] = mfi
    return {"value": (out, p)}


def _vroc(o, h, l, c, v, p):
    prev = _lagged(v, p)
    out = _keep_nan(100.0 * _safe_div(v - prev, prev, 0.0), prev)
    return {"value": (out, p)}


def _cmf(o, h, l, c, v, p):
    mfm = _safe_div((c - l) - (h - c), h - l, 0.0)
    mfv = mfm * v
    out = _nan(len(c))
    if len(c) >= p:
        num = sliding_window_view(mfv, p).sum(axis=1)
        den = sliding_window_view(v, p).sum(axis=1)
        out[p - 1 :] = _safe_div(num, den, 0.0)
    return {"value": (out, p - 1)}


def _raw(field_name):
    def f(o, h, l, c, v, p):
        return {"value": ({"open": o, "high": h, "low": l, "close": c, "volume": v}[field_name].copy(), 0)}

    return f


def _log_return(o, h, l, c, v, p):
    out = _nan(len(c))
    out[1:] = np.log(c[1:] / c[:-1])
    return {"value": (out, 1)}


_DEFAULT = [
    IndicatorSpec("SMA", "trend", ("value",), func=_sma),
    IndicatorSpec("EMA", "trend", ("value",), recursive=True, func=_ema),
    IndicatorSpec("WMA", "trend", ("value",), func=_wma),
    IndicatorSpec("MACD", "trend", ("line", "signal", "hist"), recursive=True, func=_macd),
    IndicatorSpec("ADX", "trend", ("adx", "plus_di", "minus_di"), recursive=True, func=_adx),
    IndicatorSpec("CCI", "trend", ("value",), func=_cci),
    IndicatorSpec("Aroon", "trend", ("up", "down", "osc"), func=_aroon),
    IndicatorSpec("RSI", "momentum", ("value",), recursive=True, func=_rsi),
    IndicatorSpec("ROC", "momentum", ("value",), func=_roc),
    IndicatorSpec("StochK", "momentum", ("value",), func=_stoch_k),
    IndicatorSpec("StochD", "momentum", ("value",), func=_stoch_d),
    IndicatorSpec("WilliamsR", "momentum", ("value",), func=_williams_r),
    IndicatorSpec("Momentum", "momentum", ("value",), func=_momentum),
    IndicatorSpec("ATR", "volatility", ("value",), recursive=True, func=_atr),
    IndicatorSpec("Bollinger", "volatility", ("upper", "middle", "lower"), func=_bollinger),
    IndicatorSpec("StdDev", "volatility", ("value",), func=_stddev),
    IndicatorSpec("OBV", "volume", ("value",), periodic=False, recursive=True, func=_obv),
    IndicatorSpec("MFI", "volume", ("value",), func=_mfi),
    IndicatorSpec("VROC", "volume", ("value",), func=_vroc),
    IndicatorSpec("CMF", "volume", ("value",), func=_cmf),
    IndicatorSpec("Close", "trend", ("value",), periodic=False, func=_raw("close")),
    IndicatorSpec("Open", "trend", ("value",), periodic=False, func=_raw("open")),
    IndicatorSpec("High", "trend", ("value",), periodic=False, func=_raw("high")),
    IndicatorSpec("Low", "trend", ("value",), periodic=False, func=_raw("low")),
    IndicatorSpec("Volume", "volume", ("value",), periodic=False, func=_raw("volume")),
    IndicatorSpec("LogReturn", "momentum", ("value",), periodic=False, func=_log_return),
]

_REGISTRY = {spec.name: spec for spec in _DEFAULT}


def register(spec):
    """Add an indicator to the catalog; names must be unique."""
    if spec.name in _REGISTRY:
        raise ConfigError(f"indicator {spec.name!r} already registered")
    if spec.func is None:
        raise ConfigError(f"indicator {spec.name!r} has no function")
    _REGISTRY[spec.name] = spec


def catalog(names=None):
    """The catalog, optionally restricted to ``names`` (in registry order)."""
    if names is None:
        return list(_REGISTRY.values())
    unknown = set(names) - set(_REGISTRY)
    if unknown:
        raise ConfigError(f"unknown indicator(s): {', '.join(sorted(unknown))}")
    return [s for s in _REGISTRY.values() if s.name in set(names)]


def dump_catalog(specs=None):
    """Tab-separated listing: name, class, periodic, sub_outputs."""
    lines = ["name\tclass\tperiodic\tsub_outputs"]
    for s in specs or catalog():
        lines.append(f"{s.name}\t{s.category}\t{'yes' if s.periodic else 'no'}\t{','.join(s.sub_outputs)}")
    return "\n".join(lines) + "\n"


def compute(series, spec, period=None):
    """Compute one indicator; returns one column per sub-output."""
    n = len(series)
    if spec.periodic:
        if period is None or int(period) != period or period < 2:
            raise ConfigError(f"{spec.name}: period must be an integer >= 2")
        period = int(period)
        if period >= n:
            raise InsufficientDataError(f"{spec.name}: period {period} needs more than {n} rows")
    else:
        period = None
    arrays = [np.ascontiguousarray(getattr(series, f), dtype=float) for f in ("open", "high", "low", "close", "volume")]
    outputs = spec.func(*arrays, period)
    columns = []
    for sub in spec.sub_outputs:
        values, warmup = outputs[sub]
        columns.append(IndicatorColumn(column_name(spec, sub, period), values, min(warmup, n)))
    return columns
