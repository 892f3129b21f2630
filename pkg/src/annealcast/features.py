"""Feature pool construction, targets and horizon alignment."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import indicators
from .errors import ConfigError, DomainError, EncodingError, InsufficientDataError, SchemaError

DEFAULT_PERIODS = (2, 4, 8, 16, 32, 64)
DEFAULT_LAGS = (1, 2, 3, 4, 5)
DEFAULT_NAN_DROP_FRAC = 0.10
DEFAULT_HORIZON = 3
MIN_POOL_ROWS = 50
TARGET_PREFIX = "target:"


@dataclass(eq=False)
class FeatureMatrix:
    """Named n x p matrix.

    ``index`` holds each row's position in the source series and ``dates``
    its calendar date (or None when the source has no dates).
    """

    column_names: list
    data: np.ndarray
    dropped_columns: list = field(default_factory=list)
    index: np.ndarray = None
    dates: np.ndarray = None
    warmups: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != len(self.column_names):
            raise SchemaError("data shape does not match column names")
        if len(set(self.column_names)) != len(self.column_names):
            raise SchemaError("duplicate column names")
        if self.index is None:
            self.index = np.arange(self.data.shape[0])
        self.index = np.asarray(self.index, dtype=np.int64)

    @property
    def shape(self):
        return self.data.shape

    def __len__(self):
        return self.data.shape[0]

    def with_data(self, data):
        return replace(self, data=np.asarray(data, dtype=float))

    def take_rows(self, rows):
        rows = np.asarray(rows)
        return replace(
            self,
            data=self.data[rows],
            index=self.index[rows],
            dates=None if self.dates is None else self.dates[rows],
        )

    def select(self, names):
        pos = {name: i for i, name in enumerate(self.column_names)}
        missing = [n for n in names if n not in pos]
        if missing:
            raise SchemaError(f"unknown feature(s): {', '.join(missing[:5])}")
        cols = [pos[n] for n in names]
        return replace(self, column_names=list(names), data=self.data[:, cols])

    def equals(self, other):
        return (
            self.column_names == other.column_names
            and np.array_equal(self.data, other.data, equal_nan=True)
            and np.array_equal(self.index, other.index)
        )


@dataclass(eq=False)
class TargetVector:
    kind: str  # "log_return" | "trend"
    values: np.ndarray
    horizon: int = DEFAULT_HORIZON
    index: np.ndarray = None
    encoding: str = None  # "pm1" | "zero_one" for trend labels

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.index is None:
            self.index = np.arange(len(self.values))
        self.index = np.asarray(self.index, dtype=np.int64)
        if self.kind == "trend" and self.encoding is None:
            self.encoding = "pm1"

    def __len__(self):
        return len(self.values)


# -- targets -----------------------------------------------------------------


def log_returns(close):
    """r_t = ln(close_t / close_{t-1}); length n - 1."""
    close = np.asarray(close, dtype=float)
    if close.size < 2:
        raise InsufficientDataError("need at least two prices")
    if not np.all(close > 0):
        raise DomainError("prices must be positive")
    return np.log(close[1:] / close[:-1])


def trend_labels(returns, horizon=DEFAULT_HORIZON):
    """+1 where return_t > return_{t-1}, else -1 (ties are -1); length n - 1."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise InsufficientDataError("need at least two returns")
    return TargetVector("trend", np.where(r[1:] > r[:-1], 1.0, -1.0), horizon, encoding="pm1")


_ALPHABETS = {"pm1": (-1.0, 1.0), "zero_one": (0.0, 1.0)}


def _detect_encoding(values):
    present = set(np.unique(values).tolist())
    for enc in ("pm1", "zero_one"):
        if present <= set(_ALPHABETS[enc]):
            return enc
    raise EncodingError(f"labels {sorted(present)[:4]} are neither {{-1,+1}} nor {{0,1}}")


def relabel(labels, encoding):
    """Map trend labels between the {-1,+1} and {0,1} codings.

    Accepts a TargetVector (its ``encoding`` is trusted when set) or an array.
    """
    if encoding not in _ALPHABETS:
        raise EncodingError(f"unknown encoding {encoding!r}")
    is_target = isinstance(labels, TargetVector)
    values = labels.values if is_target else np.asarray(labels, dtype=float)
    current = labels.encoding if is_target and labels.encoding else _detect_encoding(values)
    finite = values[np.isfinite(values)]
    if not np.isin(finite, _ALPHABETS[current]).all():
        raise EncodingError(f"labels outside the {current} alphabet")
    if current == encoding:
        out = values.copy()
    elif encoding == "zero_one":
        out = (values + 1.0) / 2.0
    else:
        out = 2.0 * values - 1.0
    if is_target:
        return replace(labels, values=out, encoding=encoding)
    return out


def series_targets(series, horizon=DEFAULT_HORIZON):
    """Row-aligned log-return and trend targets for every bar of ``series``.

    Row t holds ln(c_t/c_{t-1}) and the trend of r_t vs r_{t-1}; rows where
    they are undefined are NaN.
    """
    n = len(series)
    ret = np.full(n, np.nan)
    ret[1:] = log_returns(series.close)
    trend = np.full(n, np.nan)
    if n >= 3:
        trend[2:] = trend_labels(ret[1:]).values
    idx = np.arange(n)
    return (
        TargetVector("log_return", ret, horizon, idx),
        TargetVector("trend", trend, horizon, idx, encoding="pm1"),
    )


# -- pool ----------------------------------------------------------------------


def build_pool(
    series,
    periods=DEFAULT_PERIODS,
    lags=DEFAULT_LAGS,
    nan_drop_frac=DEFAULT_NAN_DROP_FRAC,
    specs=None,
    min_rows=MIN_POOL_ROWS,
):
    """Indicators at every period, plus lagged copies, NaN-cleaned.

    Columns are ordered base block, then one block per lag (``<base>_lag<l>``
    holds the base value from row t - l). Columns whose non-finite fraction
    exceeds ``nan_drop_frac`` are dropped and recorded; then every row still
    holding a non-finite value is removed.
    """
    periods = list(periods)
    lags = list(lags)
    if not periods or periods != sorted(set(periods)):
        raise ConfigError("periods must be nonempty, ascending and unique")
    if any(not 1 <= lag <= 10 for lag in lags) or len(set(lags)) != len(lags):
        raise ConfigError("lags must be distinct values in 1..10")
    n = len(series)
    specs = indicators.catalog() if specs is None else specs

    names, columns, warmups = [], [], []
    for spec in specs:
        for period in periods if spec.periodic else [None]:
            for col in indicators.compute(series, spec, period):
                names.append(col.name)
                columns.append(col.values)
                warmups.append(col.warmup)
    base = np.column_stack(columns)
    blocks = [base]
    all_names = list(names)
    all_warmups = list(warmups)
    for lag in lags:
        shifted = np.full_like(base, np.nan)
        shifted[lag:] = base[:-lag]
        blocks.append(shifted)
        all_names += [f"{name}_lag{lag}" for name in names]
        all_warmups += [min(w + lag, n) for w in warmups]
    data = np.hstack(blocks)

    bad = ~np.isfinite(data)
    frac = bad.mean(axis=0)
    keep = frac <= nan_drop_frac
    dropped = [
        (name, f"non-finite fraction {f:.3f} > {nan_drop_frac}")
        for name, f, k in zip(all_names, frac, keep)
        if not k
    ]
    data = data[:, keep]
    kept_names = [nm for nm, k in zip(all_names, keep) if k]
    kept_warmups = {nm: w for nm, w, k in zip(all_names, all_warmups, keep) if k}
    good_rows = np.flatnonzero(np.isfinite(data).all(axis=1))
    if good_rows.size < min_rows:
        raise InsufficientDataError(f"feature pool has {good_rows.size} usable rows, need {min_rows}")
    return FeatureMatrix(
        kept_names,
        data[good_rows],
        dropped,
        index=good_rows,
        dates=None if getattr(series, "dates", None) is None else series.dates[good_rows],
        warmups=kept_warmups,
    )


def align_horizon(X, y, h=DEFAULT_HORIZON):
    """Pair features at source row t - h with the target at source row t.

    Rows are matched on ``index`` (source positions), so gaps left by
    cleaning never pair the wrong bars. Targets that are NaN are skipped.
    """
    if h < 1:
        raise ConfigError("horizon must be >= 1")
    if h >= len(X):
        raise InsufficientDataError(f"horizon {h} leaves no rows from {len(X)}")
    target_at = {int(i): k for k, i in enumerate(y.index)}
    feat_rows, targ_rows = [], []
    for r, t in enumerate(X.index):
        k = target_at.get(int(t) + h)
        if k is not None and np.isfinite(y.values[k]):
            feat_rows.append(r)
            targ_rows.append(k)
    if not feat_rows:
        raise InsufficientDataError("no aligned rows")
    Xa = X.take_rows(np.array(feat_rows))
    ya = replace(y, values=y.values[targ_rows], index=y.index[targ_rows], horizon=h)
    return Xa, ya


# -- CSV -----------------------------------------------------------------------


def write_frame(X, targets=None):
    """CSV text: ``row,date,<features>,target:<kind>...``, floats at 17 digits."""
    targets = targets or {}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "date", *X.column_names, *(TARGET_PREFIX + k for k in targets)])
    tcols = [np.asarray(v, dtype=float) for v in targets.values()]
    for r in range(len(X)):
        date = "" if X.dates is None else str(X.dates[r])
        vals = [format(v, ".17g") for v in X.data[r]]
        vals += [format(t[r], ".17g") for t in tcols]
        writer.writerow([int(X.index[r]), date, *vals])
    return buf.getvalue()


def read_frame(text):
    """Inverse of :func:`write_frame`; returns (FeatureMatrix, {kind: values})."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty feature CSV") from None
    if header[:2] != ["row", "date"]:
        raise SchemaError("feature CSV must start with 'row,date'")
    rest = header[2:]
    feat_names = [h for h in rest if not h.startswith(TARGET_PREFIX)]
    target_names = [h[len(TARGET_PREFIX):] for h in rest if h.startswith(TARGET_PREFIX)]
    rows, dates, values = [], [], []
    for rec in reader:
        if not rec:
            continue
        if len(rec) != len(header):
            raise SchemaError(f"ragged row {len(rows) + 1}")
        rows.append(int(rec[0]))
        dates.append(rec[1])
        values.append([float(v) for v in rec[2:]])
    if not rows:
        raise SchemaError("feature CSV has no rows")
    arr = np.array(values, dtype=float)
    nf = len(feat_names)
    has_dates = all(dates)
    X = FeatureMatrix(
        feat_names,
        arr[:, :nf],
        index=np.array(rows),
        dates=np.array(dates, dtype="datetime64[D]") if has_dates else None,
    )
    return X, {name: arr[:, nf + i] for i, name in enumerate(target_names)}
