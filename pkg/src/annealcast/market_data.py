"""OHLCV ingestion, train/test splitting and min-max scaling."""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateColumnError,
    DuplicateDateError,
    EmptyDataError,
    SchemaError,
    TransportError,
)

PRICE_FIELDS = ("open", "high", "low", "close", "adj_close")
HEADER = ("Date", "Open", "High", "Low", "Close", "Adj Close", "Volume")
_HEADER_KEYS = {
    "date": "date",
    "open": "open",
    "high": "high",
    "low": "low",
    "close": "close",
    "adj close": "adj_close",
    "volume": "volume",
}

DEFAULT_SPLIT_SEED = 20220521


@dataclass(eq=False)
class OhlcvSeries:
    """Date-ordered daily bars.

    ``dropped`` counts rows discarded at parse time (non-numeric fields or
    inconsistent prices); it is bookkeeping and not part of equality.
    """

    symbol: str
    dates: np.ndarray  # datetime64[D]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    adj_close: np.ndarray
    volume: np.ndarray
    dropped: int = field(default=0, compare=False)

    def __len__(self):
        return len(self.dates)

    def __eq__(self, other):
        if not isinstance(other, OhlcvSeries):
            return NotImplemented
        return (
            self.symbol == other.symbol
            and np.array_equal(self.dates, other.dates)
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in (*PRICE_FIELDS, "volume")
            )
        )

    def slice(self, start, stop=None):
        sl = slice(start, stop)
        return OhlcvSeries(
            self.symbol,
            self.dates[sl],
            *(getattr(self, f)[sl] for f in (*PRICE_FIELDS, "volume")),
        )

    def validate(self):
        """Raise if the bar invariants do not hold."""
        if len(self) and np.any(np.diff(self.dates.astype("int64")) <= 0):
            raise DuplicateDateError("dates must be strictly increasing")
        prices = np.vstack([getattr(self, f) for f in PRICE_FIELDS])
        if not np.all(prices > 0):
            raise SchemaError("all prices must be positive")
        if np.any(self.high < np.maximum(self.open, self.close)) or np.any(
            self.low > np.minimum(self.open, self.close)
        ):
            raise SchemaError("high/low inconsistent with open/close")
        if np.any(self.volume < 0):
            raise SchemaError("volume must be nonnegative")


def _parse_date(text):
    text = text.strip()
    try:
        return dt.date.fromisoformat(text[:10])
    except ValueError:
        pass
    try:
        return dt.datetime.strptime(text, "%m/%d/%Y").date()
    except ValueError as exc:
        raise SchemaError(f"unparseable date {text!r}") from exc


def _float(text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        return None
    return value if math.isfinite(value) else None


def parse_ohlcv_csv(text, symbol=""):
    """Parse a Yahoo-Finance style CSV export.

    Header names are matched case-insensitively and may appear in any order.
    Rows with a non-numeric field, a nonpositive price, negative volume or
    high/low bars inconsistent with open/close are dropped and counted in
    ``series.dropped``. Rows are returned sorted by date.
    """
    if not isinstance(text, str):
        text = text.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataError("empty CSV") from None
    positions = {}
    for i, name in enumerate(header):
        key = _HEADER_KEYS.get(name.strip().lower())
        if key is not None:
            positions[key] = i
    missing = [h for h, k in zip(HEADER, _HEADER_KEYS.values()) if k not in positions]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")

    rows = []
    dropped = 0
    width = max(positions.values()) + 1
    for record in reader:
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) < width:
            dropped += 1
            continue
        values = [_float(record[positions[k]]) for k in (*PRICE_FIELDS, "volume")]
        if any(v is None for v in values):
            dropped += 1
            continue
        o, h, l, c, a, v = values
        if min(o, h, l, c, a) <= 0 or v < 0 or h < max(o, c) or l > min(o, c):
            dropped += 1
            continue
        rows.append((_parse_date(record[positions["date"]]), o, h, l, c, a, v))

    if not rows:
        raise EmptyDataError("no usable rows")
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if prev[0] == cur[0]:
            raise DuplicateDateError(f"duplicate date {cur[0].isoformat()}")
    cols = list(zip(*rows))
    return OhlcvSeries(
        symbol,
        np.array(cols[0], dtype="datetime64[D]"),
        *(np.array(c, dtype=float) for c in cols[1:]),
        dropped=dropped,
    )


def serialize_ohlcv_csv(series):
    """Inverse of :func:`parse_ohlcv_csv` (floats written with 17 significant digits)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    cols = [getattr(series, f) for f in (*PRICE_FIELDS, "volume")]
    for i, d in enumerate(series.dates):
        writer.writerow([str(d)] + [format(c[i], ".17g") for c in cols])
    return buf.getvalue()


def fetch_ohlcv(symbol, start, end, endpoint, timeout=30.0):
    """GET ``endpoint`` and parse the CSV body, keeping bars in [start, end].

    ``endpoint`` may contain ``{symbol}``; ``symbol``, ``start`` and ``end``
    are also sent as query parameters.
    """
    start = _as_date(start)
    end = _as_date(end)
    if start > end:
        raise ConfigError(f"start {start} is after end {end}")
    url = endpoint.format(symbol=urllib.parse.quote(symbol))
    query = urllib.parse.urlencode(
        {"symbol": symbol, "start": start.isoformat(), "end": end.isoformat()}
    )
    url += ("&" if "?" in url else "?") + query
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            body = resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        raise TransportError(f"GET {url} failed with status {exc.code}", status=exc.code) from exc
    except (urllib.error.URLError, OSError) as exc:
        raise TransportError(f"GET {url} failed: {exc}") from exc
    series = parse_ohlcv_csv(body, symbol=symbol)
    keep = (series.dates >= np.datetime64(start)) & (series.dates <= np.datetime64(end))
    if not keep.any():
        raise EmptyDataError(f"no bars for {symbol} between {start} and {end}")
    idx = np.flatnonzero(keep)
    out = series.slice(idx[0], idx[-1] + 1)
    out.dropped = series.dropped
    return out


def _as_date(value):
    if isinstance(value, dt.date):
        return value
    return _parse_date(str(value))


# -- splitting ---------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def splitmix64(seed):
    """Yield the SplitMix64 stream for ``seed`` (Steele, Lea & Flood 2014).

    state += 0x9E3779B97F4A7C15
    z = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)                       (all arithmetic mod 2**64)
    """
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def seeded_permutation(n, seed):
    """Fisher-Yates shuffle of ``range(n)`` driven by SplitMix64.

    For i = n-1 down to 1: j = next() mod (i + 1); swap(i, j). Portable to any
    language with 64-bit unsigned arithmetic.
    """
    perm = list(range(n))
    rng = splitmix64(seed)
    for i in range(n - 1, 0, -1):
        j = next(rng) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass(frozen=True, eq=False)
class SplitIndex:
    train_rows: np.ndarray
    test_rows: np.ndarray
    seed: int
    mode: str

    def __eq__(self, other):
        return (
            isinstance(other, SplitIndex)
            and np.array_equal(self.train_rows, other.train_rows)
            and np.array_equal(self.test_rows, other.test_rows)
        )


def round_half_up(x):
    return int(math.floor(x + 0.5))


def split(n, train_frac=0.7, seed=DEFAULT_SPLIT_SEED, mode="random"):
    """Partition ``range(n)`` into train/test row indices.

    ``random`` takes the first round(train_frac*n) entries of
    :func:`seeded_permutation`; ``chronological`` takes the earliest rows.
    Both index arrays are returned sorted.
    """
    if not 0 < train_frac < 1:
        raise ConfigError("train_frac must be in (0, 1)")
    if n < 10:
        raise ConfigError("need at least 10 rows to split")
    n_train = round_half_up(train_frac * n)
    if mode == "chronological":
        order = list(range(n))
    elif mode == "random":
        order = seeded_permutation(n, seed)
    else:
        raise ConfigError(f"unknown split mode {mode!r}")
    train = np.sort(np.array(order[:n_train], dtype=np.int64))
    test = np.sort(np.array(order[n_train:], dtype=np.int64))
    return SplitIndex(train, test, seed, mode)


# -- min-max scaling ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, NormalizationParams)
            and np.array_equal(self.minimum, other.minimum)
            and np.array_equal(self.maximum, other.maximum)
        )


def fit_minmax(data, train_rows=None, names=None):
    """Column-wise min and max over the training rows, ignoring NaN.

    Accepts a plain array or a FeatureMatrix.
    """
    if hasattr(data, "column_names"):
        names = data.column_names if names is None else names
        data = data.data
    data = np.asarray(data, dtype=float)
    rows = data if train_rows is None else data[np.asarray(train_rows)]
    finite = np.isfinite(rows)
    bad = np.flatnonzero(finite.sum(axis=0) == 0)
    if bad.size:
        col = names[bad[0]] if names is not None else int(bad[0])
        raise DegenerateColumnError(col)
    lo = np.where(finite, rows, np.inf).min(axis=0)
    hi = np.where(finite, rows, -np.inf).max(axis=0)
    return NormalizationParams(lo, hi)


def apply_minmax(data, params):
    """(x - min) / (max - min); constant columns map to 0.5. No clipping."""
    if hasattr(data, "column_names"):
        return data.with_data(apply_minmax(data.data, params))
    data = np.asarray(data, dtype=float)
    span = params.maximum - params.minimum
    const = span == 0
    safe = np.where(const, 1.0, span)
    out = (data - params.minimum) / safe
    out[:, const] = 0.5
    return out
