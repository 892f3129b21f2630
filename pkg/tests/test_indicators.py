import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from annealcast import indicators
from annealcast.errors import ConfigError, InsufficientDataError
from annealcast.market_data import OhlcvSeries
from annealcast.synthetic import synthetic_ohlcv

from naive_indicators import ORACLES

PERIODS = (2, 3, 4, 8, 16)


def series_from_close(close, volume=None):
    close = np.asarray(close, dtype=float)
    n = len(close)
    dates = np.datetime64("2020-01-01") + np.arange(n)
    vol = np.full(n, 1000.0) if volume is None else np.asarray(volume, dtype=float)
    return OhlcvSeries("T", dates, close.copy(), close.copy(), close.copy(), close, close.copy(), vol)


def rough_series(seed):
    """Random bars with rounded prices (ties, flat windows) and some zero volume."""
    rng = np.random.default_rng(seed)
    s = synthetic_ohlcv(int(rng.integers(40, 90)), seed=seed)
    for f in ("open", "high", "low", "close"):
        setattr(s, f, np.round(getattr(s, f), 0))
    s.high = np.maximum.reduce([s.high, s.open, s.close])
    s.low = np.minimum.reduce([s.low, s.open, s.close])
    s.volume = np.where(rng.random(len(s)) < 0.1, 0.0, np.round(s.volume / 1000))
    return s


def close_enough(a, b):
    return abs(a - b) <= 1e-9 * max(1.0, abs(b))


def test_catalog_has_26_unique_entries_over_all_classes():
    cat = indicators.catalog()
    names = [s.name for s in cat]
    assert len(names) == 26
    assert len(set(names)) == 26
    assert {s.category for s in cat} == set(indicators.CLASSES)
    by_name = {s.name: s for s in cat}
    assert by_name["SMA"].category == "trend"
    assert len(by_name["Bollinger"].sub_outputs) == 3
    assert all(s.sub_outputs for s in cat)
    assert sum(not s.periodic for s in cat) == 7  # OBV plus six raw channels


def test_dump_catalog_lists_every_entry():
    text = indicators.dump_catalog()
    lines = text.strip().split("\n")
    assert lines[0] == "name\tclass\tperiodic\tsub_outputs"
    assert len(lines) == 27
    assert "Bollinger\tvolatility\tyes\tupper,middle,lower" in lines


def test_register_rejects_duplicates():
    with pytest.raises(ConfigError):
        indicators.register(indicators.catalog(["SMA"])[0])
    with pytest.raises(ConfigError):
        indicators.catalog(["NoSuchThing"])


def test_sma_and_momentum_examples():
    s = series_from_close([1, 2, 3, 4])
    (sma,) = indicators.compute(s, indicators.catalog(["SMA"])[0], 2)
    assert sma.name == "SMA_value_p2"
    assert np.isnan(sma.values[0]) and sma.values[1:].tolist() == [1.5, 2.5, 3.5]
    (mom,) = indicators.compute(series_from_close([5, 5, 5, 5]), indicators.catalog(["Momentum"])[0], 2)
    assert np.isnan(mom.values[:2]).all() and mom.values[2:].tolist() == [0.0, 0.0]


def test_rsi_fixture():
    # Wilder seed at row 2: avg gain (1+1)/2 = 1, avg loss 0 -> 100;
    # row 3: gain (1*1 + 0)/2 = 0.5, loss (0*1 + 1)/2 = 0.5 -> RS 1 -> 50
    (rsi,) = indicators.compute(series_from_close([1, 2, 3, 2]), indicators.catalog(["RSI"])[0], 2)
    assert np.isnan(rsi.values[:2]).all()
    assert rsi.values[2:].tolist() == [100.0, 50.0]


def test_compute_guards():
    s = series_from_close(np.arange(1.0, 11.0))
    sma = indicators.catalog(["SMA"])[0]
    with pytest.raises(ConfigError):
        indicators.compute(s, sma, 1)
    with pytest.raises(ConfigError):
        indicators.compute(s, sma, 2.5)
    with pytest.raises(InsufficientDataError):
        indicators.compute(s, sma, 10)


@pytest.mark.parametrize("seed", range(100))
def test_matches_naive_oracle(seed):
    s = rough_series(seed)
    args = [s.open.tolist(), s.high.tolist(), s.low.tolist(), s.close.tolist(), s.volume.tolist()]
    for spec in indicators.catalog():
        for p in PERIODS if spec.periodic else [None]:
            expected = ORACLES[spec.name](*args, p)
            for col, sub in zip(indicators.compute(s, spec, p), spec.sub_outputs):
                ref = expected[sub]
                for t, (got, want) in enumerate(zip(col.values, ref)):
                    if t < col.warmup:
                        assert math.isnan(got), (col.name, t)
                    else:
                        assert not math.isnan(want), (col.name, t)
                        assert close_enough(got, want), (col.name, t, got, want)


@given(st.integers(0, 10_000), st.sampled_from(PERIODS))
def test_finite_after_warmup(seed, p):
    s = synthetic_ohlcv(120, seed=seed)
    for spec in indicators.catalog():
        for col in indicators.compute(s, spec, p if spec.periodic else None):
            assert np.isnan(col.values[: col.warmup]).all()
            assert np.isfinite(col.values[col.warmup :]).all(), col.name


@given(st.integers(0, 10_000), st.integers(1, 30), st.sampled_from(PERIODS))
def test_shift_equivariance_of_window_indicators(seed, k, p):
    s = synthetic_ohlcv(150, seed=seed)
    cut = s.slice(k, len(s))
    for spec in indicators.catalog():
        if spec.recursive:
            continue
        full = indicators.compute(s, spec, p if spec.periodic else None)
        part = indicators.compute(cut, spec, p if spec.periodic else None)
        for a, b in zip(full, part):
            assert np.allclose(b.values[b.warmup :], a.values[k + b.warmup :], rtol=1e-12, atol=1e-12), a.name


@given(st.integers(0, 10_000), st.integers(70, 149), st.sampled_from(PERIODS))
def test_no_lookahead_prefix_consistency(seed, m, p):
    s = synthetic_ohlcv(150, seed=seed)
    head = s.slice(0, m)
    for spec in indicators.catalog():
        full = indicators.compute(s, spec, p if spec.periodic else None)
        part = indicators.compute(head, spec, p if spec.periodic else None)
        for a, b in zip(full, part):
            assert np.array_equal(a.values[:m], b.values, equal_nan=True), a.name


@given(st.floats(0.5, 1e4), st.sampled_from(PERIODS))
def test_constant_series_averages(value, p):
    s = series_from_close(np.full(80, value))
    for name in ("SMA", "EMA", "WMA"):
        (col,) = indicators.compute(s, indicators.catalog([name])[0], p)
        assert np.allclose(col.values[col.warmup :], value, rtol=1e-12)
    (k,) = indicators.compute(s, indicators.catalog(["StochK"])[0], p)
    assert (k.values[k.warmup :] == 50.0).all()
    (mfi,) = indicators.compute(s, indicators.catalog(["MFI"])[0], p)
    assert (mfi.values[mfi.warmup :] == 50.0).all()
    (rsi,) = indicators.compute(s, indicators.catalog(["RSI"])[0], p)
    assert (rsi.values[rsi.warmup :] == 100.0).all()


@given(st.integers(0, 10_000), st.sampled_from(PERIODS))
def test_bollinger_ordering(seed, p):
    s = synthetic_ohlcv(100, seed=seed)
    up, mid, lo = indicators.compute(s, indicators.catalog(["Bollinger"])[0], p)
    w = up.warmup
    assert (up.values[w:] >= mid.values[w:]).all() and (mid.values[w:] >= lo.values[w:]).all()
