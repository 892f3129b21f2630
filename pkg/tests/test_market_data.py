import datetime as dt
import http.server
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from annealcast.errors import (
    ConfigError,
    DegenerateColumnError,
    DuplicateDateError,
    EmptyDataError,
    SchemaError,
    TransportError,
)
from annealcast.market_data import (
    apply_minmax,
    fetch_ohlcv,
    fit_minmax,
    parse_ohlcv_csv,
    round_half_up,
    seeded_permutation,
    serialize_ohlcv_csv,
    split,
    splitmix64,
)
from annealcast.synthetic import synthetic_ohlcv

CSV = """Date,Open,High,Low,Close,Adj Close,Volume
2020-01-03,10,11,9,10.5,10.5,1000
2020-01-02,9,10,8.5,9.5,9.5,900
2020-01-06,10.5,12,10,11,11,1200
"""


def test_parse_sorts_rows_by_date():
    s = parse_ohlcv_csv(CSV, "X")
    assert [str(d) for d in s.dates] == ["2020-01-02", "2020-01-03", "2020-01-06"]
    assert s.close.tolist() == [9.5, 10.5, 11.0]
    assert s.dropped == 0


def test_header_is_case_insensitive_and_reorderable():
    text = "volume,CLOSE,adj close,low,HIGH,open,date\n100,2,2,1,3,1.5,2021-05-04\n"
    s = parse_ohlcv_csv(text)
    assert s.open.tolist() == [1.5]
    assert s.high.tolist() == [3.0]
    assert s.volume.tolist() == [100.0]


def test_bad_rows_are_dropped_and_counted():
    text = CSV + "2020-01-07,null,1,1,1,1,1\n2020-01-08,-1,1,1,1,1,1\n2020-01-09,1,0.5,0.4,1,1,1\n"
    s = parse_ohlcv_csv(text)
    assert len(s) == 3
    assert s.dropped == 3


def test_one_null_close_among_ten_rows():
    rows = [f"2020-02-{d:02d},1,2,0.5,1.5,1.5,10" for d in range(1, 11)]
    rows.insert(4, "2020-02-20,1,2,0.5,null,1.5,10")
    s = parse_ohlcv_csv("Date,Open,High,Low,Close,Adj Close,Volume\n" + "\n".join(rows) + "\n")
    assert len(s) == 10 and s.dropped == 1


def test_duplicate_date_is_an_error():
    with pytest.raises(DuplicateDateError):
        parse_ohlcv_csv(CSV + "2020-01-02,9,10,8.5,9.5,9.5,900\n")


def test_missing_column_and_empty_input():
    with pytest.raises(SchemaError):
        parse_ohlcv_csv("Date,Open,High,Low,Close\n2020-01-01,1,1,1,1\n")
    with pytest.raises(EmptyDataError):
        parse_ohlcv_csv("")
    with pytest.raises(EmptyDataError):
        parse_ohlcv_csv("Date,Open,High,Low,Close,Adj Close,Volume\n")


def test_serialize_round_trip_is_bit_identical():
    s = synthetic_ohlcv(300, seed=4)
    again = parse_ohlcv_csv(serialize_ohlcv_csv(s), s.symbol)
    assert again == s
    for f in ("open", "high", "low", "close", "adj_close", "volume"):
        assert np.array_equal(getattr(again, f), getattr(s, f))


@given(st.lists(st.floats(1e-6, 1e9, allow_nan=False), min_size=1, max_size=30))
def test_round_trip_arbitrary_prices(prices):
    rows = [
        f"{dt.date(2000, 1, 1) + dt.timedelta(days=i)},{p!r},{p!r},{p!r},{p!r},{p!r},7"
        for i, p in enumerate(prices)
    ]
    s = parse_ohlcv_csv("Date,Open,High,Low,Close,Adj Close,Volume\n" + "\n".join(rows))
    assert parse_ohlcv_csv(serialize_ohlcv_csv(s)) == s
    assert s.close.tolist() == prices


# -- split ---------------------------------------------------------------------


def test_splitmix64_reference_vectors():
    # first outputs of the reference C implementation for seed 0
    g = splitmix64(0)
    assert [next(g) for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_permutation_frozen_values():
    assert seeded_permutation(10, 20220521) == seeded_permutation(10, 20220521)
    assert sorted(seeded_permutation(50, 3)) == list(range(50))
    assert seeded_permutation(10, 1) != seeded_permutation(10, 2)


def test_round_half_up():
    assert round_half_up(2.5) == 3
    assert round_half_up(3.5) == 4
    assert round_half_up(0.7 * 15) == 11


@given(st.integers(10, 3000), st.floats(0.05, 0.95), st.integers(0, 2**64 - 1), st.sampled_from(["random", "chronological"]))
def test_split_partitions_rows(n, frac, seed, mode):
    sp = split(n, frac, seed, mode)
    assert len(sp.train_rows) == round_half_up(frac * n)
    both = np.concatenate([sp.train_rows, sp.test_rows])
    assert np.array_equal(np.sort(both), np.arange(n))
    assert np.intersect1d(sp.train_rows, sp.test_rows).size == 0
    assert sp == split(n, frac, seed, mode)


def test_chronological_split_takes_the_earliest_rows():
    sp = split(20, 0.7, mode="chronological")
    assert sp.train_rows.tolist() == list(range(14))


def test_ten_rows_seventy_percent():
    sp = split(10, 0.7, mode="chronological")
    assert sp.train_rows.tolist() == list(range(7)) and sp.test_rows.tolist() == [7, 8, 9]
    r = split(10, 0.7, seed=5)
    assert len(r.train_rows) == 7 and len(r.test_rows) == 3 and r == split(10, 0.7, seed=5)


def test_split_guards():
    with pytest.raises(ConfigError):
        split(9)
    with pytest.raises(ConfigError):
        split(100, 1.0)
    with pytest.raises(ConfigError):
        split(100, 0.7, mode="shuffled")


# -- min-max -------------------------------------------------------------------


def test_minmax_uses_train_rows_only():
    data = np.array([[0.0, 5.0], [10.0, 5.0], [100.0, 7.0]])
    params = fit_minmax(data, train_rows=[0, 1])
    out = apply_minmax(data, params)
    assert out[:, 0].tolist() == [0.0, 1.0, 10.0]  # no clipping on test rows
    assert out[:2, 1].tolist() == [0.5, 0.5]  # constant on train


def test_minmax_endpoints_and_constant_column():
    data = np.array([[0.0, 3.0], [5.0, 3.0], [10.0, 3.0]])
    out = apply_minmax(data, fit_minmax(data))
    assert out[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert out[:, 1].tolist() == [0.5, 0.5, 0.5]


def test_minmax_all_nan_column():
    with pytest.raises(DegenerateColumnError):
        fit_minmax(np.array([[1.0, np.nan], [2.0, np.nan]]))


@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=2, max_size=40))
def test_minmax_train_rows_land_in_unit_interval(rows):
    data = np.array(rows)
    out = apply_minmax(data, fit_minmax(data))
    assert np.all(out >= 0.0) and np.all(out <= 1.0)


# -- fetch over loopback -----------------------------------------------------------


class _Handler(http.server.BaseHTTPRequestHandler):
    body = CSV
    status = 200
    seen = []

    def do_GET(self):
        type(self).seen.append(self.path)
        self.send_response(self.status)
        self.send_header("Content-Type", "text/csv")
        self.end_headers()
        self.wfile.write(self.body.encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.seen = []
    _Handler.status = 200
    srv = http.server.HTTPServer(("127.0.0.1", 0), _Handler)
    th = threading.Thread(target=srv.serve_forever, daemon=True)
    th.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()
    srv.server_close()


def test_fetch_filters_to_date_range(server):
    s = fetch_ohlcv("ABC", "2020-01-03", "2020-01-31", server + "/quotes/{symbol}")
    assert [str(d) for d in s.dates] == ["2020-01-03", "2020-01-06"]
    assert s.symbol == "ABC"
    assert _Handler.seen[0].startswith("/quotes/ABC?")
    assert "start=2020-01-03" in _Handler.seen[0]


def test_fetch_one_row_fixture(server):
    _Handler.body = "Date,Open,High,Low,Close,Adj Close,Volume\n2020-01-02,9,10,8.5,9.5,9.5,900\n"
    try:
        s = fetch_ohlcv("ONE", "2020-01-01", "2020-12-31", server + "/{symbol}")
    finally:
        _Handler.body = CSV
    assert len(s) == 1 and s.close.tolist() == [9.5]


def test_fetch_http_error_carries_status(server):
    _Handler.status = 404
    with pytest.raises(TransportError) as err:
        fetch_ohlcv("ABC", "2020-01-01", "2020-02-01", server)
    assert err.value.status == 404


def test_fetch_rejects_inverted_range_before_any_request(server):
    with pytest.raises(ConfigError):
        fetch_ohlcv("ABC", "2020-02-01", "2020-01-01", server)
    assert _Handler.seen == []


def test_fetch_unreachable_host():
    with pytest.raises(TransportError):
        fetch_ohlcv("ABC", "2020-01-01", "2020-02-01", "http://127.0.0.1:9/", timeout=2)
