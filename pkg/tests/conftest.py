from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from annealcast.features import build_pool
from annealcast.market_data import parse_ohlcv_csv

DATA = Path(__file__).parent / "data"

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def syn_series():
    return parse_ohlcv_csv((DATA / "syn1500.csv").read_text(), symbol="SYN")


@pytest.fixture(scope="session")
def syn_pool(syn_series):
    return build_pool(syn_series)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
