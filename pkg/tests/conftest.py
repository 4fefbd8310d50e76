import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from trendforest import forest as rf
from trendforest.indicators import build_matrix
from trendforest.market_data import read_csv
from trendforest.preprocess import label, smooth
from trendforest.synthetic import synthetic_series

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def matrix_for(series, horizon=10, alpha=0.2):
    sm = smooth(series, alpha)
    return build_matrix(sm, label(sm["close"], horizon), horizon)


@pytest.fixture(scope="session")
def fixture_csv():
    return os.path.join(FIXTURES, "synthetic_ohlcv.csv")


@pytest.fixture(scope="session")
def fixture_series(fixture_csv):
    return read_csv(fixture_csv, "SYN")


@pytest.fixture(scope="session")
def small_matrix():
    """About 360 rows with a planted trend signal."""
    return matrix_for(synthetic_series(400, seed=3), horizon=10)


@pytest.fixture(scope="session")
def fixture_matrix(fixture_series):
    return matrix_for(fixture_series, horizon=20)


@pytest.fixture(scope="session")
def forest30(fixture_matrix):
    return rf.train(fixture_matrix, b=30, m_try=3, criterion="gini", seed=42)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance verdicts

_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL/SKIP line for an acceptance criterion and print it."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(number, ok, text):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"[acceptance {number}] {status}: {text}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
