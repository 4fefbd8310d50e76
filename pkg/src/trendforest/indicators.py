"""The six technical indicators and the feature matrix built from them.

Every indicator returns an array aligned with its input; positions where the
trailing window is not yet full hold NaN.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FlatWindow, LengthMismatch, NoUsableRows, SeriesTooShort
from .preprocess import LabeledRow, SmoothedSeries

FEATURE_NAMES = ("rsi", "stoch_k", "williams_r", "macd", "proc", "obv")
DISPLAY_NAMES = {
    "rsi": "RSI",
    "stoch_k": "Stochastic Oscillator",
    "williams_r": "Williams",
    "macd": "MACD",
    "proc": "Price Rate Of Change",
    "obv": "On Balance Volume",
}
MACD_FAST, MACD_SLOW, MACD_SIGNAL = 12, 26, 9
MACD_WARMUP = MACD_SLOW + MACD_SIGNAL


class FeatureVector(NamedTuple):
    rsi: float
    stoch_k: float
    williams_r: float
    macd: float
    proc: float
    obv: float


def rsi(closes: Sequence[float], period: int = 14) -> np.ndarray:
    """Relative strength index with plain (unweighted) average gain and loss.

    A window with no losses scores 100, one with no gains scores 0, and a
    window with neither scores 50.
    """
    c = np.asarray(closes, dtype=float)
    if period < 1 or len(c) <= period:
        raise SeriesTooShort(f"RSI({period}) needs more than {period} closes, got {len(c)}")
    delta = np.diff(c)
    gains = sliding_window_view(np.clip(delta, 0.0, None), period).sum(axis=1) / period
    losses = sliding_window_view(np.clip(-delta, 0.0, None), period).sum(axis=1) / period
    out = np.full(len(c), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 100.0 - 100.0 / (1.0 + gains / losses)
    val = np.where(losses == 0.0, 100.0, val)
    val = np.where((losses == 0.0) & (gains == 0.0), 50.0, val)
    out[period:] = val
    return out


def _window_extremes(highs, lows, period):
    h = np.asarray(highs, dtype=float)
    lo = np.asarray(lows, dtype=float)
    if period < 1 or len(h) < period:
        raise SeriesTooShort(f"window of {period} needs at least {period} bars, got {len(h)}")
    hh = np.full(len(h), np.nan)
    ll = np.full(len(h), np.nan)
    hh[period - 1:] = sliding_window_view(h, period).max(axis=1)
    ll[period - 1:] = sliding_window_view(lo, period).min(axis=1)
    return hh, ll


def _check_lengths(*arrays):
    if len({len(a) for a in arrays}) != 1:
        raise LengthMismatch("input series differ in length")


def _range_position(closes, highs, lows, period, strict):
    """(C - L) / (H - L) over the trailing window; flat windows give 0.5."""
    _check_lengths(closes, highs, lows)
    c = np.asarray(closes, dtype=float)
    hh, ll = _window_extremes(highs, lows, period)
    span = hh - ll
    flat = span == 0.0
    if strict and flat.any():
        raise FlatWindow(int(np.flatnonzero(flat)[0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(flat, 0.5, (c - ll) / span)
    return pos, hh, ll, c, span, flat


def stochastic_k(closes, highs, lows, period: int = 14, strict: bool = False) -> np.ndarray:
    pos, *_ = _range_position(closes, highs, lows, period, strict)
    return 100.0 * pos


def williams_r(closes, highs, lows, period: int = 14, strict: bool = False) -> np.ndarray:
    _, hh, _, c, span, flat = _range_position(closes, highs, lows, period, strict)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(flat, -50.0, -100.0 * (hh - c) / span)


def ema(values: Sequence[float], n: int) -> np.ndarray:
    """n-day exponential moving average, multiplier 2/(n+1), seeded with the first value."""
    x = np.asarray(values, dtype=float)
    k = 2.0 / (n + 1.0)
    out = np.empty_like(x)
    if len(x) == 0:
        return out
    e = x[0]
    out[0] = e
    for t in range(1, len(x)):
        e = k * x[t] + (1.0 - k) * e
        out[t] = e
    return out


def macd(closes: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(macd_line, signal_line)``; only the line is a model feature."""
    c = np.asarray(closes, dtype=float)
    if len(c) < MACD_WARMUP:
        raise SeriesTooShort(f"MACD needs at least {MACD_WARMUP} closes, got {len(c)}")
    line = ema(c, MACD_FAST) - ema(c, MACD_SLOW)
    return line, ema(line, MACD_SIGNAL)


def proc(closes: Sequence[float], n: int) -> np.ndarray:
    c = np.asarray(closes, dtype=float)
    if n < 1 or len(c) <= n:
        raise SeriesTooShort(f"PROC({n}) needs more than {n} closes, got {len(c)}")
    out = np.full(len(c), np.nan)
    out[n:] = (c[n:] - c[:-n]) / c[:-n]
    return out


def obv(closes: Sequence[float], volumes: Sequence[float]) -> np.ndarray:
    """On-balance volume with OBV(0) = 0."""
    _check_lengths(closes, volumes)
    c = np.asarray(closes, dtype=float)
    v = np.asarray(volumes, dtype=float)
    if len(c) == 0:
        raise LengthMismatch("OBV needs at least one bar")
    steps = np.sign(np.diff(c)) * v[1:]
    return np.concatenate(([0.0], np.cumsum(steps)))


@dataclass
class FeatureMatrix:
    """Training table: one row per usable bar, six indicator columns, +/-1 label."""

    index: np.ndarray
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES
    horizon_d: int | None = None
    dates: list | None = None

    def __post_init__(self):
        self.index = np.asarray(self.index, dtype=np.int64)
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.index), len(self.feature_names))
        self.y = np.asarray(self.y, dtype=np.int64)

    def __len__(self):
        return len(self.y)

    def rows(self):
        for i, x, lab in zip(self.index, self.X, self.y):
            yield int(i), FeatureVector(*map(float, x)), int(lab)

    def take(self, positions) -> "FeatureMatrix":
        positions = np.asarray(positions, dtype=np.int64)
        dates = [self.dates[p] for p in positions] if self.dates is not None else None
        return FeatureMatrix(self.index[positions], self.X[positions], self.y[positions],
                             self.feature_names, self.horizon_d, dates)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("index", *self.feature_names, "label"))
        for i, x, lab in zip(self.index, self.X, self.y):
            w.writerow([int(i), *(repr(float(v)) for v in x), int(lab)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FeatureMatrix":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        expected = ["index", *FEATURE_NAMES, "label"]
        if header is None or [h.strip() for h in header] != expected:
            raise NoUsableRows(f"feature matrix header must be {','.join(expected)}")
        idx, xs, ys = [], [], []
        for row in reader:
            if not row:
                continue
            try:
                idx.append(int(row[0]))
                xs.append([float(v) for v in row[1:7]])
                lab = int(row[7])
            except (IndexError, ValueError):
                raise NoUsableRows(f"bad feature row at line {reader.line_num}") from None
            if lab not in (1, -1):
                raise NoUsableRows(f"label must be +1 or -1 at line {reader.line_num}")
            ys.append(lab)
        if not ys:
            raise NoUsableRows("feature matrix has no rows")
        return cls(np.array(idx), np.array(xs), np.array(ys))


def warmup_index(proc_n: int, rsi_period: int = 14, stoch_period: int = 14) -> int:
    """First bar index at which every indicator is defined."""
    return max(MACD_WARMUP, rsi_period, stoch_period - 1, proc_n)


def build_matrix(
    smoothed: SmoothedSeries,
    labels: Sequence[LabeledRow],
    proc_n: int,
    rsi_period: int = 14,
    stoch_period: int = 14,
    strict_flat: bool = False,
) -> FeatureMatrix:
    """Join the six indicator streams with the labels on bar index.

    Rows before the warm-up index and rows without a label are dropped.
    """
    n = len(smoothed)
    start = warmup_index(proc_n, rsi_period, stoch_period)
    labeled = {row.index: row.label for row in labels}
    keep = [i for i in range(start, n) if i in labeled]
    if not keep:
        raise NoUsableRows(f"{n} bars leave no labeled rows after a warm-up of {start}")

    close, high, low = smoothed["close"], smoothed["high"], smoothed["low"]
    columns = (
        rsi(close, rsi_period),
        stochastic_k(close, high, low, stoch_period, strict_flat),
        williams_r(close, high, low, stoch_period, strict_flat),
        macd(close)[0],
        proc(close, proc_n),
        obv(close, smoothed["volume"]),
    )
    keep = np.array(keep)
    X = np.column_stack([col[keep] for col in columns])
    y = np.array([labeled[i] for i in keep])
    horizon = labels[0].horizon_d if labels else None
    dates = [smoothed.dates[i] for i in keep] if smoothed.dates is not None else None
    return FeatureMatrix(keep, X, y, FEATURE_NAMES, horizon, dates)
