"""Exponential smoothing of OHLCV channels and d-day direction labels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AlphaOutOfRange, EmptySeries, HorizonTooLarge
from .market_data import OhlcvSeries

CHANNELS = ("open", "high", "low", "close", "volume")
DEFAULT_ALPHA = 0.2


@dataclass
class SmoothedSeries:
    alpha: float
    channels: dict[str, np.ndarray]
    dates: list | None = None

    def __len__(self):
        return len(self.channels["close"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]


class LabeledRow(NamedTuple):
    index: int
    label: int
    horizon_d: int


def exponential_smooth(values: Sequence[float], alpha: float) -> np.ndarray:
    """S_0 = Y_0, S_t = alpha * Y_t + (1 - alpha) * S_{t-1}."""
    y = np.asarray(values, dtype=float)
    out = np.empty_like(y)
    if len(y) == 0:
        return out
    keep = 1.0 - alpha
    s = y[0]
    out[0] = s
    for t in range(1, len(y)):
        s = alpha * y[t] + keep * s
        out[t] = s
    return out


def smooth(series: OhlcvSeries, alpha: float = DEFAULT_ALPHA) -> SmoothedSeries:
    """Smooth all five channels with the same factor; strictly causal."""
    if len(series) == 0:
        raise EmptySeries("cannot smooth an empty series")
    if not 0.0 < alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {alpha}")
    channels = {name: exponential_smooth(series.column(name), alpha) for name in CHANNELS}
    return SmoothedSeries(alpha, channels, [b.date for b in series.bars])


def raw_channels(series: OhlcvSeries) -> SmoothedSeries:
    """Unsmoothed channels in the same container (alpha = 1)."""
    if len(series) == 0:
        raise EmptySeries("empty series")
    channels = {name: np.asarray(series.column(name), dtype=float) for name in CHANNELS}
    return SmoothedSeries(1.0, channels, [b.date for b in series.bars])


def direction_labels(closes: Sequence[float], horizon_d: int) -> np.ndarray:
    """+1 where close[i + d] > close[i], else -1; length len(closes) - d."""
    c = np.asarray(closes, dtype=float)
    if horizon_d < 1:
        raise HorizonTooLarge(f"horizon must be a positive integer, got {horizon_d}")
    if horizon_d >= len(c):
        raise HorizonTooLarge(f"horizon {horizon_d} needs more than {len(c)} bars")
    return np.where(c[horizon_d:] > c[:-horizon_d], 1, -1).astype(np.int64)


def label(smoothed_closes: Sequence[float], horizon_d: int) -> list[LabeledRow]:
    """One row per index i with i + d inside the series.

    A zero change counts as a fall so every label stays in {+1, -1}.
    """
    signs = direction_labels(smoothed_closes, horizon_d)
    return [LabeledRow(i, int(s), horizon_d) for i, s in enumerate(signs)]
