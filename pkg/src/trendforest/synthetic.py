"""Seeded synthetic OHLCV generator with a planted, persistent trend signal.

Daily log returns are ``regime * drift + noise`` where the regime flips
between +1 and -1 as a Markov chain with mean dwell ``regime_days``. The
direction over the next few weeks is therefore partly predictable from the
recent momentum, which is what the indicators measure.
"""

from __future__ import annotations

import datetime as dt

import numpy as np

from .market_data import OhlcvBar, OhlcvSeries


def business_days(start: dt.date, n: int) -> list[dt.date]:
    days, d = [], start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def synthetic_series(
    n_bars: int = 1500,
    seed: int = 0,
    symbol: str = "SYN",
    regime_days: float = 80.0,
    drift: float = 0.002,
    vol: float = 0.012,
    start: dt.date = dt.date(2000, 1, 3),
) -> OhlcvSeries:
    rng = np.random.default_rng(seed)
    flip = rng.random(n_bars) < 1.0 / regime_days
    regime = np.where(np.cumsum(flip) % 2 == 0, 1.0, -1.0)
    if rng.random() < 0.5:
        regime = -regime
    log_ret = regime * drift + vol * rng.standard_normal(n_bars)
    close = 100.0 * np.exp(np.cumsum(log_ret))
    prev = np.concatenate(([close[0]], close[:-1]))
    open_ = prev * np.exp(0.3 * vol * rng.standard_normal(n_bars))
    top = np.maximum(open_, close)
    bottom = np.minimum(open_, close)
    high = top * np.exp(0.5 * vol * np.abs(rng.standard_normal(n_bars)))
    low = bottom * np.exp(-0.5 * vol * np.abs(rng.standard_normal(n_bars)))
    volume = np.round(rng.lognormal(15.0, 0.4, n_bars))

    bars = [
        OhlcvBar(d, round(float(o), 4), round(float(h), 4), round(float(lo), 4),
                 round(float(c), 4), float(v))
        for d, o, h, lo, c, v in zip(business_days(start, n_bars), open_, high, low, close, volume)
    ]
    # Rounding can push open/close a hair outside [low, high].
    fixed = []
    for b in bars:
        hi = max(b.high, b.open, b.close)
        lo = min(b.low, b.open, b.close)
        fixed.append(OhlcvBar(b.date, b.open, hi, lo, b.close, b.volume))
    return OhlcvSeries(symbol, fixed)
