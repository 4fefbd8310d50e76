"""Daily OHLCV ingestion: CSV parsing, validation and plain HTTP fetch."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from .errors import DuplicateDate, EmptyInput, MalformedRow, NetworkError, NonSuccessStatus

COLUMNS = ("Date", "Open", "High", "Low", "Close", "Volume")


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float


@dataclass
class OhlcvSeries:
    symbol: str
    bars: list[OhlcvBar] = field(default_factory=list)

    def __len__(self):
        return len(self.bars)

    def column(self, name: str) -> list[float]:
        return [getattr(b, name) for b in self.bars]


@dataclass(frozen=True)
class Violation:
    index: int
    message: str = ""

    @property
    def kind(self) -> str:
        return type(self).__name__


class NegativeVolume(Violation):
    pass


class NonPositivePrice(Violation):
    pass


class PriceOutOfRange(Violation):
    """open/close outside [low, high], or high below low."""


class DateOrder(Violation):
    """Date not strictly after the previous bar's date (covers duplicates)."""


def _bar_problems(bar: OhlcvBar) -> list[tuple[type[Violation], str]]:
    out = []
    prices = (bar.open, bar.high, bar.low, bar.close)
    if any(not math.isfinite(p) or p <= 0 for p in prices):
        out.append((NonPositivePrice, "prices must be finite and > 0"))
    if not math.isfinite(bar.volume) or bar.volume < 0:
        out.append((NegativeVolume, f"volume {bar.volume} < 0"))
    if bar.high < bar.low:
        out.append((PriceOutOfRange, f"high {bar.high} < low {bar.low}"))
    else:
        for name in ("open", "close"):
            v = getattr(bar, name)
            if not bar.low <= v <= bar.high:
                out.append((PriceOutOfRange, f"{name} {v} outside [{bar.low}, {bar.high}]"))
    return out


def validate(series: OhlcvSeries) -> list[Violation]:
    """Return every invariant violation in ``series``; an empty list means clean."""
    found: list[Violation] = []
    prev = None
    for i, bar in enumerate(series.bars):
        for cls, msg in _bar_problems(bar):
            found.append(cls(i, msg))
        if prev is not None and bar.date <= prev:
            found.append(DateOrder(i, f"{bar.date} does not follow {prev}"))
        prev = bar.date
    return found


def parse_csv(raw_text: str, symbol: str = "") -> OhlcvSeries:
    """Parse ``Date,Open,High,Low,Close,Volume`` text into a date-sorted series.

    Extra columns (e.g. ``Adj Close``) are ignored. Any row with a missing or
    unparsable field, or that breaks a bar invariant, raises
    :class:`MalformedRow` carrying its 1-based line number.
    """
    if not raw_text or not raw_text.strip():
        raise EmptyInput("no CSV content")
    reader = csv.reader(io.StringIO(raw_text.lstrip("﻿")))
    header = [h.strip() for h in next(reader)]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise MalformedRow(1, f"header lacks column(s) {', '.join(missing)}")
    pos = {c: header.index(c) for c in COLUMNS}

    bars = []
    for row in reader:
        line_no = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            cells = {c: row[pos[c]].strip() for c in COLUMNS}
            date = dt.date.fromisoformat(cells["Date"])
            nums = [float(cells[c]) for c in COLUMNS[1:]]
        except (IndexError, ValueError) as exc:
            raise MalformedRow(line_no, str(exc)) from None
        bar = OhlcvBar(date, *nums)
        problems = _bar_problems(bar)
        if problems:
            raise MalformedRow(line_no, problems[0][1])
        bars.append(bar)

    if not bars:
        raise EmptyInput("CSV has a header but no data rows")
    bars.sort(key=lambda b: b.date)
    for a, b in zip(bars, bars[1:]):
        if a.date == b.date:
            raise DuplicateDate(b.date)
    return OhlcvSeries(symbol, bars)


def serialize(series: OhlcvSeries) -> str:
    """Inverse of :func:`parse_csv`; floats are written in round-trip form."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for b in series.bars:
        w.writerow([b.date.isoformat(), repr(b.open), repr(b.high), repr(b.low),
                    repr(b.close), repr(b.volume)])
    return buf.getvalue()


def read_csv(path, symbol: str = "") -> OhlcvSeries:
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh.read(), symbol)


def fetch_remote(url: str, symbol: str = "", timeout: float = 30.0) -> str:
    """GET ``url`` and return the body text untouched.

    A literal ``{symbol}`` in the URL is replaced by ``symbol``; otherwise the
    URL is used verbatim.
    """
    if "{symbol}" in url:
        url = url.replace("{symbol}", symbol)
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            status = resp.status
            body = resp.read()
    except urllib.error.HTTPError as exc:
        raise NonSuccessStatus(exc.code) from None
    except (urllib.error.URLError, OSError) as exc:
        raise NetworkError(f"cannot reach {url}: {exc}") from None
    if not 200 <= status < 300:
        raise NonSuccessStatus(status)
    return body.decode("utf-8")
