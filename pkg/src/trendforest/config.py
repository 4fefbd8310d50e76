"""Run configuration: a flat ``key = value`` text file.

Lines are ``key = value``; ``#`` starts a comment; lists are written
``key = [a, b, c]``; strings may be bare or quoted.

    input = aapl.csv
    horizons = [30, 60, 90]
    alpha = 0.2
    split = shuffled
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields

from .errors import ParseError, RangeError


@dataclass
class RunConfig:
    input: str
    horizons: list[int]
    symbol: str = ""
    alpha: float = 0.2
    label_on: str = "smoothed"
    rsi_period: int = 14
    stoch_period: int = 14
    proc_window: int | None = None  # None: use the horizon
    flat_window: str = "midpoint"
    split: str = "chronological"
    test_fraction: float = 0.2
    trees: int = 65
    mtry: int = 3
    criterion: str = "gini"
    subspace: str = "tree"
    max_depth: int | None = None
    seed: int = 42
    jobs: int = 1
    output_dir: str = "trendforest_out"
    applied_defaults: list[str] = field(default_factory=list, compare=False, repr=False)

    def validate(self) -> "RunConfig":
        def need(ok, name, why):
            if not ok:
                raise RangeError(name, why)

        need(bool(self.input), "input", "path is required")
        need(len(self.horizons) > 0 and all(isinstance(h, int) and h >= 1 for h in self.horizons),
             "horizons", "positive integers required")
        need(0.0 < self.alpha <= 1.0, "alpha", "must lie in (0, 1]")
        need(self.label_on in ("smoothed", "raw"), "label_on", "smoothed or raw")
        need(self.rsi_period >= 1, "rsi_period", "must be >= 1")
        need(self.stoch_period >= 1, "stoch_period", "must be >= 1")
        need(self.proc_window is None or self.proc_window >= 1, "proc_window", "must be >= 1")
        need(self.flat_window in ("midpoint", "strict"), "flat_window", "midpoint or strict")
        need(self.split in ("chronological", "shuffled"), "split", "chronological or shuffled")
        need(0.0 < self.test_fraction < 1.0, "test_fraction", "must lie in (0, 1)")
        need(self.trees >= 1, "trees", "must be >= 1")
        need(1 <= self.mtry <= 6, "mtry", "must lie in 1..6")
        need(self.criterion in ("gini", "entropy"), "criterion", "gini or entropy")
        need(self.subspace in ("tree", "node"), "subspace", "tree or node")
        need(self.max_depth is None or self.max_depth >= 1, "max_depth", "must be >= 1")
        need(self.jobs >= 1, "jobs", "must be >= 1")
        return self


_INT_KEYS = {"rsi_period", "stoch_period", "proc_window", "trees", "mtry", "max_depth",
             "seed", "jobs"}
_FLOAT_KEYS = {"alpha", "test_fraction"}
_PATH_KEYS = {"input", "output_dir"}


def _scalar(text: str):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("none", "null"):
        return None
    return text


def parse_config_text(text: str) -> dict:
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(line_no, "expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key.replace("_", "").isalnum():
            raise ParseError(line_no, f"bad key {key!r}")
        if value.startswith("["):
            if not value.endswith("]"):
                raise ParseError(line_no, "unterminated list")
            inner = value[1:-1].strip()
            values[key] = [_scalar(v) for v in inner.split(",")] if inner else []
        elif not value:
            raise ParseError(line_no, f"missing value for {key!r}")
        else:
            values[key] = _scalar(value)
    return values


def _coerce(name, value, kind):
    if value is None:
        return None
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return float(value)
    except (TypeError, ValueError):
        raise RangeError(name, f"expected a number, got {value!r}") from None


def config_from_dict(values: dict, base_dir: str = ".") -> RunConfig:
    values = dict(values)
    if "horizon" in values and "horizons" not in values:
        values["horizons"] = values.pop("horizon")
    known = {f.name for f in fields(RunConfig)} - {"applied_defaults"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise RangeError(unknown[0], "unknown configuration key")
    if "input" not in values:
        raise RangeError("input", "path is required")
    if "horizons" not in values:
        raise RangeError("horizons", "at least one horizon is required")

    horizons = values["horizons"]
    if not isinstance(horizons, list):
        horizons = [horizons]
    values["horizons"] = [_coerce("horizons", h, int) for h in horizons]
    for key in _INT_KEYS & set(values):
        values[key] = _coerce(key, values[key], int)
    for key in _FLOAT_KEYS & set(values):
        values[key] = _coerce(key, values[key], float)
    for key in _PATH_KEYS & set(values):
        values[key] = os.path.join(base_dir, str(values[key]))
    for key in known - _INT_KEYS - _FLOAT_KEYS - _PATH_KEYS - {"horizons"}:
        if key in values and values[key] is not None:
            values[key] = str(values[key])

    cfg = RunConfig(**values)
    if "output_dir" not in values:
        cfg.output_dir = os.path.join(base_dir, cfg.output_dir)
    cfg.applied_defaults = sorted(known - set(values))
    return cfg.validate()


def load_config(path, echo=sys.stderr) -> RunConfig:
    """Read, default and validate a run configuration.

    Each default that was applied is reported once on ``echo``.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    cfg = config_from_dict(parse_config_text(text), os.path.dirname(os.path.abspath(path)))
    if echo is not None:
        for name in cfg.applied_defaults:
            echo.write(f"config: default {name} = {getattr(cfg, name)}\n")
    return cfg
