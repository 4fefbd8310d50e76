"""Held-out evaluation: confusion metrics, ROC/AUC on vote fractions, margins."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import forest as rf
from .errors import DegenerateSplit, EmptyTestSet, LengthMismatch, SingleClassTruth
from .indicators import FeatureMatrix, build_matrix
from .inspect import export_forest
from .market_data import read_csv
from .preprocess import label, raw_channels, smooth

REPORT_COLUMNS = ("horizon_days", "accuracy", "precision", "recall", "specificity", "auc",
                  "oob_error", "strength", "margin_variance", "chebyshev_bound")


def fmt(x) -> str:
    """Pinned number formatting for every report file."""
    if x is None:
        return "undefined"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.10g}"


def split_train_test(matrix: FeatureMatrix, mode: str = "chronological",
                     test_fraction: float = 0.2, seed: int = 42):
    """Chronological: the last ``test_fraction`` of rows form the test set.
    Shuffled: a seeded uniform permutation decides membership."""
    if not 0.0 < test_fraction < 1.0:
        raise DegenerateSplit(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(matrix)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise DegenerateSplit(f"{n} rows cannot give a non-empty train and test set "
                              f"at test_fraction {test_fraction}")
    if mode == "chronological":
        train_pos, test_pos = np.arange(n - n_test), np.arange(n - n_test, n)
    elif mode == "shuffled":
        perm = np.random.default_rng(seed).permutation(n)
        train_pos, test_pos = np.sort(perm[n_test:]), np.sort(perm[:n_test])
    else:
        raise ValueError(f"split mode must be chronological or shuffled, got {mode!r}")
    y_train = matrix.y[train_pos]
    if not ((y_train == 1).any() and (y_train == -1).any()):
        raise DegenerateSplit("training part holds a single class")
    return matrix.take(train_pos), matrix.take(test_pos)


class ConfusionCounts(NamedTuple):
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(predictions: Sequence[int], truth: Sequence[int]) -> ConfusionCounts:
    p = np.asarray(predictions)
    t = np.asarray(truth)
    if p.shape != t.shape or p.size == 0:
        raise LengthMismatch("predictions and truth must be equal-length and non-empty")
    return ConfusionCounts(
        tp=int(((p == 1) & (t == 1)).sum()),
        tn=int(((p != 1) & (t != 1)).sum()),
        fp=int(((p == 1) & (t != 1)).sum()),
        fn=int(((p != 1) & (t == 1)).sum()),
    )


class Metrics(NamedTuple):
    accuracy: float | None
    precision: float | None
    recall: float | None
    specificity: float | None


def _ratio(num, den):
    return num / den if den else None


def metrics(c: ConfusionCounts) -> Metrics:
    """Accuracy, precision, recall, specificity; ``None`` marks a zero denominator."""
    return Metrics(
        _ratio(c.tp + c.tn, c.n),
        _ratio(c.tp, c.tp + c.fp),
        _ratio(c.tp, c.tp + c.fn),
        _ratio(c.tn, c.tn + c.fp),
    )


@dataclass
class RocCurve:
    thresholds: np.ndarray  # first entry is +inf for the (0, 0) point
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("threshold", "fpr", "tpr"))
        for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
            w.writerow(("inf" if np.isinf(t) else fmt(t), fmt(f), fmt(p)))
        return buf.getvalue()


def roc(scores: Sequence[float], truth: Sequence[int]) -> RocCurve:
    """Sweep each distinct score as a ``score >= t`` cut, highest first.

    Tied scores move the curve in one step; AUC is the trapezoidal area.
    """
    s = np.asarray(scores, dtype=float)
    t = np.asarray(truth)
    if s.shape != t.shape:
        raise LengthMismatch("scores and truth differ in length")
    n_pos = int((t == 1).sum())
    n_neg = len(t) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassTruth("ROC needs both classes in the truth labels")
    order = np.argsort(-s, kind="stable")
    s_sorted, pos_sorted = s[order], (t[order] == 1)
    tp = np.cumsum(pos_sorted)
    fp = np.cumsum(~pos_sorted)
    last_of_group = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tpr = np.r_[0.0, tp[last_of_group] / n_pos]
    fpr = np.r_[0.0, fp[last_of_group] / n_neg]
    thresholds = np.r_[np.inf, s_sorted[last_of_group]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thresholds, fpr, tpr, auc)


@dataclass
class MarginReport:
    margins: np.ndarray
    strength: float
    variance: float
    chebyshev_bound: float | None  # None when strength <= 0 (no bound)
    empirical_error: float


def margin_report(forest: rf.Forest, X, y) -> MarginReport:
    """Per-sample margin = true-class vote share minus other-class share.

    The bound is var(margin) / strength**2 using the population variance of
    the margins. A sample counts as an error when its margin is negative, or
    when it is zero and the truth is -1 (a split vote resolves to +1).
    """
    y = np.asarray(y)
    if len(y) == 0:
        raise EmptyTestSet("margin report needs at least one test row")
    _, rise_share = forest.predict_many(X)
    true_share = np.where(y == 1, rise_share, 1.0 - rise_share)
    margins = 2.0 * true_share - 1.0
    s = float(margins.mean())
    var = float(margins.var())
    bound = var / s**2 if s > 0 else None
    wrong = (margins < 0) | ((margins == 0) & (y == -1))
    return MarginReport(margins, s, var, bound, float(wrong.mean()))


# ---------------------------------------------------------------- pipeline

@dataclass
class HorizonResult:
    horizon_days: int
    n_train: int
    n_test: int
    counts: ConfusionCounts
    scores: Metrics
    roc: RocCurve
    oob: rf.OobEstimate
    margin: MarginReport
    forest: rf.Forest = field(repr=False)

    def row(self) -> list[str]:
        m, g = self.scores, self.margin
        return [fmt(self.horizon_days), fmt(m.accuracy), fmt(m.precision), fmt(m.recall),
                fmt(m.specificity), fmt(self.roc.auc), fmt(self.oob.error), fmt(g.strength),
                fmt(g.variance), fmt(g.chebyshev_bound)]


@dataclass
class EvaluationReport:
    results: list[HorizonResult]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.results:
            w.writerow(r.row())
        return buf.getvalue()


def evaluate_matrix(matrix: FeatureMatrix, horizon: int, split: str = "chronological",
                    test_fraction: float = 0.2, trees: int = 65, mtry: int = 3,
                    criterion: str = "gini", seed: int = 42, subspace: str = "tree",
                    max_depth: int | None = None, jobs: int = 1) -> HorizonResult:
    train_m, test_m = split_train_test(matrix, split, test_fraction, seed)
    forest = rf.train(train_m, trees, mtry, criterion, seed, subspace, max_depth, jobs)
    pred, frac = forest.predict_many(test_m.X)
    counts = confusion(pred, test_m.y)
    y = test_m.y
    curve = roc(frac, y) if (y == 1).any() and (y == -1).any() else \
        RocCurve(np.array([np.inf]), np.zeros(1), np.zeros(1), float("nan"))
    return HorizonResult(horizon, len(train_m), len(test_m), counts, metrics(counts), curve,
                         rf.oob_error(forest, train_m), margin_report(forest, test_m.X, y), forest)


def evaluate_pipeline(config, write: bool = True) -> EvaluationReport:
    """Ingest, smooth once, then per horizon: label, featurise, split, train, score.

    ``config`` is a :class:`trendforest.config.RunConfig`. With ``write`` the
    report, ROC points, model and DOT files land in ``config.output_dir``.
    """
    series = read_csv(config.input, config.symbol)
    smoothed = smooth(series, config.alpha)
    label_source = smoothed if config.label_on == "smoothed" else raw_channels(series)
    results = []
    for d in config.horizons:
        labels = label(label_source["close"], d)
        matrix = build_matrix(smoothed, labels, config.proc_window or d, config.rsi_period,
                              config.stoch_period, config.flat_window == "strict")
        results.append(evaluate_matrix(
            matrix, d, config.split, config.test_fraction, config.trees, config.mtry,
            config.criterion, config.seed, config.subspace, config.max_depth, config.jobs))
    report = EvaluationReport(results)
    if write:
        write_artifacts(report, config.output_dir)
    return report


def write_artifacts(report: EvaluationReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    for r in report.results:
        d = r.horizon_days
        with open(os.path.join(out_dir, f"roc_d{d}.csv"), "w", encoding="utf-8") as fh:
            fh.write(r.roc.to_csv())
        rf.save(r.forest, os.path.join(out_dir, f"model_d{d}.forest"))
        export_forest(r.forest, os.path.join(out_dir, f"dots_d{d}"))

