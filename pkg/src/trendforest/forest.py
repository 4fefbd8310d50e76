"""Random forest grown from scratch: impurity, split search, bagging, voting, OOB.

Trees are stored as flat preorder arrays so a whole matrix can be routed
through a tree with a handful of vectorised steps. Tree ``k`` draws all of
its randomness from a stream seeded by ``(seed, k)``; a forest of ``b`` trees
is therefore exactly the first ``b`` trees of any larger forest built with
the same seed, whatever the worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    BadMTry,
    CountMismatch,
    EmptyChild,
    ModelFormatError,
    NoOobRows,
    NotADistribution,
    SingleClassData,
)
from .indicators import FEATURE_NAMES, FeatureMatrix

CRITERIA = ("gini", "entropy")
SUBSPACE_MODES = ("tree", "node")
MODEL_FORMAT = "trendforest-forest"
MODEL_VERSION = 1

# Gains closer than this are treated as equal when breaking ties, and a split
# must beat it to count as a positive-gain split.
GAIN_TOL = 1e-12


# ---------------------------------------------------------------- impurity

def _as_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) == 0 or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise NotADistribution(f"not a probability vector: {p.tolist()}")
    return p


def gini(class_proportions) -> float:
    p = _as_distribution(class_proportions)
    return float(1.0 - np.dot(p, p))


def entropy(class_proportions) -> float:
    """Shannon entropy in bits, with 0 * log 0 taken as 0."""
    p = _as_distribution(class_proportions)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


IMPURITY = {"gini": gini, "entropy": entropy}


def information_gain(parent_counts, left_counts, right_counts, criterion: str = "gini") -> float:
    parent = np.asarray(parent_counts, dtype=float)
    left = np.asarray(left_counts, dtype=float)
    right = np.asarray(right_counts, dtype=float)
    if not (parent.shape == left.shape == right.shape) or not np.allclose(left + right, parent):
        raise CountMismatch("left + right counts must equal parent counts")
    n, nl, nr = parent.sum(), left.sum(), right.sum()
    if nl == 0 or nr == 0:
        raise EmptyChild("both children must be non-empty")
    imp = IMPURITY[_check_criterion(criterion)]
    return imp(parent / n) - (nl / n) * imp(left / nl) - (nr / n) * imp(right / nr)


def _check_criterion(criterion):
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    return criterion


def _binary_impurity(p: np.ndarray, criterion: str) -> np.ndarray:
    """Impurity of a two-class node given the share ``p`` of the +1 class."""
    if criterion == "gini":
        return 2.0 * p * (1.0 - p)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


# ---------------------------------------------------------------- splitting

class Split(NamedTuple):
    feature_id: int
    threshold: float
    gain: float


def _scan(X, rise, weight, features, criterion) -> Split | None:
    """Best split of one node over ``features``, whatever the sign of its gain.

    ``rise`` is 1 for +1 rows and 0 otherwise; ``weight`` holds row
    multiplicities. Ties within GAIN_TOL go to the lower feature id, then the
    lower threshold.
    """
    total = weight.sum()
    total_rise = np.dot(weight, rise)
    parent = float(_binary_impurity(np.array(total_rise / total), criterion))
    best = None
    for f in features:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        v = col[order]
        cuts = np.flatnonzero(v[1:] > v[:-1])
        if len(cuts) == 0:
            continue
        cw = np.cumsum(weight[order])
        cr = np.cumsum((weight * rise)[order])
        nl, rl = cw[cuts], cr[cuts]
        nr, rr = total - nl, total_rise - rl
        gain = parent - (nl / total) * _binary_impurity(rl / nl, criterion) \
                      - (nr / total) * _binary_impurity(rr / nr, criterion)
        top = gain.max()
        k = int(np.flatnonzero(gain >= top - GAIN_TOL)[0])
        if best is None or top > best.gain + GAIN_TOL:
            lo, hi = v[cuts[k]], v[cuts[k] + 1]
            thr = (lo + hi) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = Split(int(f), float(thr), float(gain[k]))
    return best


def best_split(X, y, feature_subset: Sequence[int], criterion: str = "gini") -> Split | None:
    """Exhaustive midpoint scan; ``None`` when no split has positive gain.

    Rows with ``value <= threshold`` go left.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if len(y) < 2:
        return None
    split = _scan(X, (y == 1).astype(float), np.ones(len(y)), sorted(feature_subset),
                  _check_criterion(criterion))
    if split is None or split.gain <= GAIN_TOL:
        return None
    return split


# ---------------------------------------------------------------- trees

@dataclass(frozen=True)
class Internal:
    node_id: int
    feature_id: int
    threshold: float
    left: int
    right: int


@dataclass(frozen=True)
class Leaf:
    node_id: int
    label: int
    population: tuple[int, int]  # (fall count, rise count)


@dataclass
class DecisionTree:
    """Binary tree in preorder arrays; leaves have ``feature == -1``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    counts: np.ndarray
    feature_subset: tuple[int, ...] = ()
    bag: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node_id: int) -> bool:
        return self.feature[node_id] < 0

    def node(self, node_id: int) -> Internal | Leaf:
        if self.is_leaf(node_id):
            c = self.counts[node_id]
            return Leaf(node_id, int(self.label[node_id]), (int(c[0]), int(c[1])))
        return Internal(node_id, int(self.feature[node_id]), float(self.threshold[node_id]),
                        int(self.left[node_id]), int(self.right[node_id]))

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if not self.is_leaf(i):
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        """Leaf id reached by every row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.label[self.apply(X)]


def _leaf_label(n_fall, n_rise) -> int:
    return 1 if n_rise >= n_fall else -1


def grow_tree(
    X,
    y,
    feature_subset: Sequence[int],
    criterion: str = "gini",
    rng: np.random.Generator | None = None,
    weight=None,
    max_depth: int | None = None,
    m_try_per_node: int | None = None,
) -> DecisionTree:
    """Grow a tree until every leaf is pure or cannot be split further.

    An impure node whose best split has zero gain is still split (on that
    best candidate) so that grow-to-purity holds on patterns such as XOR; a
    node becomes a mixed leaf only when its rows are identical on every
    searched feature or the depth cap is reached. Mixed leaves take the
    majority label, ties going to +1.

    With ``m_try_per_node`` set, each node searches a fresh random subset of
    that size drawn from ``feature_subset`` using ``rng``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("cannot grow a tree on zero rows")
    _check_criterion(criterion)
    rise = (y == 1).astype(float)
    weight = np.ones(len(y)) if weight is None else np.asarray(weight, dtype=float)
    subset = np.array(sorted(feature_subset), dtype=np.int64)
    if m_try_per_node is not None and rng is None:
        rng = np.random.default_rng(0)

    feature, threshold, left, right, label, counts = [], [], [], [], [], []
    # Stack entries: (row positions, depth, parent id, is-left-child).
    # Popping left before right yields preorder ids.
    stack = [(np.arange(len(y)), 0, -1, False)]
    while stack:
        pos, depth, parent, is_left = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node_id
        w = weight[pos]
        n_rise = float(np.dot(w, rise[pos]))
        n_fall = float(w.sum()) - n_rise
        counts.append((int(round(n_fall)), int(round(n_rise))))
        feature.append(-1)
        threshold.append(math.nan)
        left.append(-1)
        right.append(-1)
        label.append(_leaf_label(n_fall, n_rise))

        if n_rise == 0 or n_fall == 0 or (max_depth is not None and depth >= max_depth):
            continue
        features = subset
        if m_try_per_node is not None:
            features = np.sort(rng.choice(subset, size=m_try_per_node, replace=False))
        split = _scan(X[pos], rise[pos], w, features, criterion)
        if split is None:
            continue
        go_left = X[pos, split.feature_id] <= split.threshold
        feature[node_id] = split.feature_id
        threshold[node_id] = split.threshold
        label[node_id] = 0
        stack.append((pos[~go_left], depth + 1, node_id, False))
        stack.append((pos[go_left], depth + 1, node_id, True))

    return DecisionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(label, dtype=np.int64),
        np.array(counts, dtype=np.int64).reshape(-1, 2),
        tuple(int(f) for f in subset),
    )


# ---------------------------------------------------------------- forest

def tree_rng(seed: int, k: int) -> np.random.Generator:
    """Independent stream for tree ``k``; depends only on (seed, k)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(k)]))


def bootstrap(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform draws with replacement from ``0..n-1``."""
    if n < 1:
        raise ValueError("bootstrap needs n >= 1")
    return rng.integers(0, n, size=n, dtype=np.int64)


@dataclass
class Forest:
    trees: list[DecisionTree]
    criterion: str = "gini"
    seed: int = 42
    m_try: int = 3
    subspace: str = "tree"
    max_depth: int | None = None
    feature_names: tuple[str, ...] = FEATURE_NAMES

    @property
    def b(self) -> int:
        return len(self.trees)

    def prefix(self, b: int) -> "Forest":
        """The forest made of the first ``b`` trees."""
        if not 1 <= b <= self.b:
            raise ValueError(f"prefix size must be in 1..{self.b}, got {b}")
        return Forest(self.trees[:b], self.criterion, self.seed, self.m_try,
                      self.subspace, self.max_depth, self.feature_names)

    def tree_votes(self, X) -> np.ndarray:
        """(b, n) matrix of +/-1 tree predictions."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.vstack([t.predict(X) for t in self.trees])

    def predict_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Majority labels (ties to +1) and +1 vote fractions for each row."""
        votes = self.tree_votes(X)
        frac = (votes == 1).sum(axis=0) / self.b
        return np.where(frac >= 0.5, 1, -1), frac

    def predict(self, x) -> tuple[int, float]:
        labels, frac = self.predict_many(np.asarray(x, dtype=float).reshape(1, -1))
        return int(labels[0]), float(frac[0])


def _fit_one(args) -> DecisionTree:
    X, y, k, seed, m_try, criterion, subspace, max_depth = args
    n, n_features = X.shape
    rng = tree_rng(seed, k)
    bag = bootstrap(n, rng)
    if subspace == "tree":
        subset = np.sort(rng.choice(n_features, size=m_try, replace=False))
        per_node = None
    else:
        subset = np.arange(n_features)
        per_node = m_try
    rows, mult = np.unique(bag, return_counts=True)
    tree = grow_tree(X[rows], y[rows], subset, criterion, rng, weight=mult,
                     max_depth=max_depth, m_try_per_node=per_node)
    tree.bag = bag
    return tree


def train(
    matrix: FeatureMatrix,
    b: int = 65,
    m_try: int = 3,
    criterion: str = "gini",
    seed: int = 42,
    subspace: str = "tree",
    max_depth: int | None = None,
    n_jobs: int = 1,
) -> Forest:
    """Fit ``b`` trees, each on a bootstrap bag with its own random feature subset.

    The result does not depend on ``n_jobs``.
    """
    X, y = np.asarray(matrix.X, dtype=float), np.asarray(matrix.y)
    n_features = X.shape[1]
    if len(y) == 0 or not ((y == 1).any() and (y == -1).any()):
        raise SingleClassData("training data must contain both +1 and -1 labels")
    if not 1 <= m_try <= n_features:
        raise BadMTry(f"m_try must be in 1..{n_features}, got {m_try}")
    if b < 1:
        raise ValueError(f"tree count must be >= 1, got {b}")
    if subspace not in SUBSPACE_MODES:
        raise ValueError(f"subspace must be one of {SUBSPACE_MODES}, got {subspace!r}")
    _check_criterion(criterion)

    jobs = [(X, y, k, seed, m_try, criterion, subspace, max_depth) for k in range(b)]
    if n_jobs > 1 and b > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(_fit_one, jobs))
    else:
        trees = [_fit_one(job) for job in jobs]
    names = tuple(getattr(matrix, "feature_names", FEATURE_NAMES))
    return Forest(trees, criterion, seed, m_try, subspace, max_depth, names)


def predict(forest: Forest, x) -> tuple[int, float]:
    return forest.predict(x)


# ---------------------------------------------------------------- out of bag

class OobEstimate(NamedTuple):
    error: float
    n_scored: int
    n_unscored: int


def _in_bag(forest: Forest, n: int) -> np.ndarray:
    mask = np.zeros((forest.b, n), dtype=bool)
    for k, tree in enumerate(forest.trees):
        if len(tree.bag) and tree.bag.max() >= n:
            raise ValueError("forest bags reference rows beyond the given matrix")
        mask[k, tree.bag] = True
    return mask


def _oob_cumulative(forest: Forest, matrix: FeatureMatrix):
    votes = forest.tree_votes(matrix.X)
    out_of_bag = ~_in_bag(forest, len(matrix))
    rise = np.cumsum((votes == 1) & out_of_bag, axis=0)
    fall = np.cumsum((votes == -1) & out_of_bag, axis=0)
    return rise, fall


def _oob_at(rise_k, fall_k, y) -> OobEstimate:
    scored = (rise_k + fall_k) > 0
    n_scored = int(scored.sum())
    if n_scored == 0:
        raise NoOobRows("every row is in the bag of every tree")
    pred = np.where(rise_k >= fall_k, 1, -1)
    wrong = int((pred[scored] != y[scored]).sum())
    return OobEstimate(wrong / n_scored, n_scored, len(y) - n_scored)


def oob_error(forest: Forest, matrix: FeatureMatrix) -> OobEstimate:
    """Error of each training row's vote among the trees that never saw it.

    Rows that sit in every bag carry no vote and are left out of the rate;
    their number is reported as ``n_unscored``.
    """
    rise, fall = _oob_cumulative(forest, matrix)
    return _oob_at(rise[-1], fall[-1], np.asarray(matrix.y))


def forest_oob_curve(forest: Forest, matrix: FeatureMatrix, b_values: Sequence[int]):
    """OOB error of each prefix forest of size ``b`` in ``b_values``."""
    if any(b2 < b1 for b1, b2 in zip(b_values, b_values[1:])):
        raise ValueError("b_values must be ascending")
    rise, fall = _oob_cumulative(forest.prefix(max(b_values)), matrix)
    y = np.asarray(matrix.y)
    return [(int(b), _oob_at(rise[b - 1], fall[b - 1], y).error) for b in b_values]


def oob_curve(matrix: FeatureMatrix, b_values: Sequence[int], m_try: int = 3,
              criterion: str = "gini", seed: int = 42, **train_kwargs):
    """Train once at ``max(b_values)`` and read OOB error off each prefix."""
    b_values = [int(b) for b in b_values]
    if not b_values:
        raise ValueError("b_values is empty")
    forest = train(matrix, max(b_values), m_try, criterion, seed, **train_kwargs)
    return forest_oob_curve(forest, matrix, b_values)


# ---------------------------------------------------------------- model file

def _json_float(x: float):
    return None if math.isnan(x) else float(x)


def dumps(forest: Forest) -> str:
    """Versioned JSON text; floats are written in shortest round-trip form."""
    trees = []
    for t in forest.trees:
        nodes = [
            [int(t.feature[i]), _json_float(t.threshold[i]), int(t.left[i]), int(t.right[i]),
             int(t.label[i]), int(t.counts[i, 0]), int(t.counts[i, 1])]
            for i in range(t.n_nodes)
        ]
        trees.append({
            "feature_subset": list(t.feature_subset),
            "bag": [int(v) for v in t.bag],
            "nodes": nodes,
        })
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "criterion": forest.criterion,
        "seed": forest.seed,
        "m_try": forest.m_try,
        "subspace": forest.subspace,
        "max_depth": forest.max_depth,
        "feature_names": list(forest.feature_names),
        "node_fields": ["feature", "threshold", "left", "right", "label", "n_fall", "n_rise"],
        "trees": trees,
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def loads(text: str) -> Forest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a trendforest model file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')}")
    trees = []
    try:
        for t in doc["trees"]:
            nodes = t["nodes"]
            cols = list(zip(*nodes)) if nodes else [[]] * 7
            trees.append(DecisionTree(
                np.array(cols[0], dtype=np.int64),
                np.array([math.nan if v is None else v for v in cols[1]], dtype=float),
                np.array(cols[2], dtype=np.int64),
                np.array(cols[3], dtype=np.int64),
                np.array(cols[4], dtype=np.int64),
                np.column_stack([cols[5], cols[6]]).astype(np.int64),
                tuple(t["feature_subset"]),
                np.array(t["bag"], dtype=np.int64),
            ))
        return Forest(trees, doc["criterion"], doc["seed"], doc["m_try"], doc["subspace"],
                      doc["max_depth"], tuple(doc["feature_names"]))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from None


def save(forest: Forest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(forest))


def load(path) -> Forest:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
