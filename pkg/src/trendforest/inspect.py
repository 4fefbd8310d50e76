"""Tree export to DOT and per-sample decision tracing through a forest."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .forest import DecisionTree, Forest
from .indicators import DISPLAY_NAMES, FEATURE_NAMES


def class_name(label: int) -> str:
    return "Rise" if label == 1 else "Fall"


def export_dot(tree: DecisionTree, tree_id: int = 0,
               feature_names=FEATURE_NAMES) -> str:
    """One ``digraph`` per tree, node ids in preorder.

    Internal nodes read ``feature <= threshold`` (4 decimals); leaves read
    Rise or Fall; the left edge is labelled True, the right edge False.
    """
    lines = [f"digraph tree_{tree_id} {{"]
    for i in range(tree.n_nodes):
        if tree.is_leaf(i):
            lines.append(f'    {i} [label="{class_name(tree.label[i])}"];')
            continue
        name = feature_names[tree.feature[i]]
        lines.append(f'    {i} [label="{name} <= {tree.threshold[i]:.4f}"];')
        lines.append(f'    {i} -> {tree.left[i]} [label="True"];')
        lines.append(f'    {i} -> {tree.right[i]} [label="False"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_forest(forest: Forest, out_dir) -> list[str]:
    """Write ``tree_0.dot`` .. ``tree_{b-1}.dot`` and return their paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for k, tree in enumerate(forest.trees):
        path = os.path.join(out_dir, f"tree_{k}.dot")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(export_dot(tree, k, forest.feature_names))
        paths.append(path)
    return paths


@dataclass(frozen=True)
class TraceStep:
    tree_id: int
    node_id: int
    feature_name: str
    feature_value: float
    threshold: float
    branch_taken: bool  # True means value <= threshold, i.e. left
    next_node: int


@dataclass
class TraceResult:
    steps: list[list[TraceStep]] = field(default_factory=list)
    leaves: list[tuple[int, int]] = field(default_factory=list)  # (leaf id, label)
    ensemble_label: int = 1
    votes_rise: int = 0
    votes_fall: int = 0

    def render(self) -> str:
        out = []
        for k, (steps, (leaf, lab)) in enumerate(zip(self.steps, self.leaves)):
            out.append(f"For Tree {k}:")
            for s in steps:
                out.append(f"At node {s.node_id}:({DISPLAY_NAMES.get(s.feature_name, s.feature_name)}"
                           f"={s.feature_value!r}) <= {s.threshold!r}?")
                out.append(f"{s.branch_taken}: Go to Node {s.next_node}")
            out.append(f"Leaf Node {leaf} is labeled as {class_name(lab)}")
            out.append("")
        out.append(f"{self.votes_rise} of the trees in forest predict a rise in price "
                   f"while {self.votes_fall} {'tree predicts' if self.votes_fall == 1 else 'trees predict'}"
                   f" a fall in price.")
        out.append(f"The output of the ensemble is {class_name(self.ensemble_label)}.")
        return "\n".join(out) + "\n"


def trace(forest: Forest, x) -> TraceResult:
    """Route ``x`` through every tree, recording each threshold comparison."""
    x = np.asarray(x, dtype=float).ravel()
    result = TraceResult()
    for k, tree in enumerate(forest.trees):
        steps = []
        node = 0
        while not tree.is_leaf(node):
            f = int(tree.feature[node])
            thr = float(tree.threshold[node])
            went_left = bool(x[f] <= thr)
            nxt = int(tree.left[node] if went_left else tree.right[node])
            steps.append(TraceStep(k, node, forest.feature_names[f], float(x[f]), thr,
                                   went_left, nxt))
            node = nxt
        lab = int(tree.label[node])
        result.steps.append(steps)
        result.leaves.append((node, lab))
        if lab == 1:
            result.votes_rise += 1
        else:
            result.votes_fall += 1
    result.ensemble_label = 1 if result.votes_rise >= result.votes_fall else -1
    return result
