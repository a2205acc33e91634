"""
CART-style binary decision tree (Gini criterion), the base learner of every ensemble

A fitted tree routes a row left when `x[feature] < threshold` and returns the
reached leaf's weighted positive fraction as its score. Hard labels are
`score >= 0.5` (ties go to the positive class).

JSON format (see to_dict):
    split: {"feature": int, "threshold": float, "decrease": float, "n_samples": int,
            "left": node, "right": node}
    leaf:  {"counts": [negative_weight, positive_weight], "value": float, "n_samples": int}
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..config import TreeParams
from ..errors import DimensionMismatch, EmptyInput, NegativeWeight

_TOL = 1e-12


@dataclass(frozen=True)
class Leaf:
    class_counts: Tuple[float, float]
    prediction_value: float
    n_samples: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    impurity_decrease: float
    n_samples: int


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True, eq=False)
class TreeModel:
    root: TreeNode
    params: TreeParams
    n_columns: int

    @property
    def importances(self) -> np.ndarray:
        return tree_importances(self)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.model_dump(mode="json"),
            "n_columns": self.n_columns,
            "root": _node_to_dict(self.root),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TreeModel":
        return cls(_node_from_dict(data["root"]), TreeParams(**data["params"]), int(data["n_columns"]))


def gini(positive_weight: float, total_weight: float) -> float:
    """Two-class Gini impurity 1 - p^2 - (1-p)^2"""
    if total_weight <= 0:
        return 0.0
    p = positive_weight / total_weight
    return 2.0 * p * (1.0 - p)


class _Grower:
    def __init__(self, X, y, w, params: TreeParams, rng):
        self.X = X
        self.y = y
        self.w = w
        self.wy = w * y
        self.params = params
        self.rng = rng
        self.n_columns = X.shape[1]
        self.k = params.resolve_features(self.n_columns)
        self.root_weight = float(w.sum())

    def grow(self, rows: np.ndarray, depth: int) -> TreeNode:
        w_node = float(self.w[rows].sum())
        pos_node = float(self.wy[rows].sum())
        leaf = self._leaf(rows, w_node, pos_node)

        p = self.params
        if len(rows) < p.min_split or (p.max_depth is not None and depth >= p.max_depth):
            return leaf
        if pos_node <= 0.0 or pos_node >= w_node:
            return leaf

        found = self._best_split(rows, w_node, pos_node)
        if found is None:
            return leaf
        feature, threshold, gain = found

        go_left = self.X[rows, feature] < threshold
        decrease = (w_node / self.root_weight) * max(gain, 0.0)
        return Split(
            feature=int(feature),
            threshold=float(threshold),
            left=self.grow(rows[go_left], depth + 1),
            right=self.grow(rows[~go_left], depth + 1),
            impurity_decrease=decrease,
            n_samples=len(rows),
        )

    def _leaf(self, rows, w_node, pos_node) -> Leaf:
        if w_node > 0:
            value = pos_node / w_node
        else:
            value = float(self.y[rows].mean())
        return Leaf((w_node - pos_node, pos_node), value, len(rows))

    def _candidate_order(self) -> Tuple[np.ndarray, np.ndarray]:
        """(first-look features sorted ascending, the rest in random order)"""
        if self.k >= self.n_columns:
            return np.arange(self.n_columns), np.empty(0, dtype=int)
        perm = self.rng.permutation(self.n_columns)
        return np.sort(perm[: self.k]), perm[self.k:]

    def _best_split(self, rows, w_node, pos_node) -> Optional[Tuple[int, float, float]]:
        parent = gini(pos_node, w_node)
        first, rest = self._candidate_order()

        best = None
        for feature in first:
            found = self._scan_feature(rows, feature, w_node, pos_node)
            if found is not None and (best is None or found[1] < best[2] - _TOL):
                best = (int(feature), found[0], found[1])
        # Keep looking past the drawn subset until some valid partition exists
        for feature in rest:
            if best is not None:
                break
            found = self._scan_feature(rows, feature, w_node, pos_node)
            if found is not None:
                best = (int(feature), found[0], found[1])

        if best is None:
            return None
        feature, threshold, child = best
        return feature, threshold, parent - child

    def _scan_feature(self, rows, feature, w_node, pos_node) -> Optional[Tuple[float, float]]:
        """Lowest weighted child impurity over midpoint thresholds: (threshold, impurity)"""
        col = self.X[rows, feature]
        order = np.argsort(col, kind="mergesort")
        values = col[order]
        candidates = np.flatnonzero(values[:-1] != values[1:])
        n = len(values)
        min_leaf = self.params.min_leaf
        candidates = candidates[(candidates + 1 >= min_leaf) & (n - candidates - 1 >= min_leaf)]
        if len(candidates) == 0:
            return None

        cum_w = np.cumsum(self.w[rows][order])
        cum_pos = np.cumsum(self.wy[rows][order])
        w_left = cum_w[candidates]
        pos_left = cum_pos[candidates]
        w_right = w_node - w_left
        pos_right = pos_node - pos_left

        with np.errstate(divide="ignore", invalid="ignore"):
            p_left = np.where(w_left > 0, pos_left / w_left, 0.0)
            p_right = np.where(w_right > 0, pos_right / w_right, 0.0)
        impurity = (w_left * 2.0 * p_left * (1.0 - p_left) + w_right * 2.0 * p_right * (1.0 - p_right)) / w_node

        best = int(np.argmin(impurity))
        i = candidates[best]
        lo, hi = values[i], values[i + 1]
        threshold = (lo + hi) / 2.0
        if threshold <= lo:
            threshold = hi
        return float(threshold), float(impurity[best])


def fit_tree(
    X,
    y,
    sample_weights=None,
    params: TreeParams = TreeParams(),
    rng: Optional[np.random.Generator] = None,
) -> TreeModel:
    """
    Greedy recursive partitioning minimizing weighted Gini impurity

    Args:
        X: n x q float matrix
        y: n binary labels
        sample_weights: n nonnegative weights (default all ones)
        params: Depth, split-size and per-node feature subsampling settings
        rng: Generator for per-node feature subsets (needed only when subsampling)

    Returns:
        TreeModel
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInput("fit_tree needs at least one row")
    if len(y) != X.shape[0]:
        raise DimensionMismatch("X and y differ in length")
    w = np.ones(len(y)) if sample_weights is None else np.asarray(sample_weights, dtype=float)
    if len(w) != len(y):
        raise DimensionMismatch("sample_weights and y differ in length")
    if (w < 0).any():
        raise NegativeWeight("sample weights must be nonnegative")
    if w.sum() <= 0:
        raise EmptyInput("total sample weight must be positive")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))

    grower = _Grower(X, y, w, params, rng)
    root = grower.grow(np.arange(len(y)), depth=0)
    return TreeModel(root, params, X.shape[1])


def predict_tree(model: TreeModel, x) -> float:
    """Route one row to its leaf and return the leaf's positive fraction"""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_columns,):
        raise DimensionMismatch(f"row has {x.shape} cells, model expects {model.n_columns}")
    node = model.root
    while isinstance(node, Split):
        node = node.left if x[node.feature] < node.threshold else node.right
    return node.prediction_value


def predict_scores(model: TreeModel, X) -> np.ndarray:
    """predict_tree over every row of X"""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_columns:
        raise DimensionMismatch(f"matrix has shape {X.shape}, model expects {model.n_columns} columns")
    out = np.empty(X.shape[0])
    _route(model.root, X, np.arange(X.shape[0]), out)
    return out


def _route(node: TreeNode, X, rows, out) -> None:
    if isinstance(node, Leaf):
        out[rows] = node.prediction_value
        return
    go_left = X[rows, node.feature] < node.threshold
    _route(node.left, X, rows[go_left], out)
    _route(node.right, X, rows[~go_left], out)


def hard_labels(scores) -> np.ndarray:
    return (np.asarray(scores) >= 0.5).astype(np.int8)


def tree_importances(model: TreeModel) -> np.ndarray:
    """Mean decrease in impurity per column, normalized to sum 1 (zeros for a single leaf)"""
    totals = np.zeros(model.n_columns)
    for node in iter_splits(model.root):
        totals[node.feature] += node.impurity_decrease
    s = totals.sum()
    return totals / s if s > 0 else totals


def iter_splits(node: TreeNode) -> List[Split]:
    out: List[Split] = []
    stack = [node]
    while stack:
        current = stack.pop()
        if isinstance(current, Split):
            out.append(current)
            stack.extend((current.right, current.left))
    return out


def tree_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def _node_to_dict(node: TreeNode) -> Dict[str, Any]:
    if isinstance(node, Leaf):
        return {"counts": list(node.class_counts), "value": node.prediction_value, "n_samples": node.n_samples}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "decrease": node.impurity_decrease,
        "n_samples": node.n_samples,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(data: Dict[str, Any]) -> TreeNode:
    if "counts" in data:
        neg, pos = data["counts"]
        return Leaf((float(neg), float(pos)), float(data["value"]), int(data["n_samples"]))
    return Split(
        feature=int(data["feature"]),
        threshold=float(data["threshold"]),
        left=_node_from_dict(data["left"]),
        right=_node_from_dict(data["right"]),
        impurity_decrease=float(data["decrease"]),
        n_samples=int(data["n_samples"]),
    )
