"""CART decision trees (Gini impurity) and a bagged random forest."""

from __future__ import annotations

import heapq
import math
from typing import Optional

import numpy as np


def gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int, features):
    """Best Gini split of the rows over the candidate features.

    Returns (weighted_child_impurity, feature, threshold) or None when no
    feature has two distinct values.  Thresholds are midpoints between
    consecutive distinct values; ties keep the first feature in ``features``
    and the lowest threshold.
    """
    n = len(y)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = left[-1] + onehot[order[-1]] - left
        n_left = np.arange(1, n)
        n_right = n - n_left
        g_left = 1.0 - np.sum(left * left, axis=1) / (n_left * n_left)
        g_right = 1.0 - np.sum(right * right, axis=1) / (n_right * n_right)
        weighted = (n_left * g_left + n_right * g_right) / n
        weighted = np.where(valid, weighted, np.inf)
        i = int(np.argmin(weighted))
        if best is None or weighted[i] < best[0]:
            best = (float(weighted[i]), int(f), float((xs[i] + xs[i + 1]) / 2))
    return best


class DecisionTree:
    """Binary CART tree grown best-first.

    Growth stops at ``max_depth`` or when ``max_leaves`` leaves exist; nodes
    are expanded in order of decreasing weighted impurity reduction.
    """

    def __init__(self, max_depth: Optional[int] = None, max_leaves: Optional[int] = None,
                 max_features: Optional[int] = None):
        self.max_depth = max_depth
        self.max_leaves = max_leaves
        self.max_features = max_features
        self.feature = self.threshold = self.left = self.right = self.value = None

    def fit(self, X, y, n_classes: int, rng=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        rng = rng if rng is not None else np.random.default_rng(0)
        d = X.shape[1]
        k = d if self.max_features is None else min(self.max_features, d)
        n_total = len(y)

        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(rows, depth):
            counts = np.bincount(y[rows], minlength=n_classes)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(int(np.argmax(counts)))
            return len(feature) - 1, counts

        heap = []
        counter = 0

        def consider(node, rows, depth, counts):
            nonlocal counter
            if self.max_depth is not None and depth >= self.max_depth:
                return
            impurity = gini(counts)
            if impurity == 0.0 or len(rows) < 2:
                return
            feats = np.arange(d) if k == d else np.sort(rng.choice(d, size=k, replace=False))
            split = best_split(X[rows], y[rows], n_classes, feats)
            if split is None:
                return
            child_imp, f, thr = split
            gain = len(rows) / n_total * (impurity - child_imp)
            heapq.heappush(heap, (-gain, counter, node, rows, depth, f, thr))
            counter += 1

        root_rows = np.arange(n_total)
        root, counts = new_node(root_rows, 0)
        consider(root, root_rows, 0, counts)
        leaves = 1
        while heap and (self.max_leaves is None or leaves < self.max_leaves):
            _, _, node, rows, depth, f, thr = heapq.heappop(heap)
            mask = X[rows, f] <= thr
            feature[node], threshold[node] = f, thr
            for side, child_rows in (("l", rows[mask]), ("r", rows[~mask])):
                child, c = new_node(child_rows, depth + 1)
                if side == "l":
                    left[node] = child
                else:
                    right[node] = child
                consider(child, child_rows, depth + 1, c)
            leaves += 1

        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold, dtype=float)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.value = np.array(value, dtype=np.int64)
        return self

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))

    @property
    def depth(self) -> int:
        def rec(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(rec(self.left[i]), rec(self.right[i]))
        return rec(0)

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def split_features(self) -> list[int]:
        """Split features in depth-first (pre-order) traversal order."""
        out = []

        def rec(i):
            if self.feature[i] >= 0:
                out.append(int(self.feature[i]))
                rec(self.left[i])
                rec(self.right[i])
        rec(0)
        return out

    def get_params(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_params(cls, params: dict) -> "DecisionTree":
        tree = cls()
        tree.feature = np.array(params["feature"], dtype=np.int64)
        tree.threshold = np.array(params["threshold"], dtype=float)
        tree.left = np.array(params["left"], dtype=np.int64)
        tree.right = np.array(params["right"], dtype=np.int64)
        tree.value = np.array(params["value"], dtype=np.int64)
        return tree


class RandomForest:
    def __init__(self, n_trees=50, max_depth=None, max_leaves=None,
                 features_per_split=None, bootstrap=True):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_leaves = max_leaves
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.trees: list[DecisionTree] = []
        self.n_classes = 0

    def fit(self, X, y, n_classes: int, rng):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        k = self.features_per_split or max(1, int(math.floor(math.sqrt(d))))
        self.n_classes = n_classes
        self.trees = []
        for _ in range(self.n_trees):
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.max_depth, self.max_leaves, k)
            self.trees.append(tree.fit(X[rows], y[rows], n_classes, rng))
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        votes = np.zeros((len(X), self.n_classes), dtype=np.int64)
        for tree in self.trees:
            np.add.at(votes, (np.arange(len(X)), tree.predict(X)), 1)
        return votes.argmax(axis=1)

    def get_params(self) -> dict:
        return {"n_classes": self.n_classes, "trees": [t.get_params() for t in self.trees]}

    @classmethod
    def from_params(cls, params: dict) -> "RandomForest":
        forest = cls(n_trees=len(params["trees"]))
        forest.n_classes = params["n_classes"]
        forest.trees = [DecisionTree.from_params(t) for t in params["trees"]]
        return forest
