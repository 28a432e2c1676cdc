"""Random forest of unpruned CART trees (Gini splits, bootstrap rows, sqrt(d) features per node)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import THRESHOLD, ClassifierSpec, TrainedModel

LEAF = -1


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat array tree. Node 0 is the root; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # fraud fraction of the training rows reaching the node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_values(self, X) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f != LEAF
            if not inner.any():
                return self.value[node]
            go_left = X[rows, np.where(inner, f, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def votes(self, X) -> np.ndarray:
        return self.leaf_values(X) >= THRESHOLD


def _best_split(X, y, features):
    """Lowest weighted Gini split over ``features``; None if no feature separates the rows."""
    n = len(y)
    best = None
    for f in features:
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs, ys = x[order], y[order]
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if valid.size == 0:
            continue
        n_left = valid + 1.0
        pos_left = np.cumsum(ys)[valid]
        pos_total = ys.sum()
        n_right = n - n_left
        p_left = pos_left / n_left
        p_right = (pos_total - pos_left) / n_right
        impurity = n_left * p_left * (1 - p_left) + n_right * p_right * (1 - p_right)
        i = int(np.argmin(impurity))
        if best is None or impurity[i] < best[0]:
            lo, hi = xs[valid[i]], xs[valid[i] + 1]
            thr = lo + (hi - lo) / 2
            if not lo <= thr < hi:
                thr = lo
            best = (impurity[i], f, thr)
    return best


def grow_tree(X, y, rng, max_features) -> Tree:
    """Grow a tree to purity (or until rows are indistinguishable)."""
    y = y.astype(np.float64)
    d = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        yi = y[idx]
        if yi.min() == yi.max():
            continue
        Xi = X[idx]
        # draw max_features candidates; keep drawing only if none of them can split
        perm = rng.permutation(d)
        split = _best_split(Xi, yi, perm[:max_features])
        if split is None:
            split = _best_split(Xi, yi, perm[max_features:])
        if split is None:
            continue
        _, f, thr = split
        mask = Xi[:, f] <= thr
        feature[node] = int(f)
        threshold[node] = float(thr)
        li, ri = idx[mask], idx[~mask]
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value),
    )


@dataclass(frozen=True, eq=False)
class ForestModel(TrainedModel):
    spec: ClassifierSpec
    trees: tuple

    @classmethod
    def fit(cls, spec, X, y):
        rng = np.random.default_rng(spec.seed)
        n, d = X.shape
        max_features = max(1, int(math.sqrt(d)))
        trees = []
        for _ in range(spec.trees):
            boot = rng.integers(0, n, size=n)
            trees.append(grow_tree(X[boot], y[boot], rng, max_features))
        return cls(spec, tuple(trees))

    def scores(self, X):
        votes = np.zeros(len(X))
        for t in self.trees:
            votes += t.votes(X)
        return votes / len(self.trees)

    def _params(self):
        return {
            "trees": [
                {name: getattr(t, name).tolist() for name in ("feature", "threshold", "left", "right", "value")}
                for t in self.trees
            ]
        }

    @classmethod
    def _from_params(cls, spec, p):
        trees = tuple(
            Tree(
                np.asarray(t["feature"], dtype=np.int64),
                np.asarray(t["threshold"], dtype=np.float64),
                np.asarray(t["left"], dtype=np.int64),
                np.asarray(t["right"], dtype=np.int64),
                np.asarray(t["value"], dtype=np.float64),
            )
            for t in p["trees"]
        )
        return cls(spec, trees)
