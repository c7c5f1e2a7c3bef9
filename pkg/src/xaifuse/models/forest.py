"""Bagged ensemble of decision trees.

Randomness is bootstrap resampling only; every tree sees all features, so a
single-tree forest without bootstrap is exactly the base tree. Per-tree
seeds derive from (seed, "tree", index), making results independent of
build order.
"""

from __future__ import annotations

import numpy as np

from ..seeding import rng_for
from .tree import DecisionTree


class RandomForest:
    def __init__(
        self,
        n_estimators: int = 100,
        max_depth: int = 50,
        min_samples_leaf: int = 1,
        min_samples_split: int = 2,
        bootstrap: bool = True,
        seed: int = 0,
    ):
        if n_estimators < 1:
            raise ValueError("n_estimators must be positive")
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_samples_split = min_samples_split
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        n = X.shape[0]
        self.classes_ = np.unique(y)
        self.trees_ = []
        for t in range(self.n_estimators):
            if self.bootstrap:
                idx = rng_for(self.seed, "tree", t).integers(0, n, size=n)
                xt, yt = X[idx], y[idx]
            else:
                xt, yt = X, y
            tree = DecisionTree(
                criterion="gini",
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                min_samples_split=self.min_samples_split,
            ).fit(xt, yt)
            self.trees_.append(tree)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros((X.shape[0], len(self.classes_)))
        for tree in self.trees_:
            # bootstrap samples can miss rare classes; align by label
            cols = np.searchsorted(self.classes_, tree.classes_)
            out[:, cols] += tree.predict_proba(X)
        return out / len(self.trees_)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
