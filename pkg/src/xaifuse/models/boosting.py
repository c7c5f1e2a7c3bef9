"""Boosted tree ensembles: real-valued adaptive boosting and gradient boosting.

AdaBoost follows the real (probability-based) variant: each round fits a
weighted tree, adds the symmetrized log-probability vote, and reweights rows
by the coded-label margin. A round that classifies the weighted sample
perfectly ends training, so a memorizing base tree yields a one-tree
ensemble identical to that tree.

GradientBoosting fits regression trees to logistic-loss residuals and
replaces each leaf's mean with a Newton step (sum of residuals over sum of
hessians). Multiclass trains one booster per class and normalizes.
"""

from __future__ import annotations

import numpy as np

from .tree import DecisionTree

_PROBA_FLOOR = 1e-10


class AdaBoost:
    def __init__(
        self,
        n_estimators: int = 200,
        learning_rate: float = 1.0,
        base_max_depth: int = 50,
        base_min_samples_leaf: int = 1,
    ):
        if n_estimators < 1 or learning_rate <= 0:
            raise ValueError("invalid boosting parameters")
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.base_max_depth = base_max_depth
        self.base_min_samples_leaf = base_min_samples_leaf

    def fit(self, X, y) -> "AdaBoost":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_, yi = np.unique(y, return_inverse=True)
        k = len(self.classes_)
        if k < 2:
            raise ValueError("need at least two classes")
        n = X.shape[0]
        w = np.full(n, 1.0 / n)
        # coded labels: 1 for the true class, -1/(k-1) elsewhere
        coded = np.full((n, k), -1.0 / (k - 1))
        coded[np.arange(n), yi] = 1.0

        self.trees_: list[DecisionTree] = []
        for _ in range(self.n_estimators):
            tree = DecisionTree(
                criterion="gini",
                max_depth=self.base_max_depth,
                min_samples_leaf=self.base_min_samples_leaf,
            ).fit(X, yi, sample_weight=w)
            self.trees_.append(tree)
            proba = tree.predict_proba(X)
            err = float(w @ (np.argmax(proba, axis=1) != yi))
            if err <= 0.0:
                break
            log_p = np.log(np.maximum(proba, _PROBA_FLOOR))
            # weight update uses the margin between coded labels and votes
            w = w * np.exp(
                -self.learning_rate * ((k - 1.0) / k) * (coded * log_p).sum(axis=1)
            )
            total = w.sum()
            if total <= 0 or not np.isfinite(total):
                break
            w /= total
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        k = len(self.classes_)
        votes = np.zeros((X.shape[0], k))
        for tree in self.trees_:
            log_p = np.log(np.maximum(tree.predict_proba(X), _PROBA_FLOOR))
            votes += (k - 1.0) * (log_p - log_p.mean(axis=1, keepdims=True))
        return votes / len(self.trees_)

    def predict_proba(self, X) -> np.ndarray:
        k = len(self.classes_)
        z = self.decision_function(X) / (k - 1.0)
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


class _BinaryBooster:
    """Additive stage list for a single sigmoid output."""

    def __init__(self, n_estimators, learning_rate, max_depth, min_samples_leaf):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X: np.ndarray, y01: np.ndarray) -> "_BinaryBooster":
        pos = y01.mean()
        pos = min(max(pos, 1e-12), 1.0 - 1e-12)
        self.prior_ = float(np.log(pos / (1.0 - pos)))
        f = np.full(X.shape[0], self.prior_)
        self.trees_: list[DecisionTree] = []
        for _ in range(self.n_estimators):
            p = 1.0 / (1.0 + np.exp(-f))
            residual = y01 - p
            tree = DecisionTree(
                criterion="mse",
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
            ).fit(X, residual)
            leaves = tree.apply(X)
            uniq = np.unique(leaves)
            num = np.zeros(tree.node_count)
            den = np.zeros(tree.node_count)
            np.add.at(num, leaves, residual)
            np.add.at(den, leaves, p * (1.0 - p))
            newton = num[uniq] / np.maximum(den[uniq], 1e-12)
            tree.set_leaf_values(uniq, newton)
            self.trees_.append(tree)
            f += self.learning_rate * tree.predict(X)
        return self

    def raw_score(self, X: np.ndarray) -> np.ndarray:
        f = np.full(X.shape[0], self.prior_)
        for tree in self.trees_:
            f += self.learning_rate * tree.predict(X)
        return f


class GradientBoosting:
    def __init__(
        self,
        n_estimators: int = 100,
        learning_rate: float = 0.03,
        max_depth: int = 10,
        min_samples_leaf: int = 1,
    ):
        if n_estimators < 0 or learning_rate < 0:
            raise ValueError("invalid boosting parameters")
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y) -> "GradientBoosting":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_, yi = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        if len(self.classes_) == 2:
            targets = [1]
        else:
            targets = list(range(len(self.classes_)))
        self._boosters = [
            _BinaryBooster(
                self.n_estimators,
                self.learning_rate,
                self.max_depth,
                self.min_samples_leaf,
            ).fit(X, (yi == t).astype(np.float64))
            for t in targets
        ]
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        scores = np.column_stack([b.raw_score(X) for b in self._boosters])
        probs = 1.0 / (1.0 + np.exp(-scores))
        if len(self.classes_) == 2:
            return np.column_stack([1.0 - probs[:, 0], probs[:, 0]])
        total = probs.sum(axis=1, keepdims=True)
        total[total == 0] = 1.0
        return probs / total

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
