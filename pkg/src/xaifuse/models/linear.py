"""L2-regularized logistic regression fit by Newton iterations.

Binary problems use a single IRLS solve; multiclass trains one-vs-rest and
normalizes the per-class sigmoids. class_weight="balanced" reweights rows by
n / (n_classes * count(class)) so minority classes pull their weight.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class LogisticRegression:
    def __init__(
        self,
        c: float = 1.0,
        max_iter: int = 1000,
        tol: float = 1e-8,
        class_weight: str | None = "balanced",
    ):
        if c <= 0:
            raise ValueError("c must be positive")
        if class_weight not in (None, "balanced"):
            raise ValueError("class_weight must be None or 'balanced'")
        self.c = c
        self.max_iter = max_iter
        self.tol = tol
        self.class_weight = class_weight

    def fit(self, X, y) -> "LogisticRegression":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_, yi = np.unique(y, return_inverse=True)
        n, p = X.shape
        k = len(self.classes_)
        if k < 2:
            raise ValueError("need at least two classes")

        if self.class_weight == "balanced":
            counts = np.bincount(yi, minlength=k)
            w_class = n / (k * counts.astype(np.float64))
            row_w = w_class[yi]
        else:
            row_w = np.ones(n)

        n_models = 1 if k == 2 else k
        self.coef_ = np.zeros((n_models, p))
        self.intercept_ = np.zeros(n_models)
        xb = np.column_stack([X, np.ones(n)])
        lam = 1.0 / self.c
        for m in range(n_models):
            target = (yi == (1 if k == 2 else m)).astype(np.float64)
            beta = self._irls(xb, target, row_w, lam, p)
            self.coef_[m] = beta[:p]
            self.intercept_[m] = beta[p]
        return self

    def _irls(
        self, xb: np.ndarray, t: np.ndarray, row_w: np.ndarray, lam: float, p: int
    ) -> np.ndarray:
        beta = np.zeros(xb.shape[1])
        # intercept is not penalized
        reg = np.full(xb.shape[1], lam)
        reg[p] = 0.0
        for _ in range(self.max_iter):
            z = xb @ beta
            mu = _sigmoid(z)
            grad = xb.T @ (row_w * (mu - t)) + reg * beta
            s = row_w * mu * (1.0 - mu)
            h = (xb * s[:, None]).T @ xb + np.diag(reg)
            # separable data drives the hessian singular; ridge the solve
            h[np.diag_indices_from(h)] += 1e-10
            step = np.linalg.solve(h, grad)
            beta = beta - step
            if np.max(np.abs(step)) < self.tol:
                break
        return beta

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        scores = X @ self.coef_.T + self.intercept_
        return scores[:, 0] if scores.shape[1] == 1 else scores

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        z = X @ self.coef_.T + self.intercept_
        if len(self.classes_) == 2:
            p1 = _sigmoid(z[:, 0])
            return np.column_stack([1.0 - p1, p1])
        raw = _sigmoid(z)
        total = raw.sum(axis=1, keepdims=True)
        total[total == 0] = 1.0
        return raw / total

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
