"""RBF-kernel support vector classifier trained by sequential minimal optimization.

The dual solve follows the simplified SMO scheme: scan rows for KKT
violations, pair each violator with the row maximizing |E_i - E_j|, and
update the pair analytically. The second choice is an argmax, not a random
draw, so training is deterministic. Total pair updates are capped at
10 * n to bound runtime on hard problems.

Probabilities come from a sigmoid fit to the decision values on the
training set (Platt's regularized targets, Newton solve). Multiclass wraps
one binary machine per class and normalizes the sigmoids.
"""

from __future__ import annotations

import numpy as np


def _rbf(a: np.ndarray, b: np.ndarray, gamma: float, dtype=np.float64) -> np.ndarray:
    d = (a**2).sum(axis=1)[:, None] - 2.0 * (a @ b.T) + (b**2).sum(axis=1)
    np.maximum(d, 0.0, out=d)
    return np.exp(-gamma * d, dtype=dtype)


def _platt_fit(scores: np.ndarray, labels01: np.ndarray) -> tuple[float, float]:
    """Fit p(y=1|f) = sigmoid(a*f + b) by Newton descent on regularized NLL."""
    n_pos = int(labels01.sum())
    n_neg = len(labels01) - n_pos
    t = np.where(labels01 == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 0.0, np.log((n_neg + 1.0) / (n_pos + 1.0))
    for _ in range(100):
        z = a * scores + b
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        g = p - t
        ga = float(g @ scores)
        gb = float(g.sum())
        w = np.maximum(p * (1.0 - p), 1e-12)
        haa = float(w @ (scores**2)) + 1e-12
        hab = float(w @ scores)
        hbb = float(w.sum()) + 1e-12
        det = haa * hbb - hab * hab
        if abs(det) < 1e-18:
            break
        da = (hbb * ga - hab * gb) / det
        db = (haa * gb - hab * ga) / det
        a -= da
        b -= db
        if max(abs(da), abs(db)) < 1e-10:
            break
    return a, b


class _BinarySvm:
    """One machine for labels coded -1/+1."""

    def __init__(self, c: float, gamma: float, tol: float, max_updates: int):
        self.c = c
        self.gamma = gamma
        self.tol = tol
        self.max_updates = max_updates

    def fit(self, X: np.ndarray, y_pm: np.ndarray, gram: np.ndarray) -> "_BinarySvm":
        n = X.shape[0]
        alpha = np.zeros(n)
        b = 0.0
        err = -y_pm.astype(np.float64)  # f(x) - y with f == 0 initially
        updates = 0
        passes_clean = 0
        c, tol = self.c, self.tol
        while passes_clean < 1 and updates < self.max_updates:
            changed = 0
            for i in range(n):
                yi = y_pm[i]
                ei = err[i]
                r = ei * yi
                if not ((r < -tol and alpha[i] < c) or (r > tol and alpha[i] > 0)):
                    continue
                gap = np.abs(err - ei)
                gap[i] = -1.0
                j = int(np.argmax(gap))
                yj = y_pm[j]
                ej = err[j]
                ai_old, aj_old = alpha[i], alpha[j]
                if yi != yj:
                    lo = max(0.0, aj_old - ai_old)
                    hi = min(c, c + aj_old - ai_old)
                else:
                    lo = max(0.0, ai_old + aj_old - c)
                    hi = min(c, ai_old + aj_old)
                if lo >= hi:
                    continue
                eta = 2.0 * gram[i, j] - gram[i, i] - gram[j, j]
                if eta >= 0:
                    continue
                aj = aj_old - yj * (ei - ej) / eta
                aj = min(max(aj, lo), hi)
                if abs(aj - aj_old) < 1e-12:
                    continue
                ai = ai_old + yi * yj * (aj_old - aj)
                alpha[i], alpha[j] = ai, aj
                di = yi * (ai - ai_old)
                dj = yj * (aj - aj_old)
                b1 = b - ei - di * gram[i, i] - dj * gram[i, j]
                b2 = b - ej - di * gram[i, j] - dj * gram[j, j]
                if 0 < ai < c:
                    b_new = b1
                elif 0 < aj < c:
                    b_new = b2
                else:
                    b_new = (b1 + b2) / 2.0
                err += di * gram[i] + dj * gram[j] + (b_new - b)
                b = b_new
                changed += 1
                updates += 1
                if updates >= self.max_updates:
                    break
            passes_clean = passes_clean + 1 if changed == 0 else 0

        sv = alpha > 1e-12
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha[sv] * y_pm[sv]).astype(np.float64)
        self.intercept_ = b
        train_scores = self.decision_function(X, gram_row=gram[:, sv])
        self.platt_a_, self.platt_b_ = _platt_fit(
            train_scores, (y_pm == 1).astype(np.int64)
        )
        return self

    def decision_function(self, X, gram_row: np.ndarray | None = None) -> np.ndarray:
        if gram_row is None:
            gram_row = _rbf(
                np.asarray(X, dtype=np.float64), self.support_vectors_, self.gamma
            )
        return gram_row.astype(np.float64) @ self.dual_coef_ + self.intercept_

    def prob_positive(self, X) -> np.ndarray:
        z = self.platt_a_ * self.decision_function(X) + self.platt_b_
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


class SvmRbf:
    def __init__(
        self,
        c: float = 1.0,
        gamma: float | str = "auto",
        tol: float = 1e-3,
        updates_per_row: int = 10,
    ):
        if c <= 0:
            raise ValueError("c must be positive")
        self.c = c
        self.gamma = gamma
        self.tol = tol
        self.updates_per_row = updates_per_row

    def fit(self, X, y) -> "SvmRbf":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        n, p = X.shape
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        self.gamma_ = 1.0 / p if self.gamma == "auto" else float(self.gamma)
        # the full kernel matrix dominates memory; drop to float32 past 4096 rows
        dtype = np.float64 if n <= 4096 else np.float32
        gram = _rbf(X, X, self.gamma_, dtype=dtype)
        max_updates = self.updates_per_row * n
        # binary needs one machine with the higher label as +1; multiclass
        # gets one machine per class
        if len(self.classes_) == 2:
            targets = [self.classes_[1]]
        else:
            targets = list(self.classes_)
        self._machines = []
        for cls in targets:
            y_pm = np.where(y == cls, 1.0, -1.0)
            machine = _BinarySvm(self.c, self.gamma_, self.tol, max_updates)
            machine.fit(X, y_pm, gram)
            self._machines.append(machine)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        scores = np.column_stack([m.decision_function(X) for m in self._machines])
        return scores[:, 0] if len(self.classes_) == 2 else scores

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if len(self.classes_) == 2:
            p1 = self._machines[0].prob_positive(X)
            return np.column_stack([1.0 - p1, p1])
        raw = np.column_stack([m.prob_positive(X) for m in self._machines])
        total = raw.sum(axis=1, keepdims=True)
        total[total == 0] = 1.0
        return raw / total

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
