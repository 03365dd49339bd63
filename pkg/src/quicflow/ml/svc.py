"""Soft-margin support vector classifier trained with Platt's SMO."""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def kernel_matrix(A, B, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def scale_gamma(X) -> float:
    var = float(np.var(X))
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


class SVC:
    """Binary SVC.  The decision function is sum(alpha_i t_i K(x_i, x)) - b
    with t = +1 for the larger class index; a zero decision goes to the
    smaller class index."""

    def __init__(self, kernel="rbf", gamma="scale", c=1.0, max_iter=200, tol=1e-3):
        self.kernel = kernel
        self.gamma = gamma
        self.c = c
        self.max_iter = max_iter
        self.tol = tol
        self.support = None
        self.coef = None
        self.b = 0.0
        self.gamma_ = None
        self.passes = 0

    def fit(self, X, y, n_classes: int, rng):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError("SVC is binary; training data must hold exactly two classes")
        self.classes_ = classes
        t = np.where(y == classes[1], 1.0, -1.0)
        self.gamma_ = scale_gamma(X) if self.gamma == "scale" else float(self.gamma)
        K = kernel_matrix(X, X, self.kernel, self.gamma_)
        n = len(t)
        C, tol = self.c, self.tol
        alpha = np.zeros(n)
        b = 0.0
        E = -t.copy()  # u - t with u = 0 initially

        def take_step(i1, i2):
            nonlocal b
            if i1 == i2:
                return False
            a1, a2 = alpha[i1], alpha[i2]
            y1, y2 = t[i1], t[i2]
            E1, E2 = E[i1], E[i2]
            s = y1 * y2
            if s < 0:
                L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
            else:
                L, H = max(0.0, a2 + a1 - C), min(C, a2 + a1)
            if L >= H:
                return False
            k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
            eta = k11 + k22 - 2 * k12
            if eta > _EPS:
                a2n = min(H, max(L, a2 + y2 * (E1 - E2) / eta))
            else:
                # objective at the segment ends
                f1 = y1 * (E1 + b) - a1 * k11 - s * a2 * k12
                f2 = y2 * (E2 + b) - s * a1 * k12 - a2 * k22
                L1 = a1 + s * (a2 - L)
                H1 = a1 + s * (a2 - H)
                obj_l = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + s * L * L1 * k12
                obj_h = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + s * H * H1 * k12
                if obj_l < obj_h - 1e-3:
                    a2n = L
                elif obj_l > obj_h + 1e-3:
                    a2n = H
                else:
                    a2n = a2
            if abs(a2n - a2) < 1e-3 * (a2n + a2 + 1e-3):
                return False
            a1n = a1 + s * (a2 - a2n)
            if a1n < 0:
                a2n += s * a1n
                a1n = 0.0
            elif a1n > C:
                a2n += s * (a1n - C)
                a1n = C
            d1, d2 = y1 * (a1n - a1), y2 * (a2n - a2)
            b1 = E1 + d1 * k11 + d2 * k12 + b
            b2 = E2 + d1 * k12 + d2 * k22 + b
            if 0 < a1n < C:
                bn = b1
            elif 0 < a2n < C:
                bn = b2
            else:
                bn = (b1 + b2) / 2
            E[:] += d1 * K[i1] + d2 * K[i2] - (bn - b)
            b = bn
            alpha[i1], alpha[i2] = a1n, a2n
            return True

        def examine(i2):
            y2, a2, E2 = t[i2], alpha[i2], E[i2]
            r2 = E2 * y2
            if not ((r2 < -tol and a2 < C) or (r2 > tol and a2 > 0)):
                return 0
            free = np.flatnonzero((alpha > 0) & (alpha < C))
            if free.size > 1:
                i1 = int(free[np.argmax(np.abs(E[free] - E2))])
                if take_step(i1, i2):
                    return 1
            for i1 in np.roll(free, -int(rng.integers(free.size))) if free.size else ():
                if take_step(int(i1), i2):
                    return 1
            for i1 in np.roll(np.arange(n), -int(rng.integers(n))):
                if take_step(int(i1), i2):
                    return 1
            return 0

        changed, examine_all, passes = 0, True, 0
        while (changed > 0 or examine_all) and passes < self.max_iter:
            idx = range(n) if examine_all else np.flatnonzero((alpha > 0) & (alpha < C))
            changed = sum(examine(int(i)) for i in idx)
            if examine_all:
                examine_all = False
            elif changed == 0:
                examine_all = True
            passes += 1
        self.passes = passes
        keep = alpha > 0
        self.support = X[keep]
        self.coef = alpha[keep] * t[keep]
        self.b = float(b)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.support.shape[0] == 0:
            return np.full(len(X), -self.b)
        return kernel_matrix(X, self.support, self.kernel, self.gamma_) @ self.coef - self.b

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, self.classes_[1], self.classes_[0])

    def get_params(self) -> dict:
        return {
            "kernel": self.kernel,
            "gamma": self.gamma_,
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
            "b": self.b,
            "classes": self.classes_.tolist(),
            "n_features": int(self.support.shape[1]),
        }

    @classmethod
    def from_params(cls, params: dict) -> "SVC":
        model = cls(kernel=params["kernel"])
        model.gamma_ = params["gamma"]
        model.coef = np.array(params["coef"], dtype=float)
        model.support = np.array(params["support"], dtype=float).reshape(model.coef.size, params["n_features"])
        model.b = params["b"]
        model.classes_ = np.array(params["classes"], dtype=np.int64)
        return model
