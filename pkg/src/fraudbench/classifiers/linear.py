"""Regularized linear classifiers (logistic and squared-hinge) fitted by proximal gradient.

Both minimize ``sum_i loss(y_i, x_i.w + b) + R(w) / C`` over standardized
features, where ``R`` is ``||w||_1`` or ``||w||^2 / 2``. The intercept is not
penalized.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import ConvergenceWarning
from .base import ClassifierSpec, Kind, Penalty, Standardizer, TrainedModel

MAX_ITER = 5000
TOL = 1e-6


def smooth_loss(kind: Kind, X, signs, w, b):
    """Data loss and its gradient with respect to (w, b); ``signs`` are +-1."""
    margin = signs * (X @ w + b)
    if kind is Kind.LOG:
        loss = np.logaddexp(0.0, -margin).sum()
        dz = -signs * expit(-margin)
    else:
        h = np.maximum(0.0, 1.0 - margin)
        loss = (h * h).sum()
        dz = -2.0 * signs * h
    return loss, X.T @ dz, dz.sum()


def penalty_value(penalty: Penalty, w) -> float:
    if penalty is Penalty.L1:
        return float(np.abs(w).sum())
    return 0.5 * float(w @ w)


def objective(kind, penalty, lam, X, signs, w, b) -> float:
    return smooth_loss(kind, X, signs, w, b)[0] + lam * penalty_value(penalty, w)


def _prox(penalty, w, step, lam):
    if penalty is Penalty.L1:
        return np.sign(w) * np.maximum(np.abs(w) - step * lam, 0.0)
    return w / (1.0 + step * lam)


def optimality_residual(penalty, lam, gw, gb, w) -> float:
    """Norm of the minimum-norm subgradient of the full objective."""
    if penalty is Penalty.L2:
        rw = gw + lam * w
    else:
        rw = np.where(w != 0, gw + lam * np.sign(w), np.maximum(np.abs(gw) - lam, 0.0))
    return float(np.sqrt(rw @ rw + gb * gb))


@dataclass
class SolverResult:
    w: np.ndarray
    b: float
    iterations: int
    converged: bool
    residual: float
    history: list = field(default_factory=list)


def fit_linear(kind, penalty, c_value, X, y, max_iter=MAX_ITER, tol=TOL) -> SolverResult:
    """Proximal gradient with backtracking and Barzilai-Borwein trial steps.

    Converged when the optimality residual drops to ``tol`` relative to the
    residual at the zero start (or to ``tol`` absolutely if that is below 1).
    """
    penalty = Penalty(penalty)
    lam = 1.0 / c_value
    signs = np.where(y, 1.0, -1.0)
    d = X.shape[1]
    w, b = np.zeros(d), 0.0
    f, gw, gb = smooth_loss(kind, X, signs, w, b)
    scale = max(1.0, optimality_residual(penalty, lam, gw, gb, w))
    # 1/L from a Frobenius bound on the curvature of the data term
    curvature = 0.25 if kind is Kind.LOG else 2.0
    step = 1.0 / (curvature * (np.sum(X * X) + X.shape[0]) + 1e-12)
    best = (f + lam * penalty_value(penalty, w), w, b)
    residual = np.inf
    for it in range(1, max_iter + 1):
        while True:
            w_new = _prox(penalty, w - step * gw, step, lam)
            b_new = b - step * gb
            dw, db = w_new - w, b_new - b
            f_new, gw_new, gb_new = smooth_loss(kind, X, signs, w_new, b_new)
            sq = dw @ dw + db * db
            if f_new <= f + gw @ dw + gb * db + sq / (2 * step) + 1e-12 * abs(f) or step < 1e-20:
                break
            step *= 0.5
        residual = optimality_residual(penalty, lam, gw_new, gb_new, w_new)
        obj = f_new + lam * penalty_value(penalty, w_new)
        if obj <= best[0]:
            best = (obj, w_new, b_new)
        sy = dw @ (gw_new - gw) + db * (gb_new - gb)
        w, b, f, gw, gb = w_new, b_new, f_new, gw_new, gb_new
        if residual <= tol * scale:
            return SolverResult(w, float(b), it, True, residual)
        if sq == 0:
            break
        # Barzilai-Borwein guess for the next trial step; backtracking keeps it safe
        step = sq / sy if sy > 0 else step * 2.0
    warnings.warn(
        f"{kind.value} solver stopped after {it} iterations (residual {residual:.3g})",
        ConvergenceWarning,
        stacklevel=3,
    )
    _, w, b = best
    return SolverResult(w, float(b), it, False, residual)


@dataclass(frozen=True, eq=False)
class LinearModel(TrainedModel):
    spec: ClassifierSpec
    standardizer: Standardizer
    weights: np.ndarray
    bias: float
    converged: bool = True
    iterations: int = 0

    @classmethod
    def fit(cls, spec, X, y):
        st = Standardizer.fit(X)
        res = fit_linear(spec.kind, spec.penalty, spec.c_value, st(X), y)
        return cls(spec, st, res.w, res.b, res.converged, res.iterations)

    def decision(self, X) -> np.ndarray:
        # row-wise reduction so a record scores the same alone or in a batch
        return (self.standardizer(X) * self.weights).sum(axis=1) + self.bias

    def scores(self, X):
        # for SVC this is a fixed-slope sigmoid of the margin, not a calibrated probability
        return expit(self.decision(X))

    def _params(self):
        return {
            "mean": self.standardizer.mean,
            "scale": self.standardizer.scale,
            "weights": self.weights,
            "bias": self.bias,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    @classmethod
    def _from_params(cls, spec, p):
        st = Standardizer(np.asarray(p["mean"]), np.asarray(p["scale"]))
        return cls(spec, st, np.asarray(p["weights"]), float(p["bias"]), bool(p["converged"]), int(p["iterations"]))
