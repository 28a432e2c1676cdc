from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .base import ClassifierSpec, TrainedModel

VAR_SMOOTHING = 1e-9


def gaussian_density(x, mu, sigma):
    return np.exp(-((x - mu) ** 2) / (2 * sigma**2)) / (math.sqrt(2 * math.pi) * sigma)


@dataclass(frozen=True, eq=False)
class GaussianNBModel(TrainedModel):
    """Per-class independent Gaussians on the raw features.

    Row 0 of ``means``/``sigmas`` is the clean class, row 1 the fraud class.
    """

    spec: ClassifierSpec
    means: np.ndarray
    sigmas: np.ndarray
    priors: np.ndarray

    @classmethod
    def fit(cls, spec, X, y):
        eps = VAR_SMOOTHING * X.var(axis=0).max()
        means, variances = [], []
        for cls_mask in (~y, y):
            Xc = X[cls_mask]
            means.append(Xc.mean(axis=0))
            variances.append(Xc.var(axis=0) + eps)
        if eps == 0:
            # every feature constant: fall back to unit spread
            variances = [np.where(v > 0, v, 1.0) for v in variances]
        priors = np.array([np.mean(~y), np.mean(y)])
        return cls(spec, np.array(means), np.sqrt(np.array(variances)), priors)

    def log_joint(self, X) -> np.ndarray:
        out = np.empty((len(X), 2))
        for c in range(2):
            mu, sd = self.means[c], self.sigmas[c]
            out[:, c] = (
                math.log(self.priors[c])
                - np.log(math.sqrt(2 * math.pi) * sd).sum()
                - 0.5 * (((X - mu) / sd) ** 2).sum(axis=1)
            )
        return out

    def posteriors(self, X) -> np.ndarray:
        """(n, 2) class posteriors, columns clean then fraud."""
        lj = self.log_joint(X)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def scores(self, X):
        return self.posteriors(X)[:, 1]

    def _params(self):
        return {"means": self.means, "sigmas": self.sigmas, "priors": self.priors}

    @classmethod
    def _from_params(cls, spec, p):
        return cls(spec, np.asarray(p["means"]), np.asarray(p["sigmas"]), np.asarray(p["priors"]))
