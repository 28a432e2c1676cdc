from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .base import ClassifierSpec, Standardizer, TrainedModel

_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class KNNModel(TrainedModel):
    """k-nearest-neighbor vote over the standardized training sample (Euclidean)."""

    spec: ClassifierSpec
    standardizer: Standardizer
    points: np.ndarray
    labels: np.ndarray

    @classmethod
    def fit(cls, spec, X, y):
        if spec.k > len(X):
            raise ParameterError(f"k={spec.k} exceeds the {len(X)} training records")
        st = Standardizer.fit(X)
        return cls(spec, st, st(X), np.asarray(y, dtype=bool))

    def neighbors(self, X) -> np.ndarray:
        """Indices of the k nearest training points per row, nearest first, ties to lower index."""
        Z = self.standardizer(X)
        k = self.spec.k
        out = np.empty((len(Z), k), dtype=np.int64)
        for start in range(0, len(Z), _CHUNK):
            block = Z[start : start + _CHUNK]
            d = ((block[:, None, :] - self.points[None, :, :]) ** 2).sum(axis=2)
            out[start : start + len(block)] = np.argsort(d, axis=1, kind="stable")[:, :k]
        return out

    def scores(self, X):
        if len(X) == 0:
            return np.empty(0)
        return self.labels[self.neighbors(X)].sum(axis=1) / self.spec.k

    def _params(self):
        return {
            "mean": self.standardizer.mean,
            "scale": self.standardizer.scale,
            "points": self.points,
            "labels": self.labels.astype(int),
        }

    @classmethod
    def _from_params(cls, spec, p):
        st = Standardizer(np.asarray(p["mean"]), np.asarray(p["scale"]))
        return cls(spec, st, np.asarray(p["points"], dtype=np.float64), np.asarray(p["labels"], dtype=bool))
