from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from ..data import N_FEATURES, Dataset, Transaction
from ..errors import InputError, ParameterError

THRESHOLD = 0.5
FORMAT_VERSION = 1


class Kind(str, Enum):
    LOG = "LOG"
    SVC = "SVC"
    RF = "RF"
    GNB = "GNB"
    KNN = "KNN"


class Penalty(str, Enum):
    L1 = "l1"
    L2 = "l2"


# KNN is the control model; GNB ended up playing the same role.
CONTROL_KINDS = frozenset({Kind.KNN, Kind.GNB})


@dataclass(frozen=True)
class ClassifierSpec:
    kind: Kind
    penalty: Penalty = Penalty.L2
    c_value: float = 1.0
    trees: int = 10
    k: int = 5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        penalty = self.penalty if isinstance(self.penalty, Penalty) else str(self.penalty).lower()
        object.__setattr__(self, "penalty", Penalty(penalty))
        if not self.c_value > 0:
            raise ParameterError(f"c_value must be positive, got {self.c_value}")
        if self.trees < 1 or self.k < 1:
            raise ParameterError("trees and k must be >= 1")

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return ClassifierSpec(self.kind, self.penalty, self.c_value, self.trees, self.k, seed)

    @property
    def label(self) -> str:
        if self.kind in (Kind.LOG, Kind.SVC):
            return f"{self.kind.value}({self.penalty.value},{self.c_value:g})"
        if self.kind is Kind.RF:
            return f"RF({self.trees})"
        if self.kind is Kind.KNN:
            return f"KNN({self.k})"
        return "GNB"

    @property
    def hyperparameters(self) -> dict:
        """The hyperparameters that matter for this kind (seed excluded)."""
        if self.kind in (Kind.LOG, Kind.SVC):
            return {"penalty": self.penalty.value, "c": self.c_value}
        if self.kind is Kind.RF:
            return {"trees": self.trees}
        if self.kind is Kind.KNN:
            return {"k": self.k}
        return {}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["penalty"] = self.penalty.value
        return d


@dataclass(frozen=True)
class Prediction:
    score: float

    @property
    def label(self) -> bool:
        return self.score >= THRESHOLD


def as_matrix(records) -> np.ndarray:
    """Feature matrix of a Dataset, a Transaction sequence, or an (n, 28) array."""
    if isinstance(records, Dataset):
        return records.features
    if isinstance(records, np.ndarray):
        X = records.reshape(-1, N_FEATURES) if records.ndim == 1 else records
    else:
        records = list(records)
        if not records:
            return np.empty((0, N_FEATURES))
        for i, r in enumerate(records):
            if not isinstance(r, Transaction):
                raise InputError(f"record {i} is not a Transaction", index=i)
        X = np.stack([r.features for r in records])
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1:] != (N_FEATURES,):
        raise InputError(f"expected {N_FEATURES} features, got shape {X.shape}")
    bad = np.flatnonzero(~np.all(np.isfinite(X), axis=1))
    if bad.size:
        raise InputError(f"non-finite feature in record {bad[0]}", index=int(bad[0]))
    return X


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def __call__(self, X):
        return (X - self.mean) / self.scale


class TrainedModel:
    """Common surface of the fitted classifiers.

    Subclasses implement :meth:`scores`, mapping an (n, 28) matrix to fraud
    scores in [0, 1], and the ``_params``/``_from_params`` pair used for JSON
    round-trips.
    """

    spec: ClassifierSpec

    @property
    def kind(self) -> Kind:
        return self.spec.kind

    def scores(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _params(self) -> dict:
        raise NotImplementedError

    @classmethod
    def _from_params(cls, spec, params):
        raise NotImplementedError

    def to_dict(self) -> dict:
        params = {}
        for name, value in self._params().items():
            params[name] = value.tolist() if isinstance(value, np.ndarray) else value
        return {
            "format": "fraudbench-model",
            "version": FORMAT_VERSION,
            "kind": self.kind.value,
            "spec": self.spec.to_dict(),
            "params": params,
        }
