"""Rebalanced training samples: simple random, undersampling and SMOTE.

Every sampler draws from a pool (normally the sample pool of a
:class:`~fraudbench.data.Partition`) and returns the real records it did not
use as ``leftover`` so they can be routed to the evaluation set.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset, Transaction, write_dataset
from .errors import InfeasibleRatioError, InsufficientMinorityError, ParameterError


class Method(str, Enum):
    SIMPLE = "simple"
    UNDERSAMPLE = "undersample"
    SMOTE = "smote"


@dataclass(frozen=True)
class SampleSpec:
    method: Method
    fraud_ratio: float = 0.5
    target_size: int = 0
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.method is not Method.SIMPLE and not 0 < self.fraud_ratio < 1:
            raise ParameterError(f"fraud_ratio must lie in (0, 1), got {self.fraud_ratio}")
        if self.method is Method.SMOTE:
            if self.k_neighbors < 1:
                raise ParameterError("k_neighbors must be >= 1")
            if self.target_size < 1:
                raise ParameterError("SMOTE needs a positive target_size")

    def with_seed(self, seed: int) -> "SampleSpec":
        return SampleSpec(self.method, self.fraud_ratio, self.target_size, self.k_neighbors, seed)

    @property
    def label(self) -> str:
        if self.method is Method.UNDERSAMPLE:
            return f"under(r={self.fraud_ratio:g})"
        if self.method is Method.SMOTE:
            return f"smote(n={self.target_size},r={self.fraud_ratio:g})"
        return f"simple(n={self.target_size})"


@dataclass(frozen=True)
class Sample:
    records: Dataset
    leftover: Dataset

    @property
    def synthetic_flags(self) -> np.ndarray:
        return self.records.synthetic

    @property
    def achieved_ratio(self) -> float:
        return self.records.fraud_rate

    def __len__(self):
        return len(self.records)


def _check_ratio(fraud_ratio):
    if not 0 < fraud_ratio < 1:
        raise ParameterError(f"fraud_ratio must lie in (0, 1), got {fraud_ratio}")


def majority_count(n_fraud: int, fraud_ratio: float) -> int:
    """Clean records needed next to ``n_fraud`` fraud records to hit ``fraud_ratio``."""
    return int(round(n_fraud * (1 - fraud_ratio) / fraud_ratio))


def _split_sample(pool: Dataset, chosen: np.ndarray) -> Sample:
    mask = np.zeros(len(pool), dtype=bool)
    mask[chosen] = True
    return Sample(pool.take(np.flatnonzero(mask)), pool.take(np.flatnonzero(~mask)))


def undersample(pool: Dataset, fraud_ratio: float, seed: int) -> Sample:
    """Keep every fraud record and just enough random clean records for ``fraud_ratio``."""
    _check_ratio(fraud_ratio)
    fraud_idx = np.flatnonzero(pool.label)
    clean_idx = np.flatnonzero(~pool.label)
    if fraud_idx.size == 0:
        raise ParameterError("pool contains no fraud records")
    m = majority_count(fraud_idx.size, fraud_ratio)
    if m > clean_idx.size:
        raise InfeasibleRatioError(
            f"ratio {fraud_ratio} needs {m} clean records, pool has {clean_idx.size}"
        )
    rng = np.random.default_rng(seed)
    picked = rng.choice(clean_idx, size=m, replace=False)
    return _split_sample(pool, np.concatenate([fraud_idx, picked]))


def simple_sample(pool: Dataset, target_size: int, seed: int) -> Sample:
    if not 0 <= target_size <= len(pool):
        raise ParameterError(f"target_size {target_size} outside [0, {len(pool)}]")
    rng = np.random.default_rng(seed)
    return _split_sample(pool, rng.choice(len(pool), size=target_size, replace=False))


def neighbor_space(features: np.ndarray, amount: np.ndarray) -> np.ndarray:
    """Coordinates used for minority neighbor search: V1..V28 plus z-scored amount."""
    sd = amount.std()
    z = (amount - amount.mean()) / (sd if sd > 0 else 1.0)
    return np.column_stack([features, z])


def _nearest(points: np.ndarray, query: np.ndarray, k: int, exclude=None) -> np.ndarray:
    # exact squared distances so that equal points tie exactly; ties go to the lower index
    d = ((points - query) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(len(points)), d))
    if exclude is not None:
        order = order[order != exclude]
    return order[:k]


def knn_minority(record: Transaction, minority, k: int) -> list[Transaction]:
    """The ``k`` minority records closest to ``record``.

    Distances use the 28 features and the amount standardized over
    ``minority``; ties resolve to the earlier record.
    """
    minority = minority if isinstance(minority, Dataset) else Dataset.from_records(minority)
    if not 1 <= k <= len(minority):
        raise ParameterError(f"k={k} must lie in [1, {len(minority)}]")
    sd = minority.amount.std()
    mu = minority.amount.mean()
    sd = sd if sd > 0 else 1.0
    points = np.column_stack([minority.features, (minority.amount - mu) / sd])
    query = np.append(record.features, (record.amount - mu) / sd)
    return [minority[i] for i in _nearest(points, query, k)]


def neighbor_table(minority: Dataset, k: int) -> np.ndarray:
    """Row i lists the k nearest other minority records of record i."""
    if not 1 <= k < len(minority):
        raise InsufficientMinorityError(
            f"k={k} neighbors need at least {k + 1} minority records, got {len(minority)}"
        )
    pts = neighbor_space(minority.features, minority.amount)
    return np.stack([_nearest(pts, pts[i], k, exclude=i) for i in range(len(pts))])


def smote_synthesize(origin: Transaction, neighbor: Transaction, c: float) -> Transaction:
    """Synthetic fraud record on the segment from ``origin`` towards ``neighbor``."""
    return Transaction(
        origin.features + c * (neighbor.features - origin.features),
        origin.time + c * (neighbor.time - origin.time),
        origin.amount + c * (neighbor.amount - origin.amount),
        True,
        synthetic=True,
    )


def _interpolate(a, b, c):
    return a + c * (b - a)


def smote_sample(pool: Dataset, spec: SampleSpec) -> Sample:
    """SMOTE sample of ``spec.target_size`` records at ``spec.fraud_ratio``.

    All real fraud records are kept and synthetic ones are added until the
    fraud count reaches ``round(target_size * fraud_ratio)``; the rest is clean
    records drawn without replacement. When the pool already holds more fraud
    than that, nothing is synthesized and the clean draw is sized to keep the
    requested ratio instead.
    """
    if spec.method is not Method.SMOTE:
        raise ParameterError(f"spec method is {spec.method.value}, not smote")
    fraud_idx = np.flatnonzero(pool.label)
    clean_idx = np.flatnonzero(~pool.label)
    k = spec.k_neighbors
    if fraud_idx.size < k + 1:
        raise InsufficientMinorityError(
            f"SMOTE with k={k} needs {k + 1} fraud records, pool has {fraud_idx.size}"
        )
    n_fraud = int(round(spec.target_size * spec.fraud_ratio))
    if n_fraud <= fraud_idx.size:
        n_synth = 0
        n_clean = max(spec.target_size - n_fraud, majority_count(fraud_idx.size, spec.fraud_ratio))
    else:
        n_synth = n_fraud - fraud_idx.size
        n_clean = spec.target_size - n_fraud
    if n_clean > clean_idx.size:
        raise InfeasibleRatioError(
            f"{spec.label} needs {n_clean} clean records, pool has {clean_idx.size}"
        )

    rng = np.random.default_rng(spec.seed)
    picked = rng.choice(clean_idx, size=n_clean, replace=False)
    base = _split_sample(pool, np.concatenate([fraud_idx, picked]))
    if n_synth == 0:
        return base

    synth, _, _ = smote_records(pool.take(fraud_idx), k, n_synth, rng)
    return Sample(Dataset.concat([base.records, synth]), base.leftover)


def smote_records(minority: Dataset, k: int, n: int, rng):
    """Draw ``n`` synthetic fraud records from ``minority``.

    Each one picks a uniform origin, a uniform one of its ``k`` neighbors and a
    fresh ``c ~ U(0, 1)``. Returns the records plus the origin and neighbor
    positions within ``minority``.
    """
    table = neighbor_table(minority, k)
    origin = rng.integers(0, len(minority), size=n)
    neighbor = table[origin, rng.integers(0, k, size=n)]
    c = rng.random(n)
    synth = Dataset(
        _interpolate(minority.features[origin], minority.features[neighbor], c[:, None]),
        _interpolate(minority.time[origin], minority.time[neighbor], c),
        _interpolate(minority.amount[origin], minority.amount[neighbor], c),
        np.ones(n, dtype=bool),
        np.full(n, -1),
        np.ones(n, dtype=bool),
    )
    return synth, origin, neighbor


def build_sample(pool: Dataset, spec: SampleSpec) -> Sample:
    if spec.method is Method.UNDERSAMPLE:
        return undersample(pool, spec.fraud_ratio, spec.seed)
    if spec.method is Method.SMOTE:
        return smote_sample(pool, spec)
    return simple_sample(pool, spec.target_size, spec.seed)


def dump_sample(sample: Sample, path) -> None:
    """Debug dump of a sample's records with an extra ``Synthetic`` column."""
    write_dataset(sample.records, path, synthetic_column=True)
