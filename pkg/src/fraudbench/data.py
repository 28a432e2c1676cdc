"""Transaction datasets: CSV loading/writing, synthetic generation, partitioning.

A :class:`Dataset` stores its records column-wise in read-only numpy arrays so
that samplers and classifiers can work on whole matrices; :class:`Transaction`
is the per-record view handed out by indexing.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegeneratePartitionError,
    EmptyDatasetError,
    InputError,
    ParameterError,
    ParseError,
    SchemaError,
)

N_FEATURES = 28
FEATURE_NAMES = tuple(f"V{i}" for i in range(1, N_FEATURES + 1))
COLUMNS = ("Time",) + FEATURE_NAMES + ("Amount", "Class")
TWO_DAYS = 172_800.0


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Transaction:
    """One PCA-transformed card transaction."""

    features: np.ndarray
    time: float
    amount: float
    label: bool
    synthetic: bool = False

    def __post_init__(self):
        f = _frozen(self.features, np.float64)
        if f.shape != (N_FEATURES,):
            raise InputError(f"expected {N_FEATURES} features, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise InputError("features must be finite")
        if not (math.isfinite(self.amount) and self.amount >= 0):
            raise InputError(f"amount must be finite and >= 0, got {self.amount!r}")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "amount", float(self.amount))
        object.__setattr__(self, "label", bool(self.label))
        object.__setattr__(self, "synthetic", bool(self.synthetic))

    def __eq__(self, other):
        if not isinstance(other, Transaction):
            return NotImplemented
        return (
            np.array_equal(self.features, other.features)
            and self.time == other.time
            and self.amount == other.amount
            and self.label == other.label
            and self.synthetic == other.synthetic
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered, immutable collection of transactions.

    ``ids`` tracks each record's row number in the dataset it was first loaded
    or generated as, so that pools and samples can be checked against their
    source as multisets. Synthetic records carry id -1.
    """

    features: np.ndarray
    time: np.ndarray
    amount: np.ndarray
    label: np.ndarray
    ids: np.ndarray
    synthetic: np.ndarray

    def __post_init__(self):
        features = _frozen(self.features, np.float64).reshape(-1, N_FEATURES)
        n = features.shape[0]
        cols = {
            "time": _frozen(self.time, np.float64),
            "amount": _frozen(self.amount, np.float64),
            "label": _frozen(self.label, bool),
            "ids": _frozen(self.ids, np.int64),
            "synthetic": _frozen(self.synthetic, bool),
        }
        for name, col in cols.items():
            if col.shape != (n,):
                raise InputError(f"column {name!r} has shape {col.shape}, expected ({n},)")
        if not np.all(np.isfinite(features)):
            bad = int(np.argwhere(~np.isfinite(features))[0, 0])
            raise InputError(f"non-finite feature in record {bad}", index=bad)
        amount = cols["amount"]
        if not np.all(np.isfinite(amount) & (amount >= 0)):
            bad = int(np.argwhere(~(np.isfinite(amount) & (amount >= 0)))[0, 0])
            raise InputError(f"amount must be finite and >= 0 (record {bad})", index=bad)
        object.__setattr__(self, "features", features)
        for name, col in cols.items():
            object.__setattr__(self, name, col)

    @classmethod
    def from_arrays(cls, features, time, amount, label, ids=None, synthetic=None):
        n = len(label)
        if ids is None:
            ids = np.arange(n)
        if synthetic is None:
            synthetic = np.zeros(n, dtype=bool)
        return cls(features, time, amount, label, ids, synthetic)

    @classmethod
    def from_records(cls, records: Iterable[Transaction]) -> "Dataset":
        records = list(records)
        if not records:
            return cls.empty()
        return cls.from_arrays(
            np.stack([r.features for r in records]),
            [r.time for r in records],
            [r.amount for r in records],
            [r.label for r in records],
            synthetic=[r.synthetic for r in records],
        )

    @classmethod
    def empty(cls) -> "Dataset":
        return cls.from_arrays(np.empty((0, N_FEATURES)), [], [], [])

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.time for p in parts]),
            np.concatenate([p.amount for p in parts]),
            np.concatenate([p.label for p in parts]),
            np.concatenate([p.ids for p in parts]),
            np.concatenate([p.synthetic for p in parts]),
        )

    @property
    def total_count(self) -> int:
        return int(self.label.shape[0])

    @property
    def fraud_count(self) -> int:
        return int(np.count_nonzero(self.label))

    @property
    def fraud_rate(self) -> float:
        return self.fraud_count / self.total_count if self.total_count else 0.0

    @property
    def records(self) -> tuple[Transaction, ...]:
        return tuple(self[i] for i in range(len(self)))

    def __len__(self):
        return self.total_count

    def __getitem__(self, i) -> Transaction:
        i = int(i)
        return Transaction(
            self.features[i], self.time[i], self.amount[i], self.label[i], self.synthetic[i]
        )

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.features[idx],
            self.time[idx],
            self.amount[idx],
            self.label[idx],
            self.ids[idx],
            self.synthetic[idx],
        )

    def equals(self, other: "Dataset") -> bool:
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("features", "time", "amount", "label", "ids", "synthetic")
        )


@dataclass(frozen=True)
class Partition:
    sample_pool: Dataset
    test_pool: Dataset
    seed: int


def _parse_header(header: list[str]) -> list[int]:
    names = [h.strip() for h in header]
    for name in names:
        if name not in COLUMNS:
            raise SchemaError(f"unexpected column {name!r}", column=name)
    for name in COLUMNS:
        if name not in names:
            raise SchemaError(f"missing column {name!r}", column=name)
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise SchemaError(f"duplicate column {dup!r}", column=dup)
    return [names.index(c) for c in COLUMNS]


def load_dataset(path, synthetic_column: bool = False) -> Dataset:
    """Read a ``Time,V1..V28,Amount,Class`` CSV file.

    Row indices in parse errors count data rows from 0, header excluded.
    ``synthetic_column`` additionally accepts the ``Synthetic`` column written
    by sample debug dumps.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: file is empty") from None
        has_synth = synthetic_column and "Synthetic" in [h.strip() for h in header]
        if has_synth:
            synth_col = [h.strip() for h in header].index("Synthetic")
            header = [h for j, h in enumerate(header) if j != synth_col]
        order = _parse_header(header)
        rows = []
        synth = []
        for i, row in enumerate(reader):
            if not row:
                continue
            if has_synth:
                synth.append(row[synth_col].strip() == "1")
                row = [v for j, v in enumerate(row) if j != synth_col]
            if len(row) != len(COLUMNS):
                raise ParseError(
                    f"row {i}: expected {len(COLUMNS)} cells, got {len(row)}", row=i
                )
            try:
                rows.append([float(row[j]) for j in order])
            except ValueError as exc:
                raise ParseError(f"row {i}: {exc}", row=i) from None
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=np.float64)
    cls = table[:, -1]
    bad = np.flatnonzero((cls != 0) & (cls != 1))
    if bad.size:
        raise ParseError(f"row {bad[0]}: Class must be 0 or 1", row=int(bad[0]))
    bad = np.flatnonzero(~np.all(np.isfinite(table), axis=1))
    if bad.size:
        raise ParseError(f"row {bad[0]}: non-finite value", row=int(bad[0]))
    bad = np.flatnonzero(table[:, -2] < 0)
    if bad.size:
        raise ParseError(f"row {bad[0]}: negative Amount", row=int(bad[0]))
    return Dataset.from_arrays(
        table[:, 1 : 1 + N_FEATURES],
        table[:, 0],
        table[:, -2],
        cls == 1,
        synthetic=synth if has_synth else None,
    )


def write_dataset(dataset: Dataset, path, synthetic_column: bool = False) -> None:
    """Write ``dataset`` in the loader's schema (LF endings, shortest-repr floats)."""
    header = list(COLUMNS) + (["Synthetic"] if synthetic_column else [])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(dataset)):
            row = [repr(float(dataset.time[i]))]
            row.extend(repr(float(v)) for v in dataset.features[i])
            row.append(repr(float(dataset.amount[i])))
            row.append("1" if dataset.label[i] else "0")
            if synthetic_column:
                row.append("1" if dataset.synthetic[i] else "0")
            writer.writerow(row)


# Per-feature spread of the clean class, decreasing like PCA component variances.
_CLEAN_SCALE = np.linspace(1.9, 0.35, N_FEATURES)
# Features carrying the fraud signal, with the direction of the fraud shift.
_SIGNAL = {2: -1.0, 3: 1.0, 9: -1.0, 10: 1.0, 11: -1.0, 13: -1.0, 16: -1.0}
_FRAUD_SHIFT = 2.0
_FRAUD_SPREAD = 0.35


def generate_synthetic(n: int, fraud_rate: float, seed: int) -> Dataset:
    """Generate a desk-scale stand-in for the credit-card dataset.

    Clean records are centred Gaussians; fraud records form a tighter cluster
    shifted along a handful of features, so the classes overlap partially and
    most features carry no signal at all. Amounts are log-normal with a median
    of about 20 for both classes.
    """
    if n < 10:
        raise ParameterError(f"n must be >= 10, got {n}")
    if not 0 < fraud_rate < 1:
        raise ParameterError(f"fraud_rate must lie in (0, 1), got {fraud_rate}")
    n_fraud = int(round(n * fraud_rate))
    if n_fraud == 0:
        raise ParameterError(f"fraud_rate {fraud_rate} yields no fraud records for n={n}")
    n_fraud = min(n_fraud, n - 1)

    rng = np.random.default_rng(seed)
    label = np.zeros(n, dtype=bool)
    label[rng.choice(n, size=n_fraud, replace=False)] = True

    z = rng.standard_normal((n, N_FEATURES))
    center = np.zeros(N_FEATURES)
    for j, sign in _SIGNAL.items():
        center[j] = sign * _FRAUD_SHIFT
    features = np.where(
        label[:, None],
        (center + _FRAUD_SPREAD * z) * _CLEAN_SCALE,
        z * _CLEAN_SCALE,
    )
    amount = np.round(rng.lognormal(mean=math.log(20.0), sigma=1.2, size=n), 2)
    time = np.round(np.sort(rng.uniform(0.0, TWO_DAYS, size=n)))
    return Dataset.from_arrays(features, time, amount, label)


def partition(dataset: Dataset, sample_fraction: float, seed: int) -> Partition:
    """Split ``dataset`` uniformly (unstratified) into a sample pool and a test pool.

    Raises :class:`DegeneratePartitionError` when either pool ends up without
    fraud records; retry with another seed.
    """
    if not 0 < sample_fraction < 1:
        raise ParameterError(f"sample_fraction must lie in (0, 1), got {sample_fraction}")
    n = len(dataset)
    k = int(round(sample_fraction * n))
    perm = np.random.default_rng(seed).permutation(n)
    sample_idx = np.sort(perm[:k])
    test_idx = np.sort(perm[k:])
    sample_pool = dataset.take(sample_idx)
    test_pool = dataset.take(test_idx)
    if sample_pool.fraud_count == 0 or test_pool.fraud_count == 0:
        raise DegeneratePartitionError(
            f"seed {seed}: sample pool has {sample_pool.fraud_count} fraud records, "
            f"test pool has {test_pool.fraud_count}"
        )
    return Partition(sample_pool, test_pool, seed)
