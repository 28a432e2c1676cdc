"""Confusion counts, the derived rates, and the amount-weighted fraud cost."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .errors import InputError, ParameterError

MICRO = 1_000_000


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if int(v) != v or v < 0:
                raise ParameterError(f"{f.name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, f.name, int(v))

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricSet:
    """Rates derived from a confusion matrix.

    A rate whose denominator is zero is ``None`` rather than 0 so that it can
    be left out of averages.
    """

    tpr: Optional[float]
    fpr: Optional[float]
    tnr: Optional[float]
    fnr: Optional[float]
    ppv: Optional[float]
    npv: Optional[float]
    fdr: Optional[float]
    for_: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    accuracy: Optional[float]
    f1: Optional[float]

    def as_dict(self) -> dict:
        return asdict(self)


METRIC_NAMES = tuple(f.name for f in fields(MetricSet))


@dataclass(frozen=True)
class CostModel:
    """Cost matrix constants, in currency units (``f_m`` is dimensionless).

    ``c_f`` is charged for every fraud, caught or missed; the missed-fraud
    handling cost ``c_l`` is required to equal it.
    """

    c_f: float = 10.0
    c_e: float = 5.0
    c_l: float = 10.0
    f_m: float = 2.40

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) >= 0:
                raise ParameterError(f"{f.name} must be >= 0")
        if self.c_f != self.c_l:
            raise ParameterError("detected and undetected fraud handling costs must match (c_f == c_l)")


def default_cost_model() -> CostModel:
    return CostModel()


def _labels(x, name):
    a = np.asarray(x)
    if a.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    return a.astype(bool)


def confusion(predictions, truth) -> ConfusionCounts:
    pred = _labels(predictions, "predictions")
    true = _labels(truth, "truth")
    if pred.shape != true.shape:
        raise InputError(f"length mismatch: {pred.size} predictions, {true.size} labels")
    if pred.size == 0:
        raise InputError("need at least one prediction")
    tp = int(np.count_nonzero(pred & true))
    fp = int(np.count_nonzero(pred & ~true))
    fn = int(np.count_nonzero(~pred & true))
    return ConfusionCounts(tp=tp, fp=fp, tn=pred.size - tp - fp - fn, fn=fn)


def _ratio(num, den):
    return num / den if den else None


def _mean2(a, b):
    return None if a is None or b is None else (a + b) / 2


def f1_harmonic(ppv, tpr):
    """F1 as twice the harmonic mean of PPV and TPR."""
    if ppv is None or tpr is None or ppv + tpr == 0:
        return None
    return 2 * (ppv * tpr / (ppv + tpr))


def derive_metrics(counts: ConfusionCounts) -> MetricSet:
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    tpr, fnr = _ratio(tp, tp + fn), _ratio(fn, fn + tp)
    tnr, fpr = _ratio(tn, tn + fp), _ratio(fp, fp + tn)
    ppv, fdr = _ratio(tp, tp + fp), _ratio(fp, tp + fp)
    npv, for_ = _ratio(tn, tn + fn), _ratio(fn, tn + fn)
    return MetricSet(
        tpr=tpr,
        fpr=fpr,
        tnr=tnr,
        fnr=fnr,
        ppv=ppv,
        npv=npv,
        fdr=fdr,
        for_=for_,
        precision=_mean2(ppv, npv),
        recall=_mean2(tpr, tnr),
        accuracy=_ratio(tp + tn, counts.total),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
    )


def to_micros(x) -> np.ndarray:
    """Currency amounts to integer micro-units (round half to even)."""
    return np.rint(np.asarray(x, dtype=np.float64) * MICRO).astype(np.int64)


def fraud_cost_micros(predicted, truth, amounts, cm: CostModel) -> int:
    """Fraud cost in integer micro-units.

    Caught fraud saves its amount, missed fraud costs ``f_m`` times its
    amount, every fraud costs ``c_f`` to handle and every false alarm ``c_e``.
    The multiplier is applied once to the summed missed amount, with a single
    rounding to the nearest micro-unit (half to even).
    """
    pred = _labels(predicted, "predicted")
    true = _labels(truth, "truth")
    amt = np.asarray(amounts, dtype=np.float64)
    if not (pred.shape == true.shape == amt.shape):
        raise InputError(
            f"length mismatch: {pred.size} predictions, {true.size} labels, {amt.size} amounts"
        )
    if np.any(~np.isfinite(amt) | (amt < 0)):
        raise InputError("amounts must be finite and >= 0")
    micros = to_micros(amt)
    # Python ints from here on: no overflow, exact integer sums.
    caught = int(micros[pred & true].sum(dtype=np.int64))
    missed = int(micros[~pred & true].sum(dtype=np.int64))
    n_fraud = int(np.count_nonzero(true))
    n_false_alarm = int(np.count_nonzero(pred & ~true))
    c_fl, c_e, f_m = (int(round(v * MICRO)) for v in (cm.c_f, cm.c_e, cm.f_m))
    return n_fraud * c_fl + n_false_alarm * c_e + _div_round_even(f_m * missed, MICRO) - caught


def _div_round_even(num: int, den: int) -> int:
    q, r = divmod(num, den)
    if 2 * r > den or (2 * r == den and q % 2):
        q += 1
    return q


def fraud_cost(predicted, truth, amounts, cm: CostModel | None = None) -> float:
    """Fraud cost in currency units; negative values are net savings."""
    return fraud_cost_micros(predicted, truth, amounts, cm or default_cost_model()) / MICRO
