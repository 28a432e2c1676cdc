from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraudbench.errors import InputError, ParameterError
from fraudbench.evaluation import (
    MICRO,
    ConfusionCounts,
    CostModel,
    confusion,
    default_cost_model,
    derive_metrics,
    f1_harmonic,
    fraud_cost,
    fraud_cost_micros,
)


def stream(tp, fp, tn, fn):
    pred = np.r_[np.ones(tp + fp), np.zeros(tn + fn)].astype(bool)
    truth = np.r_[np.ones(tp), np.zeros(fp), np.zeros(tn), np.ones(fn)].astype(bool)
    return pred, truth


def test_confusion_from_streams():
    pred, truth = stream(348, 6544, 277542, 45)
    assert confusion(pred, truth) == ConfusionCounts(348, 6544, 277542, 45)
    assert confusion(np.zeros(truth.size), truth) == ConfusionCounts(0, 0, 284086, 393)


def test_confusion_rejects_bad_input():
    with pytest.raises(InputError):
        confusion([1, 0], [1])
    with pytest.raises(InputError):
        confusion([], [])
    with pytest.raises(ParameterError):
        ConfusionCounts(-1, 0, 0, 0)


def test_metrics_are_exact_fractions():
    m = derive_metrics(ConfusionCounts(348, 6544, 277542, 45))
    assert m.tpr == 348 / 393
    assert m.ppv == 348 / 6892
    assert m.f1 == 2 * 348 / (2 * 348 + 6544 + 45)
    assert m.precision == (m.ppv + m.npv) / 2
    assert m.recall == (m.tpr + m.tnr) / 2


def test_undefined_metrics_are_none():
    m = derive_metrics(ConfusionCounts(0, 0, 50, 0))
    assert m.ppv is None and m.tpr is None and m.f1 is None
    assert m.tnr == 1.0 and m.accuracy == 1.0
    assert set(m.as_dict()) >= {"tpr", "for_", "f1"}


counts = st.tuples(*(st.integers(0, 10**6) for _ in range(4))).filter(lambda c: c[0] > 0)


@settings(max_examples=300)
@given(counts)
def test_metric_identities(c):
    m = derive_metrics(ConfusionCounts(*c))
    for a, b in ((m.tpr, m.fnr), (m.tnr, m.fpr), (m.ppv, m.fdr), (m.npv, m.for_)):
        if a is not None:
            assert abs(a + b - 1) < 1e-12
    assert abs(m.f1 - f1_harmonic(m.ppv, m.tpr)) < 1e-12


def test_confusion_matches_recount(rng):
    for _ in range(50):
        n = rng.integers(1, 500)
        p, t = rng.random(n) < 0.3, rng.random(n) < 0.1
        c = confusion(p, t)
        assert c.tp == sum(1 for a, b in zip(p, t) if a and b)
        assert c.fn == sum(1 for a, b in zip(p, t) if not a and b)
        assert c.total == n


def test_cost_examples():
    cm = default_cost_model()
    assert fraud_cost([True], [True], [100.0], cm) == -90.0
    assert fraud_cost([False], [True], [100.0], cm) == 250.0
    assert fraud_cost([True], [False], [100.0], cm) == 5.0
    assert fraud_cost([False], [False], [100.0], cm) == 0.0


def test_cost_closed_forms(rng):
    cm = default_cost_model()
    amt = np.round(rng.lognormal(3, 1, 500), 2)
    truth = rng.random(500) < 0.1
    nf = int(truth.sum())
    s = amt[truth].sum()
    assert fraud_cost(np.zeros(500), truth, amt, cm) == pytest.approx(10 * nf + 2.4 * s, abs=1e-6)
    assert fraud_cost(truth, truth, amt, cm) == pytest.approx(10 * nf - s, abs=1e-6)


def test_cost_is_additive(rng):
    cm = default_cost_model()
    for _ in range(20):
        n = 200
        p, t = rng.random(n) < 0.2, rng.random(n) < 0.1
        a = np.round(rng.uniform(0, 500, n), 2)
        k = rng.integers(1, n)
        whole = fraud_cost_micros(p, t, a, cm)
        parts = fraud_cost_micros(p[:k], t[:k], a[:k], cm) + fraud_cost_micros(p[k:], t[k:], a[k:], cm)
        # the f_m product is rounded once per call
        assert abs(whole - parts) <= 1


def test_default_cost_model():
    cm = default_cost_model()
    assert (cm.c_f, cm.c_e, cm.c_l, cm.f_m) == (10, 5, 10, 2.40)
    with pytest.raises(ParameterError):
        CostModel(c_f=10, c_l=12)


def test_cost_rejects_negative_amounts():
    with pytest.raises(InputError):
        fraud_cost([True], [True], [-1.0])


def brute_force_cost(pred, truth, amounts, cm):
    """Record-by-record evaluation of the cost matrix in exact rationals."""
    total = Fraction(0)
    missed = Fraction(0)
    for p, t, a in zip(pred, truth, amounts):
        a = Fraction(round(a * MICRO), MICRO)
        if t:
            total += Fraction(cm.c_f).limit_denominator()
            if p:
                total -= a
            else:
                missed += a
        elif p:
            total += Fraction(cm.c_e).limit_denominator()
    total += Fraction(str(cm.f_m)) * missed
    return total


def test_cost_matches_brute_force(rng):
    cm = default_cost_model()
    for _ in range(100):
        n = int(rng.integers(1, 400))
        p, t = rng.random(n) < 0.3, rng.random(n) < 0.2
        a = np.round(rng.lognormal(3, 1.5, n), 2)
        exact = brute_force_cost(p, t, a, cm) * MICRO
        assert abs(fraud_cost_micros(p, t, a, cm) - exact) <= Fraction(1, 2)
