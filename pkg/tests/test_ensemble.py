import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fraudbench.classifiers import ClassifierSpec, Kind, Penalty, predict_scores, train
from fraudbench.ensemble import (
    BITS,
    WEIGHT_LIMIT,
    GAConfig,
    Genome,
    Population,
    crossover,
    ensemble_predict,
    ensemble_scores,
    evolve,
    init_population,
    mutate,
    repair_ceiling,
    selection_probabilities,
    split_sample,
    write_trace,
)
from fraudbench.errors import InfeasibleCeilingError, InputError, ParameterError, SplitError
from fraudbench.sampling import undersample

MEMBERS = [
    ClassifierSpec(Kind.LOG, Penalty.L1, 0.5),
    ClassifierSpec(Kind.SVC, Penalty.L1, 0.5),
    ClassifierSpec(Kind.RF, trees=10, seed=2),
]


@pytest.fixture(scope="module")
def sample(small_data):
    return undersample(small_data, 0.3, 0)


def test_init_range_and_determinism():
    cfg = GAConfig(population_size=200, seed=5)
    a = init_population(cfg, 3)
    b = init_population(cfg, 3)
    assert a.genomes == b.genomes
    m = a.matrix()
    assert m.min() >= 1 and m.max() < WEIGHT_LIMIT


def test_init_uniform():
    w = init_population(GAConfig(population_size=2000, seed=1), 3).matrix().ravel()
    assert stats.kstest(w, stats.uniform(1, WEIGHT_LIMIT - 1).cdf).pvalue > 0.001


def test_init_needs_two_members():
    with pytest.raises(ParameterError):
        init_population(GAConfig(), 1)


def test_selection_uniform_when_equal():
    assert np.allclose(selection_probabilities([3.0] * 4), 0.25)


def test_selection_hand_case():
    p = selection_probabilities([-100.0, 0.0])
    assert p[0] == pytest.approx(101 / 102, abs=1e-15)
    assert p[1] == pytest.approx(1 / 102, abs=1e-15)


@settings(max_examples=200)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.floats(-1e5, 1e5))
def test_selection_sums_to_one_and_shift_invariant(f, shift):
    p = selection_probabilities(f)
    assert abs(p.sum() - 1) < 1e-12
    q = selection_probabilities(np.array(f) + shift)
    assert np.allclose(p, q, atol=1e-9)


def test_selection_orders_by_cost():
    p = selection_probabilities([5.0, 1.0, 3.0])
    assert p[1] > p[2] > p[0]


def test_selection_rejects_empty():
    with pytest.raises(InputError):
        selection_probabilities([])


def test_crossover_identity_cases():
    a, b = Genome((12345, 678)), Genome((999, 2**39 + 7))
    assert crossover(a, a, np.random.default_rng(0)) == a
    assert crossover(a, b, cuts=[BITS, BITS]) == b
    assert crossover(a, b, cuts=[0, 0]) == a


def test_crossover_bit_mask_oracle(rng):
    for _ in range(1000):
        a = Genome(rng.integers(1, WEIGHT_LIMIT, size=3).tolist())
        b = Genome(rng.integers(1, WEIGHT_LIMIT, size=3).tolist())
        child = crossover(a, b, rng)
        for wa, wb, wc in zip(a.weights, b.weights, child.weights):
            ok = any(
                wc == max(1, (wa >> c << c) | (wb & ((1 << c) - 1)))
                for c in range(1, BITS)
            )
            assert ok


def test_crossover_length_mismatch():
    with pytest.raises(InputError):
        crossover(Genome((1, 2)), Genome((1, 2, 3)))


def test_mutate_rates(rng):
    g = Genome((5, 2**39, 77))
    assert mutate(g, 0.0, rng) == g
    flipped = mutate(g, 1.0, rng)
    assert flipped.weights == tuple(max(1, w ^ (WEIGHT_LIMIT - 1)) for w in g.weights)


def test_mutate_flip_count(rng):
    total, n = 0, 2500
    g = Genome((2**20,) * 1)
    for _ in range(n):
        total += bin(mutate(g, 0.001, rng).weights[0] ^ g.weights[0]).count("1")
    bits = n * BITS
    sd = math.sqrt(bits * 0.001 * 0.999)
    assert abs(total - bits * 0.001) < 3 * sd + 1


def test_repair_example():
    g = repair_ceiling(Genome((1000, 1, 1)), 0.49)
    w = g.normalized
    assert w.max() <= 0.49
    assert g.weights[1:] == (1, 1)


def test_repair_leaves_feasible_alone():
    g = Genome((10, 10, 10))
    assert repair_ceiling(g, 0.49) == g


def test_repair_infeasible():
    with pytest.raises(InfeasibleCeilingError):
        repair_ceiling(Genome((5, 5)), 0.49)


def largest_allowed(w, i, w_max):
    # binary search for the biggest w_i keeping w_i <= w_max * total
    rest = sum(w) - w[i]
    w_max = Fraction(str(w_max))
    lo, hi = 1, w[i]
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid <= w_max * (mid + rest):
            lo = mid
        else:
            hi = mid - 1
    return lo


def test_repair_fixed_point_example():
    w = [3 * 2**30, 2**30, 2**30]
    g = repair_ceiling(Genome(w), 0.49)
    assert g.weights[1:] == (2**30, 2**30)
    assert g.weights[0] == largest_allowed(w, 0, 0.49)


def test_repair_matches_binary_search(rng):
    checked = 0
    for _ in range(300):
        w = rng.integers(1, 2**30, size=4).tolist()
        i = int(rng.integers(4))
        w[i] = int(rng.integers(2**36, WEIGHT_LIMIT))
        g = repair_ceiling(Genome(w), 0.49)
        # one dominant member: a single cut settles it
        assert [a != b for a, b in zip(g.weights, w)].count(True) == 1
        assert g.weights[i] == largest_allowed(w, i, 0.49)
        checked += 1
    assert checked == 300


@settings(max_examples=300)
@given(st.lists(st.integers(1, WEIGHT_LIMIT - 1), min_size=3, max_size=6), st.floats(0.34, 0.9))
def test_repair_respects_ceiling(w, w_max):
    g = repair_ceiling(Genome(w), w_max)
    total = sum(g.weights)
    assert max(g.weights) / total <= w_max + 1 / total


def test_ensemble_scores_oracle(rng):
    s = rng.random((50, 3))
    w = [3, 1, 6]
    expect = [sum(s[i, j] * w[j] for j in range(3)) / 10 for i in range(50)]
    assert np.allclose(ensemble_scores(s, w), expect)
    assert np.all(ensemble_scores(s, w) <= s.max(axis=1) + 1e-12)
    assert np.all(ensemble_scores(s, w) >= s.min(axis=1) - 1e-12)


def test_ensemble_predict(sample):
    models = [train(m, sample) for m in MEMBERS]
    rec = sample.records[0]
    p = ensemble_predict(models, Genome((1, 1, 1)), rec)
    single = [predict_scores(m, [rec])[0] for m in models]
    assert p.score == pytest.approx(np.mean(single))
    with pytest.raises(InputError):
        ensemble_predict(models, Genome((1, 1)), rec)


def test_split_sample_degenerate():
    from conftest import make_dataset

    ds = make_dataset(np.arange(10), [1] + [0] * 9)
    with pytest.raises(SplitError):
        for seed in range(50):
            split_sample(ds, 0.6, np.random.default_rng(seed))


def test_evolve_closed_population(sample):
    g = Genome((7, 7, 7))
    cfg = GAConfig(population_size=4, generations=3, seed=1, mutation_rate=0.0)
    evo = evolve(MEMBERS, sample, cfg, initial=Population([g] * 4))
    assert evo.genome == g
    assert len(evo.trace) == 3


def test_evolve_trace_non_increasing_and_deterministic(sample):
    cfg = GAConfig(population_size=30, generations=30, seed=3)
    a = evolve(MEMBERS, sample, cfg)
    b = evolve(MEMBERS, sample, cfg)
    best = [t["best_fitness"] for t in a.trace]
    assert len(best) == 30
    assert all(x >= y for x, y in zip(best, best[1:]))
    assert a.genome == b.genome and best == [t["best_fitness"] for t in b.trace]
    assert a.fitness == best[-1]
    assert max(a.genome.normalized) <= 0.49 + 1 / sum(a.genome.weights)


def test_evolve_time_budget(sample):
    evo = evolve(MEMBERS, sample, GAConfig(population_size=10, time_budget=0.2, seed=0))
    assert evo.generations >= 1


def test_evolve_beats_median_initial(sample):
    wins = 0
    for seed in range(100):
        cfg = GAConfig(population_size=20, generations=30, seed=seed)
        evo = evolve(MEMBERS, sample, cfg)
        wins += evo.fitness <= evo.trace[0]["median_fitness"]
    assert wins >= 95


def test_write_trace(tmp_path, sample):
    evo = evolve(MEMBERS, sample, GAConfig(population_size=5, generations=4, seed=0))
    path = tmp_path / "t.csv"
    write_trace(evo.trace, path)
    write_trace(evo.trace, path, append=True)
    lines = path.read_text().splitlines()
    assert len(lines) == 9 and lines[0].startswith("generation,")
