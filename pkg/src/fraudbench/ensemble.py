"""Weighted-average voting ensemble with integer weights tuned by a genetic algorithm.

Each genome holds one 40-bit integer weight per member classifier. Fitness is
the fraud cost of the ensemble's decisions on a validation split (lower is
better).
"""
from __future__ import annotations

import csv
import math
import time
from fractions import Fraction
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .classifiers import ClassifierSpec, Prediction, TrainedModel, predict_scores, train
from .classifiers.base import THRESHOLD, as_matrix
from .evaluation import MICRO, CostModel, default_cost_model, fraud_cost_micros
from .errors import InfeasibleCeilingError, InputError, ParameterError, SplitError

BITS = 40
WEIGHT_LIMIT = 1 << BITS  # weights live in [1, 2**40)
_FULL = WEIGHT_LIMIT - 1


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 50
    mutation_rate: float = 0.001
    time_budget: float = 60.0
    w_max: float = 0.49
    train_fraction: float = 0.6
    seed: int = 0
    generations: Optional[int] = None  # replaces the clock when set

    def __post_init__(self):
        if self.population_size < 1:
            raise ParameterError("population_size must be >= 1")
        if not 0 <= self.mutation_rate <= 1:
            raise ParameterError("mutation_rate must lie in [0, 1]")
        if not 0 < self.w_max < 1:
            raise ParameterError("w_max must lie in (0, 1)")
        if not 0 < self.train_fraction < 1:
            raise ParameterError("train_fraction must lie in (0, 1)")
        if self.generations is not None and self.generations < 1:
            raise ParameterError("generations must be >= 1")


@dataclass(frozen=True)
class Genome:
    weights: tuple

    def __post_init__(self):
        w = tuple(int(v) for v in self.weights)
        for v in w:
            if not 1 <= v < WEIGHT_LIMIT:
                raise ParameterError(f"weight {v} outside [1, 2**{BITS})")
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    @property
    def normalized(self) -> np.ndarray:
        w = np.array(self.weights, dtype=np.float64)
        return w / w.sum()


@dataclass
class Population:
    genomes: list
    fitnesses: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.genomes)

    def matrix(self) -> np.ndarray:
        return np.array([g.weights for g in self.genomes], dtype=np.float64)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def init_population(cfg: GAConfig, n_members: int, rng=None) -> Population:
    """``cfg.population_size`` genomes with weights uniform on [1, 2**40)."""
    if n_members < 2:
        raise ParameterError(f"an ensemble needs at least 2 members, got {n_members}")
    rng = _rng(cfg.seed if rng is None else rng)
    draws = rng.integers(1, WEIGHT_LIMIT, size=(cfg.population_size, n_members), dtype=np.int64)
    return Population([Genome(row) for row in draws.tolist()])


def selection_probabilities(fitnesses) -> np.ndarray:
    """Selection probability per genome; lower cost gets strictly more weight.

    Costs are first shifted to be >= 1, then inverted against the worst one.
    """
    f = np.asarray(fitnesses, dtype=np.float64)
    if f.ndim != 1 or f.size == 0:
        raise InputError("need a non-empty vector of fitnesses")
    if not np.all(np.isfinite(f)):
        raise InputError("fitnesses must be finite")
    positive = f - f.min() + 1.0
    inverted = positive.max() + 1.0 - positive
    return inverted / inverted.sum()


def crossover(a: Genome, b: Genome, rng=None, cuts=None) -> Genome:
    """Single-point splice per weight: bits at or above the cut from ``a``, below from ``b``.

    ``cuts`` (number of low bits taken from ``b``, one per weight) is drawn
    from [1, 39] unless given.
    """
    if len(a) != len(b):
        raise InputError(f"parents differ in length: {len(a)} vs {len(b)}")
    if cuts is None:
        cuts = _rng(rng).integers(1, BITS, size=len(a)).tolist()
    child = []
    for wa, wb, cut in zip(a.weights, b.weights, cuts):
        if not 0 <= cut <= BITS:
            raise ParameterError(f"cut {cut} outside [0, {BITS}]")
        low = (1 << int(cut)) - 1
        child.append(max(1, (wa & _FULL & ~low) | (wb & low)))
    return Genome(child)


def mutate(g: Genome, rate: float, rng=None) -> Genome:
    """Flip each of the 40 bits of every weight with probability ``rate``; zeros become 1."""
    if not 0 <= rate <= 1:
        raise ParameterError("rate must lie in [0, 1]")
    if rate == 0:
        return g
    flips = _rng(rng).random((len(g), BITS)) < rate
    out = []
    for w, row in zip(g.weights, flips):
        mask = sum(1 << i for i in np.flatnonzero(row).tolist())
        out.append(max(1, w ^ mask))
    return Genome(out)


def repair_ceiling(g: Genome, w_max: float) -> Genome:
    """Shrink over-weighted members until no normalized weight exceeds ``w_max``.

    The largest offending weight is cut to the biggest integer that keeps it at
    or below the ceiling of the new total; repeat until nothing exceeds.
    """
    n = len(g)
    if w_max * n < 1:
        raise InfeasibleCeilingError(f"{n} members cannot all stay at or below {w_max}")
    # exact rationals: 0.49 means 49/100, not its nearest double
    cap = Fraction(repr(float(w_max)))
    w = list(g.weights)
    while True:
        total = sum(w)
        i = max(range(n), key=w.__getitem__)
        if w[i] <= cap * total:
            return Genome(w)
        rest = total - w[i]
        w[i] = max(1, min(w[i] - 1, math.floor(cap * rest / (1 - cap))))


def ensemble_scores(member_scores: np.ndarray, weights) -> np.ndarray:
    """Weighted mean of member scores; ``member_scores`` is (n_records, n_members)."""
    w = np.asarray(weights, dtype=np.float64)
    return member_scores @ w / w.sum()


def ensemble_predict(members: Sequence[TrainedModel], g: Genome, record) -> Prediction:
    if len(members) != len(g):
        raise InputError(f"{len(members)} members but {len(g)} weights")
    X = as_matrix([record])
    scores = np.array([[predict_scores(m, X)[0] for m in members]])
    return Prediction(float(ensemble_scores(scores, g.weights)[0]))


@dataclass
class Evolution:
    """Outcome of :func:`evolve`."""

    genome: Genome
    fitness: float
    members: list
    trace: list = field(default_factory=list)

    @property
    def generations(self) -> int:
        return len(self.trace)

    def scores(self, records) -> np.ndarray:
        X = as_matrix(records)
        cols = np.column_stack([predict_scores(m, X) for m in self.members])
        return ensemble_scores(cols, self.genome.weights)


def split_sample(records, train_fraction, rng):
    n = len(records)
    perm = rng.permutation(n)
    k = int(round(train_fraction * n))
    train_part = records.take(np.sort(perm[:k]))
    valid_part = records.take(np.sort(perm[k:]))
    for name, part in (("training", train_part), ("validation", valid_part)):
        if part.fraud_count in (0, len(part)):
            raise SplitError(f"{name} split of {len(part)} records lacks one class")
    return train_part, valid_part


def _population_costs(pop: Population, member_scores, truth, amounts, cm) -> np.ndarray:
    W = pop.matrix()
    labels = (member_scores @ W.T) / W.sum(axis=1) >= THRESHOLD
    return np.array(
        [fraud_cost_micros(labels[:, j], truth, amounts, cm) / MICRO for j in range(len(pop))]
    )


def evolve(
    members: Sequence[ClassifierSpec],
    sample,
    cfg: GAConfig,
    cost_model: CostModel | None = None,
    initial: Population | None = None,
) -> Evolution:
    """Train ``members`` on part of ``sample`` and evolve ensemble weights on the rest.

    Runs until ``cfg.time_budget`` seconds have elapsed (checked between
    generations) or, when ``cfg.generations`` is set, for exactly that many
    evaluated generations. Returns the best genome seen in any generation.
    """
    cm = cost_model or default_cost_model()
    if len(members) < 2:
        raise ParameterError("an ensemble needs at least 2 members")
    rng = np.random.default_rng(cfg.seed)
    records = getattr(sample, "records", sample)
    train_part, valid_part = split_sample(records, cfg.train_fraction, rng)
    models = [train(spec, train_part) for spec in members]
    member_scores = np.column_stack([predict_scores(m, valid_part) for m in models])
    truth, amounts = valid_part.label, valid_part.amount

    pop = initial if initial is not None else init_population(cfg, len(members), rng)
    pop = Population([repair_ceiling(g, cfg.w_max) for g in pop.genomes])
    best_genome, best_fitness = None, math.inf
    trace = []
    start = time.monotonic()
    generation = 0
    while True:
        pop.fitnesses = _population_costs(pop, member_scores, truth, amounts, cm)
        j = int(np.argmin(pop.fitnesses))
        if pop.fitnesses[j] < best_fitness:
            best_fitness, best_genome = float(pop.fitnesses[j]), pop.genomes[j]
        trace.append(
            {
                "generation": generation,
                "best_fitness": best_fitness,
                "mean_fitness": float(pop.fitnesses.mean()),
                "median_fitness": float(np.median(pop.fitnesses)),
                "generation_best": float(pop.fitnesses[j]),
                "best_genome": best_genome.weights,
            }
        )
        generation += 1
        if cfg.generations is not None:
            if generation >= cfg.generations:
                break
        elif time.monotonic() - start >= cfg.time_budget:
            break
        probs = selection_probabilities(pop.fitnesses)
        children = []
        for _ in range(cfg.population_size):
            ia, ib = rng.choice(len(pop), size=2, p=probs)
            child = crossover(pop.genomes[ia], pop.genomes[ib], rng)
            child = mutate(child, cfg.mutation_rate, rng)
            children.append(repair_ceiling(child, cfg.w_max))
        pop = Population(children)
    return Evolution(best_genome, best_fitness, models, trace)


TRACE_COLUMNS = ("generation", "best_fitness", "mean_fitness", "median_fitness", "generation_best", "best_genome")


def write_trace(trace, path, append: bool = False) -> None:
    """Write (or append) an evolution trace as CSV; genomes are ``;``-joined weights."""
    path = Path(path)
    new = not (append and path.exists())
    with path.open("a" if append else "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(TRACE_COLUMNS)
        for row in trace:
            w.writerow(
                [
                    row["generation"],
                    repr(row["best_fitness"]),
                    repr(row["mean_fitness"]),
                    repr(row["median_fitness"]),
                    repr(row["generation_best"]),
                    ";".join(str(v) for v in row["best_genome"]),
                ]
            )
