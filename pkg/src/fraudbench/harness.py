"""Monte Carlo experiment harness: repeated partition/sample/train/evaluate cycles.

Every iteration draws a fresh partition of the whole dataset, builds each
configured sample from the sample pool, trains every classifier on it and
scores them on the test pool plus the sample's leftovers. Seeds are derived
from ``(master_seed, iteration, attempt, ...)`` so any iteration can be
replayed on its own.
"""
from __future__ import annotations

import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from statistics import median
from typing import Callable, Optional

import numpy as np

from .classifiers import CONTROL_KINDS, ClassifierSpec, Kind, Penalty, predict_scores, train
from .classifiers.base import THRESHOLD
from .data import Dataset, generate_synthetic, load_dataset, partition
from .ensemble import GAConfig, evolve
from .evaluation import (
    METRIC_NAMES,
    CostModel,
    ConfusionCounts,
    confusion,
    derive_metrics,
    fraud_cost_micros,
    MICRO,
)
from .errors import DegenerateError, FraudBenchError, ParameterError
from .sampling import Method, SampleSpec, build_sample

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_RETRIES = 5
ENSEMBLE = "ENSEMBLE"
DEFAULT_SYNTHETIC = {"n": 50_000, "fraud_rate": 0.004, "seed": 0}

# Library-default starting points for the parameter search.
DEFAULT_PARAMS = {
    Kind.LOG: ClassifierSpec(Kind.LOG, Penalty.L2, 1.0),
    Kind.SVC: ClassifierSpec(Kind.SVC, Penalty.L2, 1.0),
    Kind.RF: ClassifierSpec(Kind.RF, trees=10),
    Kind.KNN: ClassifierSpec(Kind.KNN, k=5),
    Kind.GNB: ClassifierSpec(Kind.GNB),
}

# Best parameters found for undersamples; used as CLI defaults.
TUNED_PARAMS = {
    Kind.LOG: ClassifierSpec(Kind.LOG, Penalty.L1, 0.5),
    Kind.SVC: ClassifierSpec(Kind.SVC, Penalty.L1, 0.5),
    Kind.RF: ClassifierSpec(Kind.RF, trees=80),
    Kind.KNN: ClassifierSpec(Kind.KNN, k=10),
    Kind.GNB: ClassifierSpec(Kind.GNB),
}

RATIO_GRID = (0.1, 0.2, 0.3, 0.4, 0.5)
SMOTE_SIZES = (1000, 2000, 3000, 5000, 10000)
C_GRID = (0.5, 1.0, 5.0, 10.0, 20.0)
COUNT_GRID = tuple(range(10, 101, 10))


def undersample_grid() -> list[SampleSpec]:
    return [SampleSpec(Method.UNDERSAMPLE, r) for r in RATIO_GRID]


def smote_grid() -> list[SampleSpec]:
    return [SampleSpec(Method.SMOTE, r, n) for n in SMOTE_SIZES for r in RATIO_GRID]


def classifier_grid(kinds=tuple(Kind)) -> list[ClassifierSpec]:
    out = []
    for kind in map(Kind, kinds):
        if kind in (Kind.LOG, Kind.SVC):
            out += [ClassifierSpec(kind, p, c) for p in Penalty for c in C_GRID]
        elif kind is Kind.RF:
            out += [ClassifierSpec(kind, trees=t) for t in COUNT_GRID]
        elif kind is Kind.KNN:
            out += [ClassifierSpec(kind, k=k) for k in COUNT_GRID]
        else:
            out.append(ClassifierSpec(kind))
    return out


class HarnessError(FraudBenchError):
    pass


def derive_seed(master_seed: int, *key: int) -> int:
    """Counter-based child seed: a pure function of the master seed and ``key``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# ---------------------------------------------------------------- config


def _sample_from_dict(d):
    d = dict(d)
    method = d.pop("method")
    method = "undersample" if method == "under" else method
    allowed = {"fraud_ratio", "target_size", "k_neighbors"}
    unknown = set(d) - allowed
    if unknown:
        raise ParameterError(f"unknown sample keys: {sorted(unknown)}")
    return SampleSpec(method, **d)


def _sample_to_dict(s: SampleSpec):
    return {"method": s.method.value, "fraud_ratio": s.fraud_ratio, "target_size": s.target_size, "k_neighbors": s.k_neighbors}


def _classifier_from_dict(d):
    d = dict(d)
    if "c" in d:
        d["c_value"] = d.pop("c")
    allowed = {"kind", "penalty", "c_value", "trees", "k"}
    unknown = set(d) - allowed
    if unknown:
        raise ParameterError(f"unknown classifier keys: {sorted(unknown)}")
    return ClassifierSpec(**d)


def _classifier_to_dict(c: ClassifierSpec):
    return {"kind": c.kind.value, "penalty": c.penalty.value, "c": c.c_value, "trees": c.trees, "k": c.k}


@dataclass
class TestConfig:
    samples: list
    classifiers: list
    mc_iterations: int = 10
    data_path: Optional[str] = None
    synthetic: Optional[dict] = None
    sample_fraction: float = 0.2
    cost_model: CostModel = field(default_factory=CostModel)
    ga: Optional[GAConfig] = None
    ensemble_members: Optional[list] = None
    master_seed: int = 0
    output_dir: Optional[str] = None
    round_cap: int = 5
    drop_factor: float = 10.0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.mc_iterations < 1:
            raise ParameterError("mc_iterations must be >= 1")
        if not self.samples or not self.classifiers:
            raise ParameterError("sample and classifier grids must be non-empty")
        if self.data_path is None and self.synthetic is None:
            self.synthetic = dict(DEFAULT_SYNTHETIC)
        if self.ga is not None and self.members is None:
            raise ParameterError("the ensemble needs members: none of LOG/SVC/RF configured")

    @property
    def members(self) -> Optional[list]:
        """Ensemble members: explicit, else the first LOG, SVC and RF classifiers."""
        if self.ensemble_members:
            return list(self.ensemble_members)
        picked = []
        for kind in (Kind.LOG, Kind.SVC, Kind.RF):
            match = next((c for c in self.classifiers if c.kind is kind), None)
            if match is not None:
                picked.append(match)
        return picked if len(picked) >= 2 else None

    def load(self) -> Dataset:
        if self.data_path is not None:
            return load_dataset(self.data_path)
        s = {**DEFAULT_SYNTHETIC, **self.synthetic}
        return generate_synthetic(int(s["n"]), float(s["fraud_rate"]), int(s["seed"]))

    def to_dict(self) -> dict:
        return {
            "data_path": self.data_path,
            "synthetic": self.synthetic,
            "sample_fraction": self.sample_fraction,
            "samples": [_sample_to_dict(s) for s in self.samples],
            "classifiers": [_classifier_to_dict(c) for c in self.classifiers],
            "mc_iterations": self.mc_iterations,
            "cost_model": asdict(self.cost_model),
            "ga": None if self.ga is None else {k: v for k, v in asdict(self.ga).items() if k != "seed"},
            "ensemble_members": None if self.ensemble_members is None else [_classifier_to_dict(c) for c in self.ensemble_members],
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "round_cap": self.round_cap,
            "drop_factor": self.drop_factor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        d["samples"] = [_sample_from_dict(s) for s in d.get("samples", [])]
        d["classifiers"] = [_classifier_from_dict(c) for c in d.get("classifiers", [])]
        if d.get("ensemble_members") is not None:
            d["ensemble_members"] = [_classifier_from_dict(c) for c in d["ensemble_members"]]
        if d.get("cost_model") is not None:
            d["cost_model"] = CostModel(**d["cost_model"])
        else:
            d.pop("cost_model", None)
        if d.get("ga") is not None:
            d["ga"] = GAConfig(**d["ga"])
        return cls(**d)


# ---------------------------------------------------------------- rows


@dataclass
class ResultRow:
    iteration: int
    attempt: int
    sample: str
    sample_method: str
    target_size: int
    fraud_ratio: float
    sample_size: int
    achieved_ratio: float
    model: str
    kind: str
    penalty: str
    c: Optional[float]
    trees: Optional[int]
    k: Optional[int]
    counts: ConfusionCounts
    metrics: dict
    cost: float
    weights: str = ""
    wall_time: float = 0.0

    @property
    def combination(self) -> tuple:
        return (self.sample, self.model)


RESULT_COLUMNS = (
    ("iteration", "attempt", "sample", "sample_method", "target_size", "fraud_ratio",
     "sample_size", "achieved_ratio", "model", "kind", "penalty", "c", "trees", "k",
     "tp", "fp", "tn", "fn")
    + METRIC_NAMES
    + ("cost", "weights")
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def row_to_record(row: ResultRow) -> list[str]:
    values = {**asdict(row), **asdict(row.counts), **row.metrics}
    return [_fmt(values[c]) for c in RESULT_COLUMNS]


def row_from_record(rec: dict) -> ResultRow:
    def opt(conv, v):
        return None if v == "" else conv(v)

    counts = ConfusionCounts(*(int(rec[n]) for n in ("tp", "fp", "tn", "fn")))
    return ResultRow(
        iteration=int(rec["iteration"]),
        attempt=int(rec["attempt"]),
        sample=rec["sample"],
        sample_method=rec["sample_method"],
        target_size=int(rec["target_size"]),
        fraud_ratio=float(rec["fraud_ratio"]),
        sample_size=int(rec["sample_size"]),
        achieved_ratio=float(rec["achieved_ratio"]),
        model=rec["model"],
        kind=rec["kind"],
        penalty=rec["penalty"],
        c=opt(float, rec["c"]),
        trees=opt(int, rec["trees"]),
        k=opt(int, rec["k"]),
        counts=counts,
        metrics={m: opt(float, rec[m]) for m in METRIC_NAMES},
        cost=float(rec["cost"]),
        weights=rec["weights"],
    )


def _evaluate(labels, eval_set, cm):
    counts = confusion(labels, eval_set.label)
    cost = fraud_cost_micros(labels, eval_set.label, eval_set.amount, cm) / MICRO
    return counts, derive_metrics(counts).as_dict(), cost


def _row(it, attempt, sspec, sample, model_label, cspec, counts, metrics, cost, **extra):
    hp = cspec.hyperparameters if cspec is not None else {}
    return ResultRow(
        iteration=it,
        attempt=attempt,
        sample=sspec.label,
        sample_method=sspec.method.value,
        target_size=sspec.target_size,
        fraud_ratio=sspec.fraud_ratio,
        sample_size=len(sample),
        achieved_ratio=sample.achieved_ratio,
        model=model_label,
        kind=cspec.kind.value if cspec is not None else ENSEMBLE,
        penalty=hp.get("penalty", ""),
        c=hp.get("c"),
        trees=hp.get("trees"),
        k=hp.get("k"),
        counts=counts,
        metrics=metrics,
        cost=cost,
        **extra,
    )


def run_iteration(cfg: TestConfig, dataset: Dataset, it: int, attempt: int = 0):
    """One Monte Carlo cycle; returns (rows, ensemble traces)."""
    seed = lambda *key: derive_seed(cfg.master_seed, it, attempt, *key)  # noqa: E731
    part = partition(dataset, cfg.sample_fraction, seed(0))
    rows, traces = [], []
    for j, sspec in enumerate(cfg.samples):
        sample = build_sample(part.sample_pool, sspec.with_seed(seed(1, j)))
        eval_set = Dataset.concat([part.test_pool, sample.leftover])
        for c, cspec in enumerate(cfg.classifiers):
            t0 = time.perf_counter()
            model = train(cspec.with_seed(seed(2, j, c)), sample)
            labels = predict_scores(model, eval_set) >= THRESHOLD
            counts, metrics, cost = _evaluate(labels, eval_set, cfg.cost_model)
            rows.append(
                _row(it, attempt, sspec, sample, cspec.label, cspec, counts, metrics, cost,
                     wall_time=time.perf_counter() - t0)
            )
        if cfg.ga is not None:
            t0 = time.perf_counter()
            members = [m.with_seed(seed(3, j, i)) for i, m in enumerate(cfg.members)]
            evo = evolve(members, sample, replace(cfg.ga, seed=seed(4, j)), cfg.cost_model)
            labels = evo.scores(eval_set) >= THRESHOLD
            counts, metrics, cost = _evaluate(labels, eval_set, cfg.cost_model)
            rows.append(
                _row(it, attempt, sspec, sample, ENSEMBLE, None, counts, metrics, cost,
                     weights=";".join(map(str, evo.genome.weights)),
                     wall_time=time.perf_counter() - t0)
            )
            traces.append({"iteration": it, "sample": sspec.label, "trace": evo.trace})
    return rows, traces


@dataclass
class RunResult:
    rows: list
    master: dict
    traces: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def run_test(cfg: TestConfig, dataset: Dataset | None = None) -> RunResult:
    """Run ``cfg.mc_iterations`` Monte Carlo iterations and aggregate them.

    An iteration hitting a degenerate draw (a pool or split without fraud) is
    retried with the next attempt's seeds, at most ``MAX_RETRIES`` times.
    """
    dataset = dataset if dataset is not None else cfg.load()
    rows, traces, failures = [], [], []
    for it in range(cfg.mc_iterations):
        for attempt in range(MAX_RETRIES + 1):
            try:
                it_rows, it_traces = run_iteration(cfg, dataset, it, attempt)
            except DegenerateError as exc:
                log.warning("iteration %d attempt %d degenerate: %s", it, attempt, exc)
                failures.append({"iteration": it, "attempt": attempt, "error": str(exc)})
                continue
            rows += it_rows
            traces += it_traces
            break
        else:
            summary = "; ".join(f"attempt {f['attempt']}: {f['error']}" for f in failures if f["iteration"] == it)
            raise HarnessError(f"iteration {it} failed {MAX_RETRIES + 1} times ({summary})")
        log.info("iteration %d/%d done", it + 1, cfg.mc_iterations)
    master = build_master_log(rows, cfg, failures)
    return RunResult(rows, master, traces, failures)


# ---------------------------------------------------------------- aggregation


def _stats(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None, 0
    mean = math.fsum(vals) / len(vals)
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)) if len(vals) > 1 else 0.0
    return mean, std, len(vals)


def aggregate(rows) -> list[dict]:
    """Per (sample, model) means and sample standard deviations, in first-seen order."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(r.combination, []).append(r)
    out = []
    for (sample, model), rs in groups.items():
        first = rs[0]
        entry = {
            "sample": sample,
            "model": model,
            "kind": first.kind,
            "control": first.kind in {k.value for k in CONTROL_KINDS},
            "n": len(rs),
            "mean": {},
            "std": {},
            "defined": {},
        }
        series = {"cost": [r.cost for r in rs]}
        for name in ("tp", "fp", "tn", "fn"):
            series[name] = [getattr(r.counts, name) for r in rs]
        for name in METRIC_NAMES:
            series[name] = [r.metrics[name] for r in rs]
        for name, vals in series.items():
            mean, std, n = _stats(vals)
            entry["mean"][name] = mean
            entry["std"][name] = std
            entry["defined"][name] = n
        out.append(entry)
    return out


def _environment():
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine(),
    }


def build_master_log(rows, cfg: TestConfig | None = None, failures=()) -> dict:
    combos = aggregate(rows)
    best = {}
    if combos:
        by_cost = min(combos, key=lambda e: e["mean"]["cost"])
        best["cost"] = {"sample": by_cost["sample"], "model": by_cost["model"], "mean": by_cost["mean"]["cost"]}
        with_f1 = [e for e in combos if e["mean"]["f1"] is not None]
        if with_f1:
            by_f1 = max(with_f1, key=lambda e: e["mean"]["f1"])
            best["f1"] = {"sample": by_f1["sample"], "model": by_f1["model"], "mean": by_f1["mean"]["f1"]}
    genomes = [
        {"iteration": r.iteration, "sample": r.sample, "weights": [int(w) for w in r.weights.split(";")]}
        for r in rows
        if r.model == ENSEMBLE and r.weights
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict() if cfg is not None else None,
        "rows": len(rows),
        "combinations": combos,
        "best": best,
        "ensemble_genomes": genomes,
        "retries": list(failures),
        "environment": _environment(),
    }


# ---------------------------------------------------------------- bootstrap search


@dataclass
class SearchResult:
    sample: SampleSpec
    params: dict  # Kind -> ClassifierSpec
    converged: bool
    rounds: int
    dropped: list
    history: list


def monte_carlo_evaluator(cfg: TestConfig, dataset: Dataset) -> Callable:
    """Evaluator for :func:`bootstrap_search` backed by :func:`run_test` (no ensemble)."""

    def evaluate(samples, classifiers):
        sub = replace(cfg, samples=list(samples), classifiers=list(classifiers), ga=None, ensemble_members=None)
        result = run_test(sub, dataset)
        return {(e["sample"], e["model"]): e["mean"]["cost"] for e in result.master["combinations"]}

    return evaluate


def _drop_outliers(kinds, current, sample_grid, costs, factor):
    """Kinds whose mean cost is >= factor x |median| for every sampling method present."""
    methods = sorted({s.method for s in sample_grid}, key=lambda m: m.value)
    means = {}
    for m in methods:
        specs = [s for s in sample_grid if s.method is m]
        means[m] = {k: float(np.mean([costs[(s.label, current[k].label)] for s in specs])) for k in kinds}
    dropped = []
    for k in kinds:
        outlier = True
        for m in methods:
            med = median(means[m].values())
            if not (means[m][k] > 0 and means[m][k] >= factor * abs(med)):
                outlier = False
        if outlier:
            dropped.append(k)
    if len(dropped) == len(kinds):
        return []
    return dropped


def bootstrap_search(cfg: TestConfig, evaluate: Callable | None = None, dataset: Dataset | None = None) -> SearchResult:
    """Alternate between picking the best sample and the best per-model parameters.

    Phase (a) scores every sample in ``cfg.samples`` with the current
    parameters and keeps the one with the lowest mean cost across the active
    models; phase (b) scores every parameter setting in ``cfg.classifiers`` on
    that sample and keeps the cheapest per model. Stops once phase (b) returns
    the parameters phase (a) used, or after ``cfg.round_cap`` rounds.

    ``evaluate(samples, classifiers)`` must return mean cost keyed by
    ``(sample.label, classifier.label)``; it defaults to Monte Carlo runs.
    """
    if evaluate is None:
        evaluate = monte_carlo_evaluator(cfg, dataset if dataset is not None else cfg.load())
    grid = {}
    for spec in cfg.classifiers:
        grid.setdefault(spec.kind, []).append(spec)
    current = {}
    for kind, specs in grid.items():
        default = DEFAULT_PARAMS[kind]
        current[kind] = next((s for s in specs if s.label == default.label), specs[0])
    active = list(grid)
    dropped: list = []
    history = []
    chosen = None
    converged = False
    rounds = 0
    for rounds in range(1, cfg.round_cap + 1):
        costs = evaluate(cfg.samples, [current[k] for k in active])
        for k in _drop_outliers(active, current, cfg.samples, costs, cfg.drop_factor):
            active.remove(k)
            dropped.append(k.value)
            log.info("dropping outlier model %s", k.value)
        sample_cost = {
            s.label: float(np.mean([costs[(s.label, current[k].label)] for k in active])) for s in cfg.samples
        }
        chosen = min(cfg.samples, key=lambda s: sample_cost[s.label])
        costs_b = evaluate([chosen], [s for k in active for s in grid[k]])
        new = {k: min(grid[k], key=lambda s: costs_b[(chosen.label, s.label)]) for k in active}
        history.append(
            {
                "round": rounds,
                "sample": chosen.label,
                "sample_costs": sample_cost,
                "params": {k.value: s.label for k, s in new.items()},
            }
        )
        if all(new[k].label == current[k].label for k in active):
            converged = True
            current.update(new)
            break
        current.update(new)
    return SearchResult(chosen, {k: current[k] for k in active}, converged, rounds, dropped, history)
