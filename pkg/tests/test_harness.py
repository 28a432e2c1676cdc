import json
import math

import numpy as np
import pytest

from fraudbench.classifiers import ClassifierSpec, Kind, Penalty
from fraudbench.cli import main
from fraudbench.data import generate_synthetic, write_dataset
from fraudbench.ensemble import GAConfig
from fraudbench.errors import ParameterError
from fraudbench.harness import (
    ENSEMBLE,
    MAX_RETRIES,
    HarnessError,
    TestConfig,
    bootstrap_search,
    classifier_grid,
    derive_seed,
    run_test,
    undersample_grid,
)
from fraudbench.report import RESULTS, emit_report, parse_summary, read_results, render_summary
from fraudbench.sampling import Method, SampleSpec

SYN = {"n": 4000, "fraud_rate": 0.02, "seed": 1}
UNDER = SampleSpec(Method.UNDERSAMPLE, 0.3)
LOG = ClassifierSpec(Kind.LOG, Penalty.L1, 0.5)


def cfg(**kw):
    base = dict(samples=[UNDER], classifiers=[LOG], mc_iterations=1, synthetic=SYN)
    base.update(kw)
    return TestConfig(**base)


def test_single_row():
    res = run_test(cfg())
    assert len(res.rows) == 1
    assert res.rows[0].model == "LOG(l1,0.5)"
    assert res.master["rows"] == 1


def test_row_cardinality_with_ensemble():
    classifiers = [LOG, ClassifierSpec(Kind.SVC, Penalty.L1, 0.5), ClassifierSpec(Kind.RF, trees=5), ClassifierSpec(Kind.GNB)]
    samples = [UNDER, SampleSpec(Method.SMOTE, 0.5, 500)]
    res = run_test(cfg(samples=samples, classifiers=classifiers, mc_iterations=2, ga=GAConfig(population_size=6, generations=2)))
    assert len(res.rows) == 2 * 2 * (4 + 1)
    assert sum(r.model == ENSEMBLE for r in res.rows) == 4
    assert len(res.master["ensemble_genomes"]) == 4


def test_evaluation_set_size():
    ds = generate_synthetic(**{"n": 4000, "fraud_rate": 0.02, "seed": 1})
    res = run_test(cfg(), ds)
    r = res.rows[0]
    # test pool plus the sample pool records the sampler left unused
    assert r.counts.total == len(ds) - r.sample_size


def test_mean_matches_rows():
    res = run_test(cfg(mc_iterations=4))
    costs = [r.cost for r in res.rows]
    entry = res.master["combinations"][0]
    assert entry["mean"]["cost"] == pytest.approx(sum(costs) / 4)
    assert entry["std"]["cost"] == pytest.approx(np.std(costs, ddof=1))


def test_run_deterministic():
    a, b = run_test(cfg(mc_iterations=2)), run_test(cfg(mc_iterations=2))
    assert [r.cost for r in a.rows] == [r.cost for r in b.rows]
    c = run_test(cfg(mc_iterations=2, master_seed=9))
    assert [r.cost for r in a.rows] != [r.cost for r in c.rows]


def test_derive_seed_distinct():
    seeds = {derive_seed(0, it, 0, 1, j) for it in range(20) for j in range(5)}
    assert len(seeds) == 100
    assert derive_seed(3, 1, 2) == derive_seed(3, 1, 2)


def test_retries_exhausted():
    # 12 records with a single fraud: every partition leaves one pool without fraud
    with pytest.raises(HarnessError) as exc:
        run_test(cfg(synthetic={"n": 12, "fraud_rate": 0.08, "seed": 0}))
    assert "attempt" in str(exc.value)


def test_retries_logged():
    res = run_test(cfg(mc_iterations=6, synthetic={"n": 400, "fraud_rate": 0.02, "seed": 0}, sample_fraction=0.5))
    assert len(res.rows) == 6
    assert all(f["attempt"] <= MAX_RETRIES for f in res.master["retries"])


def test_undersample_grid_ratios():
    assert [s.fraud_ratio for s in undersample_grid()] == [0.1, 0.2, 0.3, 0.4, 0.5]


def test_classifier_grid_covers_kinds():
    kinds = {c.kind for c in classifier_grid()}
    assert kinds == set(Kind)


def table_evaluator(table, calls=None):
    def evaluate(samples, classifiers):
        if calls is not None:
            calls.append((len(samples), len(classifiers)))
        return {(s.label, c.label): table(s, c) for s in samples for c in classifiers}

    return evaluate


def test_bootstrap_singleton_grid():
    c = cfg()
    res = bootstrap_search(c, table_evaluator(lambda s, k: -1.0))
    assert res.converged and res.rounds == 1
    assert res.sample == UNDER and res.params[Kind.LOG] == LOG


def test_bootstrap_finds_planted_combination():
    samples = undersample_grid()
    classifiers = [ClassifierSpec(Kind.LOG, p, cv) for p in Penalty for cv in (0.5, 1.0, 5.0)]
    classifiers += [ClassifierSpec(Kind.RF, trees=t) for t in (10, 40, 80)]
    planted = {("under(r=0.2)", "LOG(l1,5)"): -100.0, ("under(r=0.2)", "RF(40)"): -100.0}

    def table(s, c):
        if s.label == "under(r=0.2)":
            return planted.get((s.label, c.label), 0.0)
        return 1.0 + s.fraud_ratio

    res = bootstrap_search(cfg(samples=samples, classifiers=classifiers), table_evaluator(table))
    assert res.converged
    assert res.sample.label == "under(r=0.2)"
    assert res.params[Kind.LOG].label == "LOG(l1,5)"
    assert res.params[Kind.RF].label == "RF(40)"


def test_bootstrap_drops_outlier():
    classifiers = [LOG, ClassifierSpec(Kind.RF, trees=10), ClassifierSpec(Kind.KNN, k=5)]

    def table(s, c):
        return {"KNN(5)": 5000.0}.get(c.label, -100.0)

    res = bootstrap_search(cfg(classifiers=classifiers), table_evaluator(table))
    assert res.dropped == ["KNN"]
    assert Kind.KNN not in res.params


def test_bootstrap_round_cap():
    samples = undersample_grid()[:2]
    classifiers = [ClassifierSpec(Kind.LOG, Penalty.L2, 1.0), ClassifierSpec(Kind.LOG, Penalty.L1, 0.5)]
    state = {"n": 0}

    def evaluate(samples_, classifiers_):
        state["n"] += 1
        # flip the preferred parameters on every call so nothing settles
        good = "LOG(l1,0.5)" if state["n"] % 4 == 2 else "LOG(l2,1)"
        return {(s.label, c.label): (-1.0 if c.label == good else 0.0) for s in samples_ for c in classifiers_}

    res = bootstrap_search(cfg(samples=samples, classifiers=classifiers, round_cap=3), evaluate)
    assert res.rounds <= 3


def test_config_round_trip_and_unknown_keys():
    c = cfg(classifiers=[LOG, ClassifierSpec(Kind.RF, trees=5)], ga=GAConfig(generations=3))
    again = TestConfig.from_dict(json.loads(json.dumps(c.to_dict())))
    assert again.to_dict() == c.to_dict()
    with pytest.raises(ParameterError):
        TestConfig.from_dict({**c.to_dict(), "bogus": 1})


def test_config_validation():
    with pytest.raises(ParameterError):
        cfg(mc_iterations=0)
    with pytest.raises(ParameterError):
        cfg(classifiers=[])


def test_report_files(tmp_path):
    res = run_test(cfg(mc_iterations=3, classifiers=[LOG, ClassifierSpec(Kind.KNN, k=3)]))
    paths = emit_report(res.rows, res.master, tmp_path)
    lines = paths[RESULTS].read_text().splitlines()
    assert len(lines) == len(res.rows) + 1
    back = read_results(paths[RESULTS])
    assert [r.cost for r in back] == [r.cost for r in res.rows]
    parsed = parse_summary(paths["summary.md"].read_text())
    for e in res.master["combinations"]:
        cost, f1 = parsed[(e["sample"], e["model"])]
        assert cost == round(e["mean"]["cost"], 2)
        assert f1 == round(100 * e["mean"]["f1"], 2)
    assert "(control)" in paths["summary.md"].read_text()


def test_report_empty(tmp_path):
    from fraudbench.harness import build_master_log

    master = build_master_log([])
    paths = emit_report([], master, tmp_path)
    assert len(paths[RESULTS].read_text().splitlines()) == 1
    assert "Result rows: 0" in render_summary(master)


def test_cli_run_and_report(tmp_path, capsys):
    out = tmp_path / "r"
    code = main(["run", "--synthetic", "4000,0.02,1", "--model", "LOG", "--model", "GNB", "--iters", "2", "--out", str(out)])
    assert code == 0
    assert (out / "results.csv").exists() and (out / "master.json").exists()
    assert "LOG(l1,0.5)" in capsys.readouterr().out
    again = tmp_path / "again"
    assert main(["report", "--results", str(out / "results.csv"), "--out", str(again)]) == 0
    assert (again / "summary.md").read_text() == (out / "summary.md").read_text()


def test_cli_data_file(tmp_path):
    path = tmp_path / "d.csv"
    write_dataset(generate_synthetic(3000, 0.03, 2), path)
    assert main(["run", "--data", str(path), "--model", "GNB", "--iters", "1", "--out", str(tmp_path / "o")]) == 0


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"samples": [], "nonsense": 1}))
    assert main(["run", "--config", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_search(tmp_path, capsys):
    conf = cfg(mc_iterations=1, classifiers=[LOG, ClassifierSpec(Kind.LOG, Penalty.L2, 1.0)]).to_dict()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(conf))
    code = main(["search", "--config", str(path), "--out", str(tmp_path)])
    assert code in (0, 3)
    doc = json.loads((tmp_path / "search.json").read_text())
    assert doc["sample"] == "under(r=0.3)"
    assert math.isfinite(len(doc["history"]))
