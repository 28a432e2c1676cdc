"""Command line front end: ``fraudbench run | search | report``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .classifiers import ClassifierSpec, Kind
from .ensemble import GAConfig
from .errors import FraudBenchError
from .harness import TUNED_PARAMS, TestConfig, bootstrap_search, run_test
from .report import emit_report, rerender
from .sampling import Method, SampleSpec

log = logging.getLogger("fraudbench")

_METHODS = {"simple": Method.SIMPLE, "under": Method.UNDERSAMPLE, "smote": Method.SMOTE}


def _synthetic(text):
    parts = text.split(",")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("expected N,RATE or N,RATE,SEED")
    try:
        spec = {"n": int(parts[0]), "fraud_rate": float(parts[1])}
        if len(parts) == 3:
            spec["seed"] = int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return spec


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fraudbench", description="Cost-sensitive fraud detection benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo run of one sample setup")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--data", metavar="PATH", help="creditcard CSV (Time,V1..V28,Amount,Class)")
    src.add_argument("--synthetic", metavar="N,RATE[,SEED]", type=_synthetic,
                     help="generate a synthetic dataset instead (default 50000,0.004)")
    run.add_argument("--config", metavar="FILE", help="JSON TestConfig; replaces the flags below")
    run.add_argument("--method", choices=sorted(_METHODS), default="under")
    run.add_argument("--size", type=int, default=1000, help="sample size (simple/smote)")
    run.add_argument("--ratio", type=float, default=0.3, help="fraud ratio (under/smote)")
    run.add_argument("--neighbors", type=int, default=5, help="SMOTE neighbor count")
    run.add_argument("--model", action="append", choices=[k.value for k in Kind],
                     help="classifier kind; repeat for several (default: all five)")
    run.add_argument("--penalty", choices=["l1", "l2"])
    run.add_argument("--c", type=float)
    run.add_argument("--trees", type=int)
    run.add_argument("--k", type=int)
    run.add_argument("--iters", type=int, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--ensemble", action="store_true", help="also evolve a GA ensemble of LOG/SVC/RF")
    budget = run.add_mutually_exclusive_group()
    budget.add_argument("--ga-seconds", type=float, default=60.0)
    budget.add_argument("--ga-generations", type=int)
    run.add_argument("--out", default="results", metavar="DIR")

    search = sub.add_parser("search", help="bootstrap search over sample and parameter grids")
    search.add_argument("--config", required=True, metavar="FILE")
    search.add_argument("--out", metavar="DIR", help="write search.json here")

    report = sub.add_parser("report", help="re-render master.json and summary.md from results.csv")
    report.add_argument("--results", required=True, metavar="PATH")
    report.add_argument("--master", metavar="PATH", help="existing master.json to keep the config echo from")
    report.add_argument("--out", metavar="DIR")
    return p


def _load_config(path) -> TestConfig:
    return TestConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def config_from_args(args) -> TestConfig:
    if args.config:
        return _load_config(args.config)
    method = _METHODS[args.method]
    sample = SampleSpec(method, args.ratio if method is not Method.SIMPLE else 0.5, args.size, args.neighbors)
    kinds = [Kind(m) for m in (args.model or [k.value for k in Kind])]
    classifiers = []
    for kind in kinds:
        base = TUNED_PARAMS[kind]
        classifiers.append(
            ClassifierSpec(
                kind,
                args.penalty or base.penalty,
                args.c if args.c is not None else base.c_value,
                args.trees or base.trees,
                args.k or base.k,
            )
        )
    ga = None
    if args.ensemble:
        ga = GAConfig(time_budget=args.ga_seconds, generations=args.ga_generations)
    return TestConfig(
        samples=[sample],
        classifiers=classifiers,
        mc_iterations=args.iters,
        data_path=args.data,
        synthetic=args.synthetic,
        ga=ga,
        master_seed=args.seed,
        output_dir=args.out,
    )


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    result = run_test(cfg)
    out = cfg.output_dir or args.out
    paths = emit_report(result.rows, result.master, out, result.traces)
    print((Path(out) / "summary.md").read_text(encoding="utf-8"))
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_search(args) -> int:
    cfg = _load_config(args.config)
    res = bootstrap_search(cfg)
    doc = {
        "sample": res.sample.label,
        "params": {k.value: s.label for k, s in res.params.items()},
        "converged": res.converged,
        "rounds": res.rounds,
        "dropped": res.dropped,
        "history": res.history,
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "search.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0 if res.converged else 3


def cmd_report(args) -> int:
    out = args.out or str(Path(args.results).parent)
    master_path = args.master or str(Path(args.results).parent / "master.json")
    rerender(args.results, out, master_path)
    print((Path(out) / "summary.md").read_text(encoding="utf-8"))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "search": cmd_search, "report": cmd_report}[args.command]
    try:
        return handler(args)
    except (FraudBenchError, OSError) as exc:
        print(f"fraudbench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
