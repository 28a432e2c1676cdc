"""Result files: results.csv, master.json, summary.md (and timings.csv)."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .harness import RESULT_COLUMNS, build_master_log, row_from_record, row_to_record

RESULTS = "results.csv"
MASTER = "master.json"
SUMMARY = "summary.md"
TIMINGS = "timings.csv"


def write_results(rows, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow(row_to_record(r))


def read_results(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [row_from_record(rec) for rec in csv.DictReader(fh)]


def _pct(v):
    return "n/a" if v is None else f"{100 * v:.2f}"


def _money(v):
    return "n/a" if v is None else f"{v:.2f}"


def render_summary(master: dict) -> str:
    """Markdown tables of mean/std cost and F1 per model, one table per sample."""
    lines = ["# Fraud detection benchmark summary", ""]
    lines.append(f"Result rows: {master['rows']}")
    lines.append("")
    by_sample: dict = {}
    for e in master["combinations"]:
        by_sample.setdefault(e["sample"], []).append(e)
    for sample, entries in by_sample.items():
        lines.append(f"## Sample {sample}")
        lines.append("")
        lines.append("| Model | Runs | Cost mean ($) | Cost std ($) | F1 mean (%) | F1 std (%) |")
        lines.append("|---|---:|---:|---:|---:|---:|")
        for e in entries:
            name = e["model"] + (" (control)" if e["control"] else "")
            lines.append(
                f"| {name} | {e['n']} | {_money(e['mean']['cost'])} | {_money(e['std']['cost'])} "
                f"| {_pct(e['mean']['f1'])} | {_pct(e['std']['f1'])} |"
            )
        lines.append("")
    best = master.get("best", {})
    if best:
        lines.append("## Best combinations")
        lines.append("")
        if "cost" in best:
            b = best["cost"]
            lines.append(f"- lowest mean cost: {b['model']} on {b['sample']} ({_money(b['mean'])})")
        if "f1" in best:
            b = best["f1"]
            lines.append(f"- highest mean F1: {b['model']} on {b['sample']} ({_pct(b['mean'])}%)")
        lines.append("")
    return "\n".join(lines)


def parse_summary(text: str) -> dict:
    """Read back ``{(sample, model): (cost_mean, f1_mean_pct)}`` from a rendered summary."""
    out = {}
    sample = None
    for line in text.splitlines():
        if line.startswith("## Sample "):
            sample = line[len("## Sample ") :]
        elif sample and line.startswith("| ") and not line.startswith("| Model"):
            cells = [c.strip() for c in line.strip("|").split("|")]
            model = cells[0].replace(" (control)", "")
            cost = None if cells[2] == "n/a" else float(cells[2])
            f1 = None if cells[4] == "n/a" else float(cells[4])
            out[(sample, model)] = (cost, f1)
    return out


def emit_report(rows, master: dict, out_dir, traces=None) -> dict:
    """Write every report file into ``out_dir``; returns name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in (RESULTS, MASTER, SUMMARY, TIMINGS)}
    write_results(rows, paths[RESULTS])
    paths[MASTER].write_text(json.dumps(master, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths[SUMMARY].write_text(render_summary(master), encoding="utf-8")
    with paths[TIMINGS].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "sample", "model", "wall_time"])
        for r in rows:
            w.writerow([r.iteration, r.sample, r.model, f"{r.wall_time:.6f}"])
    if traces:
        from .ensemble import write_trace

        trace_path = out / "ga_trace.csv"
        trace_path.unlink(missing_ok=True)
        for t in traces:
            tagged = [{**row, "generation": f"{t['iteration']}:{row['generation']}"} for row in t["trace"]]
            write_trace(tagged, trace_path, append=True)
        paths["ga_trace.csv"] = trace_path
    return paths


def rerender(results_path, out_dir, master_path=None) -> dict:
    """Rebuild master.json/summary.md from a results.csv (keeping any config echo)."""
    rows = read_results(results_path)
    master = build_master_log(rows)
    if master_path is not None and Path(master_path).exists():
        old = json.loads(Path(master_path).read_text(encoding="utf-8"))
        master["config"] = old.get("config")
        master["retries"] = old.get("retries", [])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / MASTER).write_text(json.dumps(master, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / SUMMARY).write_text(render_summary(master), encoding="utf-8")
    return master
