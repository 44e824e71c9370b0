"""Batch front-end: run scenarios with repetitions, compare policies over a
shared seed schedule, self-benchmark, and generate or check trace files.

Per-run report rows are byte-reproducible regardless of parallelism, so
wall-clock timings go to a separate timings file instead of the report rows.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import multiprocessing
import resource
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .catalog import CatalogError, builtin_ec2_catalog
from .engine import Scenario, SimulationError, run_simulation, _resolve_workload
from .metrics import MetricReport, confidence_interval, summarize
from .policies import PowerScheme
from .scenario import SCHEMA, ScenarioError, load_scenario
from .workload import TraceError, WorkloadSpec, read_trace, write_trace

__all__ = ["RunPlan", "cmd_run", "cmd_compare", "cmd_bench", "main", "bench_scenario"]

REPORT_COLUMNS = ("seed", "policy", "scheme", "workload_hash") + MetricReport.SCALAR_FIELDS
EVENT_LOG_HEADER = ("time", "event_kind", "request_id", "pm_id", "detail")

_USER_ERRORS = (ScenarioError, CatalogError, TraceError, SimulationError, ValueError, OSError)


@dataclass
class RunPlan:
    """What to execute and where to put the outputs."""

    scenario_path: Path
    repetitions: int | None = None
    seed: int | None = None
    out_dir: Path = Path("sim_out")
    jobs: int = 1
    emit_csv: bool = True
    emit_json: bool = False
    emit_event_log: bool = False

    def __post_init__(self):
        self.scenario_path = Path(self.scenario_path)
        self.out_dir = Path(self.out_dir)
        if self.repetitions is not None and self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def _run_one(scenario: Scenario, seed: int) -> dict:
    """Execute one seeded run; returns the flat report row plus side outputs."""
    sc = replace(scenario, seed=seed)
    requests = tuple(_resolve_workload(sc))
    workload_hash = hashlib.sha256(write_trace(requests).encode()).hexdigest()[:16]
    sc = replace(sc, workload=requests)
    result = run_simulation(sc)
    report = summarize(result, sc.power_scheme, sc.pricing, sc.ilb_variant)
    row = {"seed": seed, "policy": sc.policy, "scheme": sc.power_scheme.name,
           "workload_hash": workload_hash}
    row.update(report.as_flat_dict())
    return {
        "row": row,
        "json": report.to_json(),
        "wall_s": result.wall_time_s,
        "event_log": result.event_log,
    }


def _execute(scenario: Scenario, seeds: list[int], jobs: int) -> list[dict]:
    """Run all seeds, possibly in parallel; outputs come back sorted by seed."""
    if jobs <= 1 or len(seeds) <= 1:
        outs = [_run_one(scenario, s) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(seeds))) as pool:
            futures = [pool.submit(_run_one, scenario, s) for s in seeds]
            outs = [f.result() for f in futures]
    outs.sort(key=lambda o: o["row"]["seed"])
    return outs


def _csv_cell(value) -> str:
    return "" if value is None else str(value)


def _write_reports_csv(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_csv_cell(row[c]) for c in REPORT_COLUMNS])


def _numeric_columns(rows: list[dict]) -> list[str]:
    out = []
    for col in REPORT_COLUMNS:
        if col == "seed":  # run key, not a metric
            continue
        values = [row[col] for row in rows]
        if all(isinstance(v, (int, float)) for v in values):
            out.append(col)
    return out


def _aggregate(rows: list[dict]) -> list[dict]:
    """Mean and 95% confidence bounds per numeric metric; CI fields stay empty
    with fewer than two runs."""
    out = []
    for col in _numeric_columns(rows):
        values = [row[col] for row in rows]
        if len(values) >= 2:
            mean, s, lo, hi = confidence_interval(values)
            out.append({"metric": col, "n": len(values), "mean": mean,
                        "std": s, "ci_lo": lo, "ci_hi": hi})
        else:
            out.append({"metric": col, "n": 1, "mean": float(values[0]),
                        "std": None, "ci_lo": None, "ci_hi": None})
    return out


def _write_aggregate_csv(path: Path, agg: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "n", "mean", "std", "ci_lo", "ci_hi"])
        for entry in agg:
            writer.writerow([_csv_cell(entry[k])
                             for k in ("metric", "n", "mean", "std", "ci_lo", "ci_hi")])


def _write_event_log(path: Path, log: list[tuple]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_LOG_HEADER)
        for entry in log:
            writer.writerow([_csv_cell(v) for v in entry])


def cmd_run(plan: RunPlan) -> int:
    """Execute a scenario's repetitions and write per-run plus aggregate reports."""
    scenario = load_scenario(plan.scenario_path, keep_event_log=plan.emit_event_log)
    reps = plan.repetitions or scenario.repetitions
    base = plan.seed if plan.seed is not None else scenario.seed
    seeds = [base + j for j in range(reps)]
    outs = _execute(scenario, seeds, plan.jobs)
    rows = [o["row"] for o in outs]

    plan.out_dir.mkdir(parents=True, exist_ok=True)
    if plan.emit_csv:
        _write_reports_csv(plan.out_dir / "reports.csv", rows)
        _write_aggregate_csv(plan.out_dir / "aggregate.csv", _aggregate(rows))
    if plan.emit_json:
        payload = "[\n" + ",\n".join(o["json"] for o in outs) + "\n]\n"
        (plan.out_dir / "reports.json").write_text(payload)
        (plan.out_dir / "aggregate.json").write_text(
            json.dumps(_aggregate(rows), indent=2, sort_keys=True) + "\n")
    with (plan.out_dir / "timings.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seed", "wall_s"])
        for o in outs:
            writer.writerow([o["row"]["seed"], f"{o['wall_s']:.6f}"])
    if plan.emit_event_log:
        for o in outs:
            if o["event_log"] is not None:
                _write_event_log(plan.out_dir / f"events_seed{o['row']['seed']}.csv",
                                 o["event_log"])

    agg = {entry["metric"]: entry["mean"] for entry in _aggregate(rows)}
    print(f"ran {reps} repetition(s) of {plan.scenario_path} "
          f"(policy={scenario.policy}, scheme={scenario.power_scheme.name})")
    print(f"  mean e_cdc_j={agg.get('e_cdc_j'):.6g} "
          f"ibl_avg_cdc={agg.get('ibl_avg_cdc'):.6g} "
          f"rejection_rate={agg.get('rejection_rate'):.6g} "
          f"migrations={agg.get('migrations'):.6g}")
    print(f"  reports in {plan.out_dir}")
    return 0


def cmd_compare(plan: RunPlan, policies: list[str]) -> int:
    """Run several policies over the identical seed schedule and tabulate the
    aggregate of every numeric metric per policy."""
    scenario = load_scenario(plan.scenario_path, keep_event_log=False)
    reps = plan.repetitions or scenario.repetitions
    base = plan.seed if plan.seed is not None else scenario.seed
    seeds = [base + j for j in range(reps)]

    table: list[dict] = []
    numeric: list[str] = []
    for name in policies:
        sc = replace(scenario, policy=name)
        outs = _execute(sc, seeds, plan.jobs)
        rows = [o["row"] for o in outs]
        hashes = {row["workload_hash"] for row in rows}
        entry = {"policy": name, "n_runs": len(rows),
                 "workload_hash": ";".join(sorted(hashes))}
        numeric = _numeric_columns(rows)
        for agg in _aggregate(rows):
            entry[f"{agg['metric']}_mean"] = agg["mean"]
            entry[f"{agg['metric']}_ci_lo"] = agg["ci_lo"]
            entry[f"{agg['metric']}_ci_hi"] = agg["ci_hi"]
        table.append(entry)

    plan.out_dir.mkdir(parents=True, exist_ok=True)
    columns = ["policy", "n_runs", "workload_hash"]
    for col in numeric:
        columns += [f"{col}_mean", f"{col}_ci_lo", f"{col}_ci_hi"]
    with (plan.out_dir / "compare.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for entry in table:
            writer.writerow([_csv_cell(entry.get(c)) for c in columns])

    print(f"compared {len(policies)} policies over seeds {seeds[0]}..{seeds[-1]}")
    for entry in table:
        print(f"  {entry['policy']:>10}: ibl_avg_cdc={entry['ibl_avg_cdc_mean']:.6g} "
              f"e_cdc_j={entry['e_cdc_j_mean']:.6g} "
              f"rejection_rate={entry['rejection_rate_mean']:.6g}")
    print(f"  table in {plan.out_dir / 'compare.csv'}")
    return 0


def bench_scenario(n_requests: int, n_pms: int, seed: int = 1) -> Scenario:
    """A standard self-benchmark scenario: scalar-mode requests at roughly 60%
    offered load on a homogeneous fleet."""
    catalog = builtin_ec2_catalog()
    spec = WorkloadSpec(
        count=n_requests,
        arrival_rate=n_pms / 25.0,
        mean_duration=50.0,
        max_duration=500.0,
        type_mix={tid: 1.0 / 8 for tid in catalog.vm_ids()},
        capacity_range=(0.1, 0.5),
    )
    return Scenario(
        catalog=catalog,
        pm_fleet=((1, n_pms),),
        workload=spec,
        slot_length=5.0,
        policy="lif",
        power_scheme=PowerScheme("linear"),
        seed=seed,
    )


def _bench_child(conn, n_requests: int, n_pms: int) -> None:
    t0 = time.perf_counter()
    result = run_simulation(bench_scenario(n_requests, n_pms))
    wall = time.perf_counter() - t0
    peak_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    conn.send({"wall_s": wall, "peak_mem_mb": peak_kb / 1024.0,
               "accepted": result.accepted_count})
    conn.close()


def run_bench_size(n_requests: int, n_pms: int) -> dict:
    """Run one bench size in a fresh process and report wall time and the
    child's peak resident memory (approximate, from OS process accounting)."""
    ctx = multiprocessing.get_context("fork")
    parent, child = ctx.Pipe()
    proc = ctx.Process(target=_bench_child, args=(child, n_requests, n_pms))
    proc.start()
    payload = parent.recv()
    proc.join()
    payload.update({"n_requests": n_requests, "n_pms": n_pms})
    return payload


def cmd_bench(sizes: list[tuple[int, int]], out_dir: Path) -> int:
    """Benchmark wall time and peak memory across problem sizes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for n_requests, n_pms in sizes:
        payload = run_bench_size(n_requests, n_pms)
        rows.append(payload)
        print(f"  {n_requests} requests x {n_pms} PMs: "
              f"{payload['wall_s']:.2f} s, {payload['peak_mem_mb']:.0f} MB peak")
    with (out_dir / "bench.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n_requests", "n_pms", "wall_s", "peak_mem_mb_approx"])
        for row in rows:
            writer.writerow([row["n_requests"], row["n_pms"],
                             f"{row['wall_s']:.6f}", f"{row['peak_mem_mb']:.1f}"])
    print(f"  bench table in {out_dir / 'bench.csv'}")
    return 0


def cmd_trace_gen(scenario_path: Path, out: Path | None, seed: int | None) -> int:
    scenario = load_scenario(scenario_path)
    sc = replace(scenario, seed=seed) if seed is not None else scenario
    requests = _resolve_workload(sc)
    text = write_trace(requests)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        print(f"wrote {len(requests)} requests to {out}")
    return 0


def cmd_trace_check(trace_path: Path) -> int:
    requests = read_trace(Path(trace_path).read_text())
    scalar = sum(1 for r in requests if r.capacity is not None)
    mode = "scalar" if scalar == len(requests) and requests else "multi-dimensional"
    if 0 < scalar < len(requests):
        raise TraceError("trace mixes scalar and multi-dimensional requests")
    print(f"OK: {len(requests)} requests ({mode} mode)")
    return 0


def _parse_sizes(raw: str) -> list[tuple[int, int]]:
    sizes = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            req_s, pm_s = part.lower().split("x")
            sizes.append((int(req_s), int(pm_s)))
        except ValueError:
            raise ValueError(f"bad size {part!r}; expected <requests>x<pms>") from None
    if not sizes:
        raise ValueError("no sizes given")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Discrete-event simulator for VM scheduling in IaaS datacenters.")
    parser.add_argument("--print-schema", action="store_true",
                        help="print the scenario file schema and exit")
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run a scenario with repetitions")
    run_p.add_argument("scenario", type=Path)
    run_p.add_argument("--reps", type=int, default=None, help="override repetitions")
    run_p.add_argument("--seed", type=int, default=None, help="override base seed")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    run_p.add_argument("--out", type=Path, default=Path("sim_out"))
    run_p.add_argument("--format", choices=("csv", "json"), default="csv")
    run_p.add_argument("--event-log", action="store_true",
                       help="also write per-run event logs")

    cmp_p = sub.add_parser("compare", help="compare policies over shared seeds")
    cmp_p.add_argument("scenario", type=Path)
    cmp_p.add_argument("--policies", required=True,
                       help="comma-separated policy names")
    cmp_p.add_argument("--reps", type=int, default=None)
    cmp_p.add_argument("--seed", type=int, default=None)
    cmp_p.add_argument("--jobs", type=int, default=1)
    cmp_p.add_argument("--out", type=Path, default=Path("sim_out"))

    bench_p = sub.add_parser("bench", help="self-benchmark wall time and memory")
    bench_p.add_argument("--sizes", required=True,
                         help="comma-separated <requests>x<pms> sizes, e.g. 1000x100")
    bench_p.add_argument("--out", type=Path, default=Path("sim_out"))

    trace_p = sub.add_parser("trace", help="generate or check trace files")
    trace_sub = trace_p.add_subparsers(dest="trace_command", required=True)
    gen_p = trace_sub.add_parser("gen", help="generate a trace from a scenario")
    gen_p.add_argument("scenario", type=Path)
    gen_p.add_argument("--out", type=Path, default=None)
    gen_p.add_argument("--seed", type=int, default=None)
    chk_p = trace_sub.add_parser("check", help="validate a trace file")
    chk_p.add_argument("trace", type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_schema:
        print(SCHEMA, end="")
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "run":
            plan = RunPlan(args.scenario, args.reps, args.seed, args.out, args.jobs,
                           emit_csv=args.format == "csv",
                           emit_json=args.format == "json",
                           emit_event_log=args.event_log)
            return cmd_run(plan)
        if args.command == "compare":
            plan = RunPlan(args.scenario, args.reps, args.seed, args.out, args.jobs)
            policies = [p.strip() for p in args.policies.split(",") if p.strip()]
            if not policies:
                raise ValueError("no policies given")
            return cmd_compare(plan, policies)
        if args.command == "bench":
            return cmd_bench(_parse_sizes(args.sizes), args.out)
        if args.command == "trace":
            if args.trace_command == "gen":
                return cmd_trace_gen(args.scenario, args.out, args.seed)
            return cmd_trace_check(args.trace)
    except _USER_ERRORS as exc:
        print(f"sim: error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
