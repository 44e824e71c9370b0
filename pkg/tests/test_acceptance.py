"""Acceptance suite: one test per release criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v` for the per-criterion verdicts.
"""

import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from dcsim.catalog import builtin_ec2_catalog
from dcsim.cli import main as cli_main, run_bench_size
from dcsim.engine import Scenario, run_simulation
from dcsim.metrics import (
    UtilizationSnapshot,
    avg_imbalance_cdc,
    avg_imbalance_pm,
    avg_utilization,
    confidence_interval,
    pm_energy,
    resource_imbalance,
    server_imbalance,
    summarize,
    total_imbalance,
)
from dcsim.policies import PowerScheme, instantaneous_power
from dcsim.workload import WorkloadSpec

CAT = builtin_ec2_catalog()
UNIFORM_MIX = {t: 1.0 / 8 for t in CAT.vm_ids()}


def report(number: int, name: str) -> None:
    print(f"[acceptance] criterion {number} ({name}): PASS")


def mean_metric(values):
    return float(np.mean(values))


# -- criterion 1 -------------------------------------------------------------

def test_criterion_1_catalog_power_consistency():
    scheme = PowerScheme("linear", k=0.7)
    started = time.perf_counter()
    for pm in CAT.pm_types:
        assert Fraction(7, 10) * Fraction(pm.p_max) == Fraction(pm.p_min)
        assert instantaneous_power(scheme, pm, 0.0) == pm.p_min
    expected = {300.0: 210.0, 600.0: 420.0, 500.0: 350.0}
    assert {pm.p_max: pm.p_min for pm in CAT.pm_types} == expected
    assert time.perf_counter() - started < 0.001
    report(1, "idle power is exactly 0.7 x p_max for every PM type")


# -- criterion 2 -------------------------------------------------------------

def test_criterion_2_load_balance_comparison():
    started = time.perf_counter()
    counts = (250, 500, 750, 1000, 1250, 1500)
    policies = ("lif", "random", "roundrobin")
    means = {}
    for count in counts:
        for policy in policies:
            values = []
            for j in range(6):
                spec = WorkloadSpec(count=count, arrival_rate=0.5,
                                    mean_duration=300.0, max_duration=3000.0,
                                    type_mix=UNIFORM_MIX)
                sc = Scenario(catalog=CAT, pm_fleet=((1, 34), (2, 33), (3, 33)),
                              workload=spec, slot_length=5.0, policy=policy,
                              power_scheme=PowerScheme("linear"), seed=1000 + j)
                rep = summarize(run_simulation(sc), sc.power_scheme)
                values.append(rep.ibl_avg_cdc)
            means[(count, policy)] = mean_metric(values)
    for count in counts:
        assert means[(count, "lif")] < means[(count, "random")], count
        assert means[(count, "lif")] < means[(count, "roundrobin")], count
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    report(2, f"lif has the lowest mean datacenter imbalance at all "
              f"{len(counts)} request counts ({elapsed:.1f} s)")


# -- criterion 3 -------------------------------------------------------------

def test_criterion_3_energy_scheme_comparison():
    started = time.perf_counter()
    horizon, mean_d, cap = 400.0, 50.0, 0.25
    servers = (100, 200, 300, 400)
    loads = (0.0, 0.3, 0.6, 1.0)
    energy = {}
    for n in servers:
        for load in loads:
            lam = load * n / (mean_d * cap)
            for scheme_name in ("dvfs", "dns_dvfs"):
                values = []
                for j in range(5):
                    if load == 0.0:
                        workload = ()
                    else:
                        workload = WorkloadSpec(
                            count=int(lam * horizon), arrival_rate=lam,
                            mean_duration=mean_d, max_duration=10 * mean_d,
                            type_mix=UNIFORM_MIX, capacity_range=(cap, cap))
                    sc = Scenario(catalog=CAT, pm_fleet=((1, n),),
                                  workload=workload, slot_length=5.0,
                                  policy="firstfit",
                                  power_scheme=PowerScheme(scheme_name),
                                  seed=500 + j)
                    rep = summarize(run_simulation(sc), sc.power_scheme)
                    values.append(rep.e_cdc_j)
                energy[(n, load, scheme_name)] = mean_metric(values)

    # (a) shutting idle hosts down never costs energy
    for n in servers:
        for load in loads:
            assert energy[(n, load, "dns_dvfs")] <= energy[(n, load, "dvfs")], (n, load)
    # (b) at fixed load, energy grows with the fleet (strictly under real load)
    for load in loads:
        series = [energy[(n, load, "dns_dvfs")] for n in servers]
        if load == 0.0:
            assert all(b >= a for a, b in zip(series, series[1:]))
        else:
            assert all(b > a for a, b in zip(series, series[1:])), (load, series)
            dvfs_series = [energy[(n, load, "dvfs")] for n in servers]
            assert all(b > a for a, b in zip(dvfs_series, dvfs_series[1:]))
    # (c) an idle datacenter under shutdown with zero sleep power draws nothing
    for n in servers:
        assert energy[(n, 0.0, "dns_dvfs")] == 0.0
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    report(3, f"dns_dvfs <= dvfs on the whole grid, energy grows with fleet, "
              f"idle shutdown is free ({elapsed:.1f} s)")


# -- criterion 4 -------------------------------------------------------------

def _fig8_scenario(scheme_name: str, policy: str, seed: int) -> Scenario:
    spec = WorkloadSpec(count=300, arrival_rate=1.5, mean_duration=40.0,
                        max_duration=400.0, type_mix=UNIFORM_MIX,
                        capacity_range=(0.05, 0.45))
    return Scenario(catalog=CAT, pm_fleet=((1, 10),), workload=spec,
                    slot_length=5.0, migration_interval=5.0, policy=policy,
                    power_scheme=PowerScheme(scheme_name), seed=seed,
                    keep_event_log=True)


def _audit_migrations(result, scheme: PowerScheme) -> int:
    """Replay the event log and recompute pair power around every migration."""
    util = {}
    counts = {}
    frac_of = {}
    audited = 0

    def pair_power(pm: int, u: float, counted: bool) -> float:
        if not counted:
            return scheme.sleep_power if scheme.allows_sleep else 0.0
        p_max = float(result.p_max[pm - 1])
        return float(scheme.power(min(max(u, 0.0), 1.0), p_max))

    for t, kind, req, pm, detail in result.event_log:
        if kind == "allocate":
            frac = float(dict(kv.split("=") for kv in detail.split())["cpu"])
            util[pm] = util.get(pm, 0.0) + frac
            counts[pm] = counts.get(pm, 0) + 1
            frac_of[req] = frac
        elif kind == "release":
            frac = frac_of.pop(req)
            util[pm] = util[pm] - frac
            counts[pm] -= 1
        elif kind == "migrate":
            fields = dict(kv.split("=") for kv in detail.split())
            src = int(fields["from"])
            frac = float(fields["cpu"])
            before = (pair_power(src, util.get(src, 0.0), counts.get(src, 0) > 0
                                 or not scheme.allows_sleep)
                      + pair_power(pm, util.get(pm, 0.0), counts.get(pm, 0) > 0
                                   or (not scheme.allows_sleep and pm in counts)))
            util[src] -= frac
            counts[src] -= 1
            util[pm] = util.get(pm, 0.0) + frac
            counts[pm] = counts.get(pm, 0) + 1
            src_counted = counts[src] > 0 or not scheme.allows_sleep
            after = pair_power(src, util[src], src_counted) + pair_power(pm, util[pm], True)
            assert after < before, (t, req, before, after)
            frac_of[req] = frac
            audited += 1
    return audited


def test_criterion_4_migration_behavior():
    # the non-consolidating schemes never migrate, even with ticks enabled
    for scheme_name in ("npa", "dvfs"):
        res = run_simulation(_fig8_scenario(scheme_name, "lif", 42))
        assert res.migration_count == 0, scheme_name

    # the consolidating strategies migrate only when projected power drops
    summary = []
    for policy in ("mu", "rs", "mc"):
        sc = _fig8_scenario("dns_dvfs", policy, 42)
        res = run_simulation(sc)
        audited = _audit_migrations(res, sc.power_scheme)
        assert audited == res.migration_count
        rep = summarize(res, sc.power_scheme)
        summary.append((policy, res.migration_count, rep.e_cdc_j))
    assert sum(m for _, m, _ in summary) > 0  # the audit must not be vacuous
    # magnitudes are environment-specific: reported, not asserted
    for policy, migrations, e_cdc in summary:
        print(f"[acceptance]   {policy}: migrations={migrations} e_cdc_j={e_cdc:.4g}")
    report(4, "npa/dvfs migrate never; every applied move strictly reduced power")


# -- criterion 5 -------------------------------------------------------------

def test_criterion_5_energy_oracle():
    scheme = PowerScheme("linear", k=0.7)

    def power(u):
        return float(scheme.power(u, 300.0))

    def quadrature(values, slot, t0, t1, substeps=1000):
        h = slot / substeps
        total = 0.0
        for k in range(int(math.floor(t0 / h)), int(math.ceil(t1 / h))):
            lo, hi = max(k * h, t0), min((k + 1) * h, t1)
            if hi <= lo:
                continue
            s = int(((lo + hi) / 2) // slot)
            u = values[s] if 0 <= s < len(values) else 0.0
            total += power(u) * (hi - lo)
        return total

    rng = np.random.default_rng(2)
    for _ in range(25):
        n = int(rng.integers(1, 15))
        values = rng.random(n)
        slot = float(rng.uniform(0.5, 8.0))
        t0 = float(rng.uniform(0.0, n * slot * 0.5))
        t1 = float(rng.uniform(t0, n * slot))
        closed = pm_energy(power, values, slot, t0, t1)
        approx = quadrature(values, slot, t0, t1)
        assert closed == pytest.approx(approx, rel=1e-9, abs=1e-9)

    # constant utilization collapses to P(u) * (t1 - t0) with float equality
    for u in (0.0, 0.25, 0.5, 1.0):
        series = [u] * 9
        assert pm_energy(power, series, 5.0, 0.0, 45.0) == power(u) * 45.0
        assert pm_energy(power, series, 5.0, 3.7, 41.2) == power(u) * (41.2 - 3.7)
    report(5, "piecewise energy equals fine-step quadrature and the constant-"
              "utilization closed form")


# -- criterion 6 -------------------------------------------------------------

def test_criterion_6_metric_oracles():
    rng = np.random.default_rng(606)
    for _ in range(200):
        n = int(rng.integers(1, 21))
        s = UtilizationSnapshot(
            cpu=rng.random(n), mem=rng.random(n), net=rng.random(n),
            cpu_cores=rng.integers(1, 17, n).astype(float),
            mem_cap=rng.uniform(1.0, 64.0, n), net_cap=rng.uniform(1.0, 64.0, n))
        cores, mem_w, net_w = s.cpu_cores, s.mem_cap, s.net_cap
        cpu_a = float(np.dot(s.cpu, cores) / cores.sum())
        mem_a = float(np.dot(s.mem, mem_w) / mem_w.sum())
        net_a = float(np.dot(s.net, net_w) / net_w.sum())
        got = avg_utilization(s)
        assert got == pytest.approx((cpu_a, mem_a, net_a), abs=1e-12)
        avg_i = [(s.cpu[i] + s.mem[i] + s.net[i]) / 3 for i in range(n)]
        for variant in ("per_server", "literal"):
            expected_ilb = []
            for i in range(n):
                if variant == "per_server":
                    devs = (s.cpu[i] - avg_i[i], s.mem[i] - avg_i[i], s.net[i] - avg_i[i])
                else:
                    devs = (avg_i[i] - cpu_a, avg_i[i] - mem_a, avg_i[i] - net_a)
                expected_ilb.append(sum(d * d for d in devs) / 3)
            for i in range(n):
                assert server_imbalance(s, i, variant) == pytest.approx(
                    expected_ilb[i], abs=1e-12)
            assert total_imbalance(s, variant) == pytest.approx(
                sum(expected_ilb), abs=1e-12)
            assert avg_imbalance_pm(s, variant) == pytest.approx(
                sum(expected_ilb) / n, abs=1e-12)
        ibl = resource_imbalance(s)
        expect = (float(np.sum((s.cpu - cpu_a) ** 2)),
                  float(np.sum((s.mem - mem_a) ** 2)),
                  float(np.sum((s.net - net_a) ** 2)))
        assert ibl == pytest.approx(expect, abs=1e-12)
        assert avg_imbalance_cdc(s) == pytest.approx(sum(expect) / n, abs=1e-12)

    mean, s_dev, lo, hi = confidence_interval([1.0, 2.0, 3.0, 4.0])
    assert mean == pytest.approx(2.5, abs=1e-6)
    assert s_dev == pytest.approx(1.290994, abs=1e-6)
    assert (lo, hi) == pytest.approx((1.234826, 3.765174), abs=1e-6)
    rng = np.random.default_rng(7)
    for _ in range(100):
        xs = list(rng.normal(0, 2, int(rng.integers(2, 30))))
        n = len(xs)
        m = sum(xs) / n
        sd = math.sqrt(sum((x - m) ** 2 for x in xs) / (n - 1))
        half = 1.96 * sd / math.sqrt(n)
        got = confidence_interval(xs)
        assert got == pytest.approx((m, sd, m - half, m + half), abs=1e-12)
    report(6, "load metrics match brute-force recomputation; confidence "
              "intervals match the textbook oracle")


# -- criterion 7 -------------------------------------------------------------

def test_criterion_7_capacity_safety():
    rng = np.random.default_rng(2026)
    policies = ("firstfit", "roundrobin", "random", "lif", "mu", "mc")
    schemes = ("npa", "linear", "dvfs", "dns_dvfs")
    for idx in range(50):
        scalar = bool(rng.integers(0, 2))
        spec = WorkloadSpec(
            count=int(rng.integers(20, 120)),
            arrival_rate=float(rng.uniform(0.2, 2.5)),
            mean_duration=float(rng.uniform(5.0, 60.0)),
            max_duration=float(rng.uniform(60.0, 400.0)),
            type_mix=UNIFORM_MIX,
            capacity_range=(0.05, 0.95) if scalar else None)
        sc = Scenario(
            catalog=CAT,
            pm_fleet=tuple((tid, int(rng.integers(1, 5))) for tid in (1, 2, 3)),
            workload=spec,
            slot_length=float(rng.uniform(1.0, 10.0)),
            migration_interval=float(rng.choice([0.0, 2.5, 5.0])) or None,
            policy=str(rng.choice(policies)),
            power_scheme=PowerScheme(str(rng.choice(schemes))),
            seed=7000 + idx)
        res = run_simulation(sc)
        assert np.all(res.max_instantaneous_usage() <= 1.0 + 1e-9), idx
        assert np.all(res.slot_history() <= 1.0 + 1e-9), idx
    report(7, "no slot x PM x dimension exceeded capacity in 50 randomized runs")


# -- criterion 8 -------------------------------------------------------------

def test_criterion_8_determinism(tmp_path: Path):
    spec = WorkloadSpec(count=150, arrival_rate=1.0, mean_duration=25.0,
                        max_duration=250.0, type_mix=UNIFORM_MIX,
                        capacity_range=(0.05, 0.5))
    sc = Scenario(catalog=CAT, pm_fleet=((1, 8), (2, 6), (3, 6)), workload=spec,
                  slot_length=5.0, migration_interval=5.0, policy="rs",
                  power_scheme=PowerScheme("dns_dvfs"), seed=90)
    a, b = run_simulation(sc), run_simulation(sc)
    assert a.to_json() == b.to_json()
    assert summarize(a, sc.power_scheme).to_json() == summarize(b, sc.power_scheme).to_json()

    scenario_text = """\
[fleet]
pm_types = 1:8, 2:6, 3:6

[workload]
count = 150
arrival_rate = 1.0
mean_duration = 25
max_duration = 250
capacity_min = 0.05
capacity_max = 0.5

[policy]
name = rs

[power]
scheme = dns_dvfs

[run]
migration_interval = 5
repetitions = 8
seed = 90
"""
    path = tmp_path / "det.ini"
    path.write_text(scenario_text)
    out1, out8 = tmp_path / "j1", tmp_path / "j8"
    assert cli_main(["run", str(path), "--jobs", "1", "--out", str(out1)]) == 0
    assert cli_main(["run", str(path), "--jobs", "8", "--out", str(out8)]) == 0
    assert (out1 / "reports.csv").read_bytes() == (out8 / "reports.csv").read_bytes()
    assert (out1 / "aggregate.csv").read_bytes() == (out8 / "aggregate.csv").read_bytes()
    report(8, "identical seeds give byte-identical results at parallelism 1 and 8")


# -- criterion 9 -------------------------------------------------------------

def test_criterion_9_scalability_budget():
    payload = run_bench_size(500_000, 500)
    wall, peak = payload["wall_s"], payload["peak_mem_mb"]
    assert wall < 60.0, f"wall {wall:.1f} s"
    assert peak < 1024.0, f"peak {peak:.0f} MB"
    report(9, f"500000 requests on 500 PMs took {wall:.1f} s "
              f"and {peak:.0f} MB peak")
