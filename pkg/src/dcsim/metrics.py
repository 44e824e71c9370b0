"""Evaluation metrics: utilization averages, load-imbalance values, energy,
cost-per-task, and confidence intervals, plus the per-run report builder.

All operations are pure functions over snapshots or series and can be called
concurrently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .engine import SimulationResult
    from .policies import PowerScheme

__all__ = [
    "UtilizationSnapshot",
    "MetricReport",
    "Pricing",
    "avg_utilization",
    "server_imbalance",
    "resource_imbalance",
    "total_imbalance",
    "avg_imbalance_pm",
    "avg_imbalance_cdc",
    "makespan_and_efficiency",
    "blade_power",
    "switch_power",
    "pm_energy",
    "cdc_energy",
    "cp_metric",
    "confidence_interval",
    "summarize",
]

_RANGE_TOL = 1e-9

# 95% two-sided quantile of the standard normal distribution.
Z_95 = 1.96


@dataclass(frozen=True)
class UtilizationSnapshot:
    """Per-server (cpu, mem, net) utilizations for one observation window.

    cpu_cores weights the datacenter CPU average; mem_cap/net_cap weight the
    memory and bandwidth analogues (uniform weights when omitted).
    """

    cpu: np.ndarray
    mem: np.ndarray
    net: np.ndarray
    cpu_cores: np.ndarray
    mem_cap: np.ndarray | None = None
    net_cap: np.ndarray | None = None

    def __post_init__(self):
        for name in ("cpu", "mem", "net"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            if arr.size and (arr.min() < -_RANGE_TOL or arr.max() > 1 + _RANGE_TOL):
                raise ValueError(f"{name} utilizations must lie in [0, 1]")
            object.__setattr__(self, name, np.clip(arr, 0.0, 1.0))
        cores = np.asarray(self.cpu_cores, dtype=float)
        if cores.size and cores.min() < 1:
            raise ValueError("cpu_cores must all be >= 1")
        object.__setattr__(self, "cpu_cores", cores)
        sizes = {self.cpu.size, self.mem.size, self.net.size, cores.size}
        for name in ("mem_cap", "net_cap"):
            cap = getattr(self, name)
            if cap is not None:
                cap = np.asarray(cap, dtype=float)
                if cap.size and cap.min() <= 0:
                    raise ValueError(f"{name} entries must be > 0")
                object.__setattr__(self, name, cap)
                sizes.add(cap.size)
        if len(sizes) > 1:
            raise ValueError("all snapshot arrays must have equal length")

    @property
    def n_servers(self) -> int:
        return self.cpu.size

    def integrated_load(self) -> np.ndarray:
        """Per-server mean of the (cpu, mem, net) triple."""
        return (self.cpu + self.mem + self.net) / 3.0


def _weighted_mean(values: np.ndarray, weights: np.ndarray | None) -> float:
    if weights is None:
        return float(values.mean())
    return float(np.sum(values * weights) / np.sum(weights))


def avg_utilization(snapshot: UtilizationSnapshot) -> tuple[float, float, float]:
    """Datacenter-level average utilization per resource.

    CPU averages are weighted by per-server core counts; memory and bandwidth
    by per-server capacity shares (uniform when capacities are unknown).
    """
    if snapshot.n_servers == 0:
        raise ValueError("snapshot is empty")
    cpu_avg = _weighted_mean(snapshot.cpu, snapshot.cpu_cores)
    mem_avg = _weighted_mean(snapshot.mem, snapshot.mem_cap)
    net_avg = _weighted_mean(snapshot.net, snapshot.net_cap)
    return cpu_avg, mem_avg, net_avg


def server_imbalance(snapshot: UtilizationSnapshot, i: int,
                     variant: str = "per_server") -> float:
    """Integrated load-imbalance value of server i.

    per_server: mean squared deviation of the server's own (cpu, mem, net)
    from its integrated load. literal: mean squared deviation of the server's
    integrated load from the three datacenter-level averages.
    """
    if not 0 <= i < snapshot.n_servers:
        raise IndexError(f"server index {i} out of range")
    avg_i = float(snapshot.integrated_load()[i])
    if variant == "per_server":
        devs = (snapshot.cpu[i] - avg_i, snapshot.mem[i] - avg_i, snapshot.net[i] - avg_i)
    elif variant == "literal":
        cpu_a, mem_a, net_a = avg_utilization(snapshot)
        devs = (avg_i - cpu_a, avg_i - mem_a, avg_i - net_a)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(sum(d * d for d in devs) / 3.0)


def resource_imbalance(snapshot: UtilizationSnapshot) -> tuple[float, float, float]:
    """Per-resource imbalance: sum of squared deviations from the datacenter
    average (no division by server count)."""
    cpu_a, mem_a, net_a = avg_utilization(snapshot)
    ibl_cpu = float(np.sum((snapshot.cpu - cpu_a) ** 2))
    ibl_mem = float(np.sum((snapshot.mem - mem_a) ** 2))
    ibl_net = float(np.sum((snapshot.net - net_a) ** 2))
    return ibl_cpu, ibl_mem, ibl_net


def total_imbalance(snapshot: UtilizationSnapshot, variant: str = "per_server") -> float:
    """Sum of the per-server imbalance values."""
    return float(sum(server_imbalance(snapshot, i, variant)
                     for i in range(snapshot.n_servers)))


def avg_imbalance_pm(snapshot: UtilizationSnapshot, variant: str = "per_server") -> float:
    """Average per-server imbalance: total divided by server count."""
    return total_imbalance(snapshot, variant) / snapshot.n_servers


def avg_imbalance_cdc(snapshot: UtilizationSnapshot) -> float:
    """Datacenter imbalance: per-resource imbalances summed, divided by N."""
    return sum(resource_imbalance(snapshot)) / snapshot.n_servers


def makespan_and_efficiency(loads: Sequence[float]) -> tuple[float, float]:
    """(max load, min load / max load); efficiency is 1 when all loads are 0."""
    if len(loads) == 0:
        raise ValueError("loads must not be empty")
    arr = np.asarray(loads, dtype=float)
    if arr.min() < 0:
        raise ValueError("loads must be >= 0")
    top = float(arr.max())
    if top == 0.0:
        return 0.0, 1.0
    return top, float(arr.min()) / top


def blade_power(u_cpu: float, u_mem: float, u_disk: float, u_net: float) -> float:
    """Blade-server power polynomial; inputs are in caller-supplied units."""
    return 14.5 + 0.2 * u_cpu + 4.5e-8 * u_mem + 0.003 * u_disk + 3.1e-8 * u_net


def switch_power(p_chassis: float, linecards: int, p_linecard: float,
                 ports: Iterable[tuple[int, float]] = ()) -> float:
    """Switch power: chassis + linecards * per-card + sum of port-count * per-port
    terms, one per line rate."""
    total = p_chassis + linecards * p_linecard
    for count, p_r in ports:
        total += count * p_r
    return total


def pm_energy(power_fn: Callable[[float], float], slot_values: Sequence[float],
              slot_length: float, t0: float, t1: float) -> float:
    """Energy in joules over [t0, t1] for a piecewise-constant utilization series.

    slot_values[k] is the utilization on [k*slot_length, (k+1)*slot_length);
    utilization is 0 beyond the series. Runs of equal utilization are merged
    before integrating, so a constant series gives exactly P(u) * (t1 - t0).
    """
    if slot_length <= 0:
        raise ValueError("slot_length must be > 0")
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if t1 == t0:
        return 0.0

    values = np.asarray(slot_values, dtype=float)

    def u_at(k: int) -> float:
        return float(values[k]) if 0 <= k < values.size else 0.0

    k0 = int(math.floor(t0 / slot_length))
    # Merge equal-valued runs, then sum P(u) * run length.
    total = 0.0
    run_start = t0
    run_u = u_at(k0)
    k = k0
    while True:
        boundary = (k + 1) * slot_length
        if boundary >= t1:
            total += power_fn(run_u) * (t1 - run_start)
            break
        nxt = u_at(k + 1)
        if nxt != run_u:
            total += power_fn(run_u) * (boundary - run_start)
            run_start = boundary
            run_u = nxt
        k += 1
    return total


def cdc_energy(pm_energies: Iterable[float]) -> float:
    """Total datacenter energy: the sum of per-PM energies."""
    return float(sum(pm_energies))


def cp_metric(c_h: float, t_exe: float, tracing_interval: float,
              task_tracing_interval: float, n_vm: int, n_c: int) -> float:
    """Cost-per-task for pay-as-you-go infrastructures (literal transcription;
    no unit enforcement)."""
    for name, v in (("c_h", c_h), ("t_exe", t_exe),
                    ("tracing_interval", tracing_interval),
                    ("task_tracing_interval", task_tracing_interval),
                    ("n_vm", n_vm), ("n_c", n_c)):
        if v <= 0:
            raise ValueError(f"{name} must be > 0")
    lead = (c_h * t_exe * tracing_interval) / (task_tracing_interval * n_c ** 2)
    inner = (t_exe * tracing_interval) / (task_tracing_interval * n_vm * n_c)
    return lead * math.floor(inner)


def confidence_interval(samples: Sequence[float]) -> tuple[float, float, float, float]:
    """(mean, sample std, lower, upper) at 95% confidence, normal approximation.

    Requires at least two samples; the standard deviation uses the n-1
    denominator.
    """
    n = len(samples)
    if n < 2:
        raise ValueError("need at least 2 samples for a confidence interval")
    arr = np.asarray(samples, dtype=float)
    mean = float(arr.mean())
    s = math.sqrt(float(np.sum((arr - mean) ** 2)) / (n - 1))
    half = Z_95 * s / math.sqrt(n)
    return mean, s, mean - half, mean + half


@dataclass(frozen=True)
class Pricing:
    """Inputs for the cost-per-task metric."""

    c_h: float
    tracing_interval: float
    task_tracing_interval: float
    n_vm: int
    n_c: int


@dataclass
class MetricReport:
    """All per-run metrics; scalars go to the flat CSV row, per-PM vectors to JSON."""

    n_pms: int
    n_requests: int
    accepted: int
    rejected: int
    rejection_rate: float
    migrations: int
    makespan_time: float
    makespan_load: float
    utilization_efficiency: float
    cpu_avg: float
    mem_avg: float
    net_avg: float
    ilb_variant: str
    ilb: tuple[float, ...]
    ibl_cpu: float
    ibl_mem: float
    ibl_net: float
    ibl_tot: float
    ibl_avg_pm: float
    ibl_avg_cdc: float
    pm_energy_j: tuple[float, ...]
    e_cdc_j: float
    pms_used: int
    power_on_time_s: float
    cp: float | None = None
    wall_time_s: float | None = None

    SCALAR_FIELDS = (
        "n_pms", "n_requests", "accepted", "rejected", "rejection_rate",
        "migrations", "makespan_time", "makespan_load", "utilization_efficiency",
        "cpu_avg", "mem_avg", "net_avg", "ilb_variant",
        "ibl_cpu", "ibl_mem", "ibl_net", "ibl_tot", "ibl_avg_pm", "ibl_avg_cdc",
        "e_cdc_j", "pms_used", "power_on_time_s", "cp",
    )

    def as_flat_dict(self) -> dict:
        """Scalar fields only, for one CSV row. Wall-clock time is excluded so
        that rows are reproducible byte-for-byte across execution orders."""
        return {name: getattr(self, name) for name in self.SCALAR_FIELDS}

    def to_json(self, indent: int | None = None) -> str:
        data = {name: getattr(self, name) for name in self.SCALAR_FIELDS}
        data["ilb"] = list(self.ilb)
        data["pm_energy_j"] = list(self.pm_energy_j)
        return json.dumps(data, sort_keys=True, indent=indent)


def _interval_overlap(a0: float, a1: float, intervals: Sequence[tuple[float, float]]) -> float:
    total = 0.0
    for b0, b1 in intervals:
        lo = max(a0, b0)
        hi = min(a1, b1)
        if hi > lo:
            total += hi - lo
    return total


def _pm_energy_exact(bounds: np.ndarray, values: np.ndarray,
                     on_intervals: Sequence[tuple[float, float]],
                     scheme: "PowerScheme", p_max: float, horizon: float) -> float:
    """Exact energy for one PM from its cpu-utilization step function.

    Powered-on stretches integrate the scheme's power at the running
    utilization; the remaining time draws sleep power under sleep-capable
    schemes and nothing otherwise (the machine was never provisioned).
    """
    energy = 0.0
    on_total = 0.0
    for t0, t1 in on_intervals:
        on_total += t1 - t0
    for k in range(values.size):
        seg0, seg1 = float(bounds[k]), float(bounds[k + 1])
        if seg1 <= seg0:
            continue
        covered = _interval_overlap(seg0, seg1, on_intervals)
        if covered > 0:
            energy += scheme.power(min(float(values[k]), 1.0), p_max) * covered
    if scheme.allows_sleep:
        energy += scheme.sleep_power * max(horizon - on_total, 0.0)
    return energy


def summarize(result: "SimulationResult", scheme: "PowerScheme",
              pricing: Pricing | None = None,
              ilb_variant: str = "per_server") -> MetricReport:
    """Build the full metric report for one simulation run.

    Per-server utilizations are the exact time averages over [0, makespan];
    energies integrate the scheme's power over each PM's utilization step
    function restricted to its powered-on intervals.
    """
    n = result.n_pms
    horizon = result.makespan_time
    tav = result.time_avg_utilization()
    snapshot = UtilizationSnapshot(
        cpu=tav[:, 0], mem=tav[:, 1], net=tav[:, 2],
        cpu_cores=result.cores,
        mem_cap=result.caps[:, 1], net_cap=result.caps[:, 2],
    )
    cpu_avg, mem_avg, net_avg = avg_utilization(snapshot)
    ilb = tuple(server_imbalance(snapshot, i, ilb_variant) for i in range(n))
    ibl_cpu, ibl_mem, ibl_net = resource_imbalance(snapshot)
    ibl_tot = float(sum(ilb))
    loads = snapshot.integrated_load()
    makespan_load, efficiency = makespan_and_efficiency(loads)

    energies = []
    for j in range(n):
        bounds, values = result.cpu_segments(j)
        energies.append(_pm_energy_exact(bounds, values, result.power_on_intervals[j],
                                         scheme, float(result.p_max[j]), horizon))
    pm_energy_j = tuple(energies)

    power_on_time = float(sum(t1 - t0 for iv in result.power_on_intervals
                              for t0, t1 in iv))
    rejected = len(result.rejected_requests)
    rate = rejected / result.n_requests if result.n_requests else 0.0

    cp = None
    if pricing is not None and horizon > 0:
        cp = cp_metric(pricing.c_h, horizon, pricing.tracing_interval,
                       pricing.task_tracing_interval, pricing.n_vm, pricing.n_c)

    return MetricReport(
        n_pms=n,
        n_requests=result.n_requests,
        accepted=result.accepted_count,
        rejected=rejected,
        rejection_rate=rate,
        migrations=result.migration_count,
        makespan_time=horizon,
        makespan_load=makespan_load,
        utilization_efficiency=efficiency,
        cpu_avg=cpu_avg,
        mem_avg=mem_avg,
        net_avg=net_avg,
        ilb_variant=ilb_variant,
        ilb=ilb,
        ibl_cpu=ibl_cpu,
        ibl_mem=ibl_mem,
        ibl_net=ibl_net,
        ibl_tot=ibl_tot,
        ibl_avg_pm=ibl_tot / n,
        ibl_avg_cdc=(ibl_cpu + ibl_mem + ibl_net) / n,
        pm_energy_j=pm_energy_j,
        e_cdc_j=cdc_energy(pm_energy_j),
        pms_used=result.pms_used,
        power_on_time_s=power_on_time,
        cp=cp,
        wall_time_s=result.wall_time_s,
    )
