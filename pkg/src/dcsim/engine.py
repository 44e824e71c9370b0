"""Discrete-event simulation core.

Events occur at real-valued times and are processed in time order; at equal
times departures run before arrivals, which run before migration ticks, and
within a class ascending request_id decides. Capacity is enforced per PM and
resource dimension at every instant. Utilization is recorded as a per-PM step
function (signed usage deltas at event times) from which slot histories, time
averages, and energy integrals are derived after the run.
"""

from __future__ import annotations

import heapq
import json
import math
import time as _time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .catalog import Catalog
from .metrics import Pricing
from .policies import (
    CAPACITY_TOL,
    PolicyContext,
    PowerScheme,
    make_policy,
    propose_migrations,
)
from .workload import VmRequest, WorkloadSpec, generate_workload

__all__ = [
    "SimulationError",
    "Allocation",
    "PmInstance",
    "Scenario",
    "SimulationResult",
    "DataCenterState",
    "can_host",
    "run_simulation",
]

_REJECT_REASON = "no_feasible_pm"


class SimulationError(RuntimeError):
    """An engine precondition was violated (bad scenario, unknown request,
    capacity overflow)."""


@dataclass(frozen=True, slots=True)
class Allocation:
    """One request placed on one PM; demand is in fractions of the host's
    capacity per dimension."""

    request_id: int
    pm_id: int
    start: float
    end: float
    demand: tuple[float, float, float]


class PmInstance:
    """Mutable per-PM bookkeeping: allocations, power state, usage deltas."""

    __slots__ = ("pm_id", "pm_type_id", "caps", "cores", "p_min", "p_max",
                 "power_state", "active_allocations", "ever_used",
                 "on_intervals", "ev_times", "ev_cpu", "ev_mem", "ev_bw")

    def __init__(self, pm_id: int, pm_type, asleep: bool, scalar_mode: bool):
        self.pm_id = pm_id
        self.pm_type_id = pm_type.type_id
        self.caps = (pm_type.cpu_units, pm_type.mem_gb, pm_type.bw)
        self.cores = pm_type.cpu_cores
        self.p_min = pm_type.p_min
        self.p_max = pm_type.p_max
        self.power_state = "sleep" if asleep else "on"
        self.active_allocations: dict[int, Allocation] = {}
        self.ever_used = False
        self.on_intervals: list[list[float]] = []
        self.ev_times: list[float] = []
        self.ev_cpu: list[float] = []
        # mem/bw deltas mirror cpu in scalar mode and are not stored
        self.ev_mem: list[float] | None = None if scalar_mode else []
        self.ev_bw: list[float] | None = None if scalar_mode else []


def can_host(pm: PmInstance, demand, interval: tuple[float, float] | None = None,
             tol: float = CAPACITY_TOL) -> bool:
    """True iff the PM can absorb `demand` (fractions of its capacity) over the
    interval, per dimension, given its active allocations.

    Active allocations only expire going forward, so usage over the interval
    is maximal at its start: the check reduces to allocations whose end lies
    beyond the interval start.
    """
    d = np.asarray(demand, dtype=float)
    if d.ndim == 0:
        d = np.repeat(d, 3)
    if interval is not None:
        t0, t1 = interval
        if not t1 > t0:
            raise ValueError("interval must satisfy t1 > t0")
    else:
        t0 = -math.inf
    usage = np.zeros(3)
    for alloc in pm.active_allocations.values():
        if alloc.end > t0:
            usage += alloc.demand
    return bool(np.all(usage + d <= 1.0 + tol))


@dataclass(frozen=True)
class Scenario:
    """Everything one simulation run needs, minus the per-run seed schedule.

    workload is either a WorkloadSpec (generated per run; its seed defaults to
    the scenario seed) or an explicit request sequence (trace replay).
    """

    catalog: Catalog
    pm_fleet: tuple[tuple[int, int], ...]
    workload: WorkloadSpec | tuple[VmRequest, ...]
    slot_length: float = 5.0
    migration_interval: float | None = None
    policy: str = "firstfit"
    policy_params: Mapping = field(default_factory=dict)
    power_scheme: PowerScheme = PowerScheme("linear")
    repetitions: int = 1
    seed: int = 1
    keep_event_log: bool = False
    pricing: Pricing | None = None
    ilb_variant: str = "per_server"

    def __post_init__(self):
        object.__setattr__(self, "pm_fleet", tuple((int(t), int(c)) for t, c in self.pm_fleet))
        if not isinstance(self.workload, WorkloadSpec):
            object.__setattr__(self, "workload", tuple(self.workload))
        if self.slot_length <= 0:
            raise ValueError("slot_length must be > 0")
        if self.migration_interval is not None and self.migration_interval <= 0:
            raise ValueError("migration_interval must be > 0 or None")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.pm_fleet:
            raise ValueError("pm_fleet must not be empty")
        if any(c < 1 for _, c in self.pm_fleet):
            raise ValueError("pm_fleet counts must be >= 1")


class DataCenterState:
    """Live allocation state of the whole fleet during one run."""

    def __init__(self, catalog: Catalog, pm_fleet: Sequence[tuple[int, int]],
                 scheme: PowerScheme, *, scalar_mode: bool, slot_length: float,
                 history_window: int = 0, keep_event_log: bool = False,
                 tol: float = CAPACITY_TOL):
        self.catalog = catalog
        self.scheme = scheme
        self.scalar_mode = scalar_mode
        self.slot_length = slot_length
        self.tol = tol
        asleep0 = scheme.allows_sleep
        self.pms: list[PmInstance] = []
        for type_id, count in pm_fleet:
            pm_type = catalog.pm(type_id)
            for _ in range(count):
                self.pms.append(PmInstance(len(self.pms) + 1, pm_type, asleep0, scalar_mode))
        n = len(self.pms)
        self.n = n
        self.caps = np.array([pm.caps for pm in self.pms], dtype=float)
        self.cores = np.array([pm.cores for pm in self.pms], dtype=float)
        self.p_max = np.array([pm.p_max for pm in self.pms], dtype=float)
        self.p_min = np.array([pm.p_min for pm in self.pms], dtype=float)
        self.usage = np.zeros(n) if scalar_mode else np.zeros((n, 3))
        self.counts = np.zeros(n, dtype=np.int64)
        self.asleep = np.full(n, asleep0)
        self.total_active = 0
        self.time = 0.0
        self._alloc_pm: dict[int, int] = {}
        self.event_log: list[tuple] | None = [] if keep_event_log else None
        # rolling per-slot cpu history, tracked only when a policy wants it
        self._window = history_window
        self._history: deque[np.ndarray] = deque(maxlen=history_window or 1)
        self._hist_t = 0.0
        self._hist_boundary = slot_length
        self._hist_acc = np.zeros(n) if history_window else None

    # -- time ------------------------------------------------------------

    def advance_time(self, t: float) -> None:
        """Move the clock forward, folding elapsed time into the slot history."""
        if t < self.time:
            raise SimulationError(f"time went backwards: {self.time} -> {t}")
        if self._hist_acc is not None and t > self._hist_t:
            cpu = self.usage if self.scalar_mode else self.usage[:, 0]
            while t >= self._hist_boundary:
                self._hist_acc += cpu * (self._hist_boundary - self._hist_t)
                self._history.append(self._hist_acc / self.slot_length)
                self._hist_acc = np.zeros(self.n)
                self._hist_t = self._hist_boundary
                self._hist_boundary += self.slot_length
            self._hist_acc += cpu * (t - self._hist_t)
            self._hist_t = t
        self.time = t

    def history_array(self) -> np.ndarray | None:
        if self._hist_acc is None or not self._history:
            return None
        return np.array(self._history)

    # -- capacity --------------------------------------------------------

    def demand_fraction(self, request: VmRequest, pm_index: int):
        """The request's demand as fractions of one PM's capacity; a scalar in
        scalar mode, a length-3 vector otherwise."""
        if self.scalar_mode:
            return request.capacity
        vm = self.catalog.vm(request.vm_type_id)
        caps = self.caps[pm_index]
        return np.array([vm.cpu_units, vm.mem_gb, vm.bw]) / caps

    def can_host(self, pm_id: int, demand, interval=None) -> bool:
        """Current-state capacity check for one PM (decisions happen at the
        interval start, where forward usage is maximal)."""
        j = pm_id - 1
        return bool(np.all(self.usage[j] + demand <= 1.0 + self.tol))

    # -- allocation ------------------------------------------------------

    def _record(self, j: int, d_cpu: float, d_mem: float, d_bw: float) -> None:
        pm = self.pms[j]
        pm.ev_times.append(self.time)
        pm.ev_cpu.append(d_cpu)
        if pm.ev_mem is not None:
            pm.ev_mem.append(d_mem)
            pm.ev_bw.append(d_bw)

    def _log(self, kind: str, request_id: int, pm_id: int, detail: str = "") -> None:
        if self.event_log is not None:
            self.event_log.append((self.time, kind, request_id, pm_id, detail))

    def _wake(self, j: int) -> None:
        pm = self.pms[j]
        if self.asleep[j]:
            self.asleep[j] = False
            pm.power_state = "on"
        if self.scheme.allows_sleep:
            pm.on_intervals.append([self.time, math.nan])
        pm.ever_used = True

    def _maybe_sleep(self, j: int) -> None:
        if self.counts[j] == 0 and self.scheme.allows_sleep:
            pm = self.pms[j]
            pm.on_intervals[-1][1] = self.time
            self.asleep[j] = True
            pm.power_state = "sleep"

    def allocate(self, request: VmRequest, pm_id: int) -> Allocation:
        """Place the request on the PM at the current time; capacity violations
        raise."""
        j = pm_id - 1
        frac = self.demand_fraction(request, j)
        if not np.all(self.usage[j] + frac <= 1.0 + self.tol):
            raise SimulationError(
                f"capacity violation: request {request.request_id} on pm {pm_id}")
        pm = self.pms[j]
        if self.counts[j] == 0:
            self._wake(j)
        else:
            pm.ever_used = True
        self.usage[j] += frac
        self.counts[j] += 1
        self.total_active += 1
        if self.scalar_mode:
            frac3 = (float(frac),) * 3
            self._record(j, float(frac), float(frac), float(frac))
        else:
            frac3 = tuple(float(x) for x in frac)
            self._record(j, *frac3)
        alloc = Allocation(request.request_id, pm_id, request.start_time,
                           request.end_time, frac3)
        pm.active_allocations[request.request_id] = alloc
        self._alloc_pm[request.request_id] = j
        if self.event_log is not None:
            self._log("allocate", request.request_id, pm_id,
                      f"type={request.vm_type_id} cpu={frac3[0]!r} "
                      f"mem={frac3[1]!r} bw={frac3[2]!r}")
        return alloc

    def release(self, request_id: int) -> None:
        """Remove an active allocation at the current time."""
        j = self._alloc_pm.pop(request_id, None)
        if j is None:
            raise SimulationError(f"unknown request {request_id}: not allocated")
        pm = self.pms[j]
        alloc = pm.active_allocations.pop(request_id)
        if self.scalar_mode:
            self.usage[j] -= alloc.demand[0]
        else:
            self.usage[j] -= alloc.demand
        self.counts[j] -= 1
        self.total_active -= 1
        self._record(j, -alloc.demand[0], -alloc.demand[1], -alloc.demand[2])
        self._maybe_sleep(j)
        self._log("release", request_id, pm.pm_id)

    # -- migration -------------------------------------------------------

    def _pair_power(self, j: int, u_cpu: float, counted: bool) -> float:
        """Instantaneous power of one PM at a hypothetical cpu utilization."""
        if not counted:
            # sleeping under sleep schemes, or never provisioned otherwise
            return self.scheme.sleep_power if self.scheme.allows_sleep else 0.0
        return float(self.scheme.power(min(max(u_cpu, 0.0), 1.0), self.pms[j].p_max))

    def migration_step(self, t: float) -> int:
        """Apply the consolidation proposals that strictly reduce projected
        datacenter power; returns the number of moves performed."""
        if self.total_active == 0:
            return 0
        allocations = []
        for j, pm in enumerate(self.pms):
            if not pm.active_allocations:
                continue
            for request_id, alloc in pm.active_allocations.items():
                if self.scalar_mode:
                    demand_abs = alloc.demand[0]
                else:
                    demand_abs = np.asarray(alloc.demand) * self.caps[j]
                allocations.append((request_id, j, demand_abs))
        caps_arg = None if self.scalar_mode else self.caps
        proposals = propose_migrations(self.usage, allocations, caps_arg, self.tol)

        applied = 0
        for request_id, src_id, dst_id in proposals:
            j_s, j_d = src_id - 1, dst_id - 1
            src_pm = self.pms[j_s]
            alloc = src_pm.active_allocations.get(request_id)
            if alloc is None:
                continue
            if self.scalar_mode:
                frac_dst = alloc.demand[0]
                d_src_cpu = d_dst_cpu = alloc.demand[0]
            else:
                demand_abs = np.asarray(alloc.demand) * self.caps[j_s]
                frac_dst = demand_abs / self.caps[j_d]
                d_src_cpu = alloc.demand[0]
                d_dst_cpu = float(frac_dst[0])
            if not np.all(self.usage[j_d] + frac_dst <= 1.0 + self.tol):
                continue
            u_src = float(self.usage[j_s] if self.scalar_mode else self.usage[j_s, 0])
            u_dst = float(self.usage[j_d] if self.scalar_mode else self.usage[j_d, 0])
            if self.scheme.allows_sleep:
                dst_counted = not bool(self.asleep[j_d])
            else:
                dst_counted = self.pms[j_d].ever_used
            before = (self._pair_power(j_s, u_src, True)
                      + self._pair_power(j_d, u_dst, dst_counted))
            src_stays = self.counts[j_s] > 1 or not self.scheme.allows_sleep
            after = (self._pair_power(j_s, u_src - d_src_cpu, src_stays)
                     + self._pair_power(j_d, u_dst + d_dst_cpu, True))
            if not after < before:
                continue
            self._move(request_id, j_s, j_d, alloc, frac_dst, before, after)
            applied += 1
        return applied

    def _move(self, request_id: int, j_s: int, j_d: int, alloc: Allocation,
              frac_dst, p_before: float, p_after: float) -> None:
        src_pm, dst_pm = self.pms[j_s], self.pms[j_d]
        del src_pm.active_allocations[request_id]
        if self.scalar_mode:
            self.usage[j_s] -= alloc.demand[0]
        else:
            self.usage[j_s] -= alloc.demand
        self.counts[j_s] -= 1
        self._record(j_s, -alloc.demand[0], -alloc.demand[1], -alloc.demand[2])
        self._maybe_sleep(j_s)

        if self.counts[j_d] == 0:
            self._wake(j_d)
        else:
            dst_pm.ever_used = True
        self.usage[j_d] += frac_dst
        self.counts[j_d] += 1
        if self.scalar_mode:
            frac3 = (float(frac_dst),) * 3
        else:
            frac3 = tuple(float(x) for x in frac_dst)
        self._record(j_d, *frac3)
        moved = Allocation(request_id, dst_pm.pm_id, alloc.start, alloc.end, frac3)
        dst_pm.active_allocations[request_id] = moved
        self._alloc_pm[request_id] = j_d
        if self.event_log is not None:
            self._log("migrate", request_id, dst_pm.pm_id,
                      f"from={src_pm.pm_id} cpu={frac3[0]!r} mem={frac3[1]!r} "
                      f"bw={frac3[2]!r} p_before={p_before!r} p_after={p_after!r}")


@dataclass
class SimulationResult:
    """Everything observable about one finished run.

    Per-PM usage is stored as signed deltas at event times; slot histories,
    time averages, and instantaneous peaks derive from them. wall_time_s is
    measurement metadata and is excluded from the serialized form.
    """

    n_pms: int
    pm_type_ids: tuple[int, ...]
    caps: np.ndarray
    cores: np.ndarray
    p_max: np.ndarray
    p_min: np.ndarray
    scalar_mode: bool
    slot_length: float
    makespan_time: float
    n_requests: int
    accepted_count: int
    rejected_requests: tuple[tuple[int, str], ...]
    migration_count: int
    power_on_intervals: tuple[tuple[tuple[float, float], ...], ...]
    pms_used: int
    policy_name: str
    scheme_name: str
    seed: int
    ev_times: tuple[list[float], ...]
    ev_cpu: tuple[list[float], ...]
    ev_mem: tuple[list[float], ...] | None
    ev_bw: tuple[list[float], ...] | None
    event_log: list[tuple] | None = None
    wall_time_s: float = 0.0

    def _deltas(self, j: int) -> np.ndarray:
        """(k, 3) usage deltas for PM index j."""
        cpu = np.asarray(self.ev_cpu[j], dtype=float)
        if self.ev_mem is None:
            return np.stack([cpu, cpu, cpu], axis=1)
        mem = np.asarray(self.ev_mem[j], dtype=float)
        bw = np.asarray(self.ev_bw[j], dtype=float)
        return np.stack([cpu, mem, bw], axis=1)

    def time_avg_utilization(self) -> np.ndarray:
        """(n_pms, 3) exact time-averaged utilization over [0, makespan)."""
        out = np.zeros((self.n_pms, 3))
        horizon = self.makespan_time
        if horizon <= 0:
            return out
        for j in range(self.n_pms):
            times = np.asarray(self.ev_times[j], dtype=float)
            if times.size == 0:
                continue
            levels = np.cumsum(self._deltas(j), axis=0)
            bounds = np.append(times, horizon)
            widths = np.diff(bounds)
            out[j] = (levels * widths[:, None]).sum(axis=0) / horizon
        return np.clip(out, 0.0, 1.0)

    def cpu_segments(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Step function of PM j's cpu utilization over [0, makespan):
        (bounds of length k+1, values of length k)."""
        times = np.asarray(self.ev_times[j], dtype=float)
        horizon = self.makespan_time
        bounds = np.concatenate([[0.0], times, [horizon]])
        values = np.concatenate([[0.0], np.cumsum(np.asarray(self.ev_cpu[j], dtype=float))])
        return bounds, values

    def max_instantaneous_usage(self) -> np.ndarray:
        """(n_pms, 3) peak usage per dimension over the whole run."""
        out = np.zeros((self.n_pms, 3))
        for j in range(self.n_pms):
            if self.ev_times[j]:
                out[j] = np.cumsum(self._deltas(j), axis=0).max(axis=0)
        return out

    def slot_history(self, slot_length: float | None = None) -> np.ndarray:
        """(n_slots, n_pms, 3) time-weighted per-slot utilization averages."""
        slot = slot_length or self.slot_length
        horizon = self.makespan_time
        n_slots = int(math.ceil(horizon / slot)) if horizon > 0 else 0
        acc = np.zeros((n_slots, self.n_pms, 3))
        for j in range(self.n_pms):
            times = self.ev_times[j]
            if not times:
                continue
            levels = np.cumsum(self._deltas(j), axis=0)
            bounds = np.append(np.asarray(times, dtype=float), horizon)
            for k in range(levels.shape[0]):
                a, b = bounds[k], bounds[k + 1]
                if b <= a:
                    continue
                level = levels[k]
                s0 = int(a // slot)
                s1 = int(math.ceil(b / slot))
                for s in range(s0, s1):
                    lo = max(a, s * slot)
                    hi = min(b, (s + 1) * slot)
                    if hi > lo:
                        acc[s, j] += level * (hi - lo)
        return acc / slot

    def to_json(self, indent: int | None = None) -> str:
        """Deterministic JSON form (no wall-clock metadata, no event log)."""
        data = {
            "n_pms": self.n_pms,
            "pm_type_ids": list(self.pm_type_ids),
            "caps": self.caps.tolist(),
            "cores": self.cores.tolist(),
            "p_max": self.p_max.tolist(),
            "p_min": self.p_min.tolist(),
            "scalar_mode": self.scalar_mode,
            "slot_length": self.slot_length,
            "makespan_time": self.makespan_time,
            "n_requests": self.n_requests,
            "accepted_count": self.accepted_count,
            "rejected_requests": [list(r) for r in self.rejected_requests],
            "migration_count": self.migration_count,
            "power_on_intervals": [[list(iv) for iv in pm] for pm in self.power_on_intervals],
            "pms_used": self.pms_used,
            "policy": self.policy_name,
            "scheme": self.scheme_name,
            "seed": self.seed,
            "usage_events": [
                {
                    "times": list(self.ev_times[j]),
                    "cpu": list(self.ev_cpu[j]),
                    "mem": None if self.ev_mem is None else list(self.ev_mem[j]),
                    "bw": None if self.ev_bw is None else list(self.ev_bw[j]),
                }
                for j in range(self.n_pms)
            ],
        }
        return json.dumps(data, sort_keys=True, indent=indent)


def _resolve_workload(scenario: Scenario) -> list[VmRequest]:
    if isinstance(scenario.workload, WorkloadSpec):
        spec = scenario.workload
        if spec.seed is None:
            spec = replace(spec, seed=scenario.seed)
        return generate_workload(spec, scenario.catalog)
    requests = list(scenario.workload)
    known = set(scenario.catalog.vm_ids())
    seen: set[int] = set()
    scalar_flags = set()
    for r in requests:
        if r.vm_type_id not in known:
            raise SimulationError(f"request {r.request_id}: unknown VM type {r.vm_type_id}")
        if r.request_id in seen:
            raise SimulationError(f"duplicate request_id {r.request_id}")
        seen.add(r.request_id)
        scalar_flags.add(r.capacity is not None)
    if len(scalar_flags) > 1:
        raise SimulationError("workload mixes scalar and multi-dimensional requests")
    return requests


def run_simulation(scenario: Scenario) -> SimulationResult:
    """Run one seeded simulation to completion.

    Arrivals are offered to the policy in time order; infeasible placements
    are rejected, never queued. With a migration interval set, consolidation
    proposals are applied at every tick iff they strictly reduce projected
    datacenter power. The result is fully determined by the scenario,
    including its seed.
    """
    wall0 = _time.perf_counter()
    scheme = scenario.power_scheme
    policy = make_policy(scenario.policy, **dict(scenario.policy_params))
    requests = _resolve_workload(scenario)
    scalar_mode = bool(requests) and requests[0].capacity is not None
    window = getattr(policy, "window", 0) if policy.needs_history else 0
    state = DataCenterState(
        scenario.catalog, scenario.pm_fleet, scheme,
        scalar_mode=scalar_mode, slot_length=scenario.slot_length,
        history_window=window, keep_event_log=scenario.keep_event_log,
    )
    policy_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=scenario.seed, spawn_key=(1,))))

    arrivals = sorted(requests, key=lambda r: (r.start_time, r.request_id))
    # per-type demand fractions against every PM, computed once
    if not scalar_mode:
        frac_by_type = {
            vm.type_id: np.array([vm.cpu_units, vm.mem_gb, vm.bw]) / state.caps
            for vm in scenario.catalog.vm_types
        }

    heap: list[tuple[float, int]] = []
    rejected: list[tuple[int, str]] = []
    accepted = 0
    migrations = 0
    horizon = 0.0
    m = scenario.migration_interval
    next_tick = m if m is not None else math.inf
    inf = math.inf
    i = 0
    n_arr = len(arrivals)

    while i < n_arr or heap:
        t_dep = heap[0][0] if heap else inf
        t_arr = arrivals[i].start_time if i < n_arr else inf
        if m is not None:
            if state.total_active == 0 and next_tick < min(t_dep, t_arr):
                # idle floor: skip no-op ticks up to the next real event
                next_tick = math.ceil(min(t_dep, t_arr) / m) * m
            t_tick = next_tick
        else:
            t_tick = inf

        if t_dep <= t_arr and t_dep <= t_tick:
            t, request_id = heapq.heappop(heap)
            state.advance_time(t)
            state.release(request_id)
        elif t_arr <= t_tick:
            r = arrivals[i]
            i += 1
            state.advance_time(r.start_time)
            if scalar_mode:
                demand = r.capacity
            else:
                demand = frac_by_type[r.vm_type_id]
            ctx = PolicyContext(state.usage, demand,
                                (r.start_time, r.end_time), policy_rng,
                                state.history_array())
            pm_id = policy.select_host(ctx)
            if pm_id is None:
                rejected.append((r.request_id, _REJECT_REASON))
                state._log("reject", r.request_id, 0, _REJECT_REASON)
            else:
                state.allocate(r, pm_id)
                heapq.heappush(heap, (r.end_time, r.request_id))
                accepted += 1
                if r.end_time > horizon:
                    horizon = r.end_time
        else:
            state.advance_time(next_tick)
            migrations += state.migration_step(next_tick)
            next_tick += m

    state.advance_time(max(horizon, state.time))

    # close power-on accounting
    on_intervals: list[tuple[tuple[float, float], ...]] = []
    for pm in state.pms:
        if scheme.allows_sleep:
            ivs = tuple((t0, t1) for t0, t1 in pm.on_intervals)
        else:
            ivs = ((0.0, horizon),) if pm.ever_used and horizon > 0 else ()
        on_intervals.append(ivs)

    result = SimulationResult(
        n_pms=state.n,
        pm_type_ids=tuple(pm.pm_type_id for pm in state.pms),
        caps=state.caps,
        cores=state.cores,
        p_max=state.p_max,
        p_min=state.p_min,
        scalar_mode=scalar_mode,
        slot_length=scenario.slot_length,
        makespan_time=horizon,
        n_requests=len(requests),
        accepted_count=accepted,
        rejected_requests=tuple(rejected),
        migration_count=migrations,
        power_on_intervals=tuple(on_intervals),
        pms_used=sum(1 for pm in state.pms if pm.ever_used),
        policy_name=scenario.policy,
        scheme_name=scheme.name,
        seed=scenario.seed,
        ev_times=tuple(pm.ev_times for pm in state.pms),
        ev_cpu=tuple(pm.ev_cpu for pm in state.pms),
        ev_mem=None if scalar_mode else tuple(pm.ev_mem for pm in state.pms),
        ev_bw=None if scalar_mode else tuple(pm.ev_bw for pm in state.pms),
        event_log=state.event_log,
        wall_time_s=_time.perf_counter() - wall0,
    )
    return result
