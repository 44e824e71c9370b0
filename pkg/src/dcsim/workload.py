"""Lifecycle-bounded VM request generation and trace (de)serialization.

Requests arrive as a Poisson process (i.i.d. exponential gaps), live for an
exponentially distributed duration truncated at a configurable cap, and draw
their VM type from a categorical mix. Generation is a pure function of the
spec, including its seed: the PRNG is PCG64, whose stream is stable across
platforms and numpy releases, so seeds are portable.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .catalog import Catalog, format_number

__all__ = [
    "TraceError",
    "VmRequest",
    "WorkloadSpec",
    "generate_workload",
    "read_trace",
    "write_trace",
]

_MIX_TOL = 1e-9

TRACE_HEADER = ("request_id", "vm_type_id", "start_time", "end_time", "capacity")


class TraceError(ValueError):
    """A trace file row is malformed or violates a request invariant."""


@dataclass(slots=True)
class VmRequest:
    """One request: vm(type, start, end, capacity).

    capacity, when present, is a normalized single-resource demand in (0, 1]
    (scalar mode). When absent the demand is the full resource vector of the
    VM type (multi-dimensional mode).
    """

    request_id: int
    vm_type_id: int
    start_time: float
    end_time: float
    capacity: float | None = None

    def __post_init__(self):
        if self.start_time < 0:
            raise ValueError(f"request {self.request_id}: start_time < 0")
        if not self.end_time > self.start_time:
            raise ValueError(f"request {self.request_id}: end_time must exceed start_time")
        if self.capacity is not None and not (0 < self.capacity <= 1):
            raise ValueError(f"request {self.request_id}: capacity must be in (0, 1]")


@dataclass(frozen=True)
class WorkloadSpec:
    """Parameters of the stochastic request stream.

    capacity_range, when set, draws a per-request scalar capacity uniformly
    from [lo, hi] and selects scalar mode; leave None for multi-dimensional
    demand taken from the VM type.
    """

    count: int
    arrival_rate: float
    mean_duration: float
    max_duration: float
    type_mix: Mapping[int, float]
    seed: int | None = None
    capacity_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("count must be > 0")
        if self.arrival_rate <= 0:
            raise ValueError("arrival_rate must be > 0")
        if self.mean_duration <= 0:
            raise ValueError("mean_duration must be > 0")
        if self.max_duration <= 0:
            raise ValueError("max_duration must be > 0")
        if not self.type_mix:
            raise ValueError("type_mix must not be empty")
        if any(p < 0 for p in self.type_mix.values()):
            raise ValueError("type_mix probabilities must be >= 0")
        total = sum(self.type_mix.values())
        if abs(total - 1.0) > _MIX_TOL:
            raise ValueError(f"type_mix must sum to 1 (got {total})")
        if self.capacity_range is not None:
            lo, hi = self.capacity_range
            if not (0 < lo <= hi <= 1):
                raise ValueError("capacity_range must satisfy 0 < lo <= hi <= 1")


def generate_workload(spec: WorkloadSpec, catalog: Catalog | None = None) -> list[VmRequest]:
    """Draw exactly spec.count requests, sorted by start time.

    Fully determined by spec (including spec.seed, which must be set).
    Draw order is fixed: arrival gaps, durations, types, then capacities.
    """
    if spec.seed is None:
        raise ValueError("WorkloadSpec.seed must be set to generate a workload")
    type_ids = sorted(spec.type_mix)
    if catalog is not None:
        known = set(catalog.vm_ids())
        unknown = [t for t in type_ids if t not in known]
        if unknown:
            raise ValueError(f"type_mix references unknown VM type_ids: {unknown}")

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.count
    gaps = rng.exponential(1.0 / spec.arrival_rate, n)
    starts = np.cumsum(gaps)
    durations = np.minimum(rng.exponential(spec.mean_duration, n), spec.max_duration)
    probs = np.array([spec.type_mix[t] for t in type_ids], dtype=float)
    probs = probs / probs.sum()  # renormalize away the <=1e-9 slack
    kinds = rng.choice(np.array(type_ids), size=n, p=probs)
    if spec.capacity_range is not None:
        lo, hi = spec.capacity_range
        caps = lo + (hi - lo) * rng.random(n)
    else:
        caps = None

    ends = starts + durations
    return [
        VmRequest(i + 1, int(kinds[i]), float(starts[i]), float(ends[i]),
                  float(caps[i]) if caps is not None else None)
        for i in range(n)
    ]


def write_trace(requests: Iterable[VmRequest]) -> str:
    """Serialize requests to CSV text (header line, LF endings)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for r in requests:
        writer.writerow([
            r.request_id,
            r.vm_type_id,
            format_number(r.start_time),
            format_number(r.end_time),
            "" if r.capacity is None else format_number(r.capacity),
        ])
    return buf.getvalue()


def read_trace(text: str) -> list[VmRequest]:
    """Parse trace CSV text; requests come back in file order.

    Raises TraceError naming the offending row on any malformed or
    invariant-violating row. An empty file yields an empty list.
    """
    rows = list(csv.reader(io.StringIO(text)))
    rows = [row for row in rows if row]  # drop blank lines
    if not rows:
        return []
    if tuple(rows[0]) != TRACE_HEADER:
        raise TraceError(f"bad header: expected {','.join(TRACE_HEADER)}")
    out: list[VmRequest] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(TRACE_HEADER):
            raise TraceError(f"row {lineno}: expected {len(TRACE_HEADER)} fields, got {len(row)}")
        try:
            request_id = int(row[0])
            vm_type_id = int(row[1])
            start = float(row[2])
            end = float(row[3])
            capacity = float(row[4]) if row[4] != "" else None
        except ValueError as exc:
            raise TraceError(f"row {lineno}: {exc}") from None
        try:
            out.append(VmRequest(request_id, vm_type_id, start, end, capacity))
        except ValueError as exc:
            raise TraceError(f"row {lineno}: {exc}") from None
    return out
