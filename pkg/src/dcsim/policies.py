"""Host-selection policies, power-management schemes, and the shared
consolidation proposer used by the migration loop.

Policies are pure given their context; the only state is Round-Robin's cursor
and the PRNG handle, both owned by a single run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "CAPACITY_TOL",
    "PowerScheme",
    "PolicyContext",
    "Policy",
    "FirstFitPolicy",
    "RoundRobinPolicy",
    "RandomPolicy",
    "LowestUtilizationPolicy",
    "MaxCorrelationPolicy",
    "POLICY_NAMES",
    "make_policy",
    "instantaneous_power",
    "propose_migrations",
]

# Equality slack on capacity checks so exact fits survive float arithmetic.
CAPACITY_TOL = 1e-9

SCHEME_NAMES = ("npa", "linear", "dvfs", "dns_dvfs")


@dataclass(frozen=True)
class PowerScheme:
    """A named power model plus its parameters.

    npa:      hosts draw p_max whenever on; no sleep, so consolidation never
              pays off and no migrations happen.
    linear:   idle fraction k of p_max plus a load-proportional term; idle
              hosts may sleep.
    dvfs:     p_fixed + p_f * f^3 with frequency following load (clamped to
              [f_min, 1]); no sleep.
    dns_dvfs: dvfs for powered-on hosts, sleep power for idle hosts that were
              shut down.
    """

    name: str
    k: float = 0.7
    p_fixed: float = 100.0
    p_f: float = 20.0
    f_min: float = 0.1
    sleep_power: float = 0.0

    def __post_init__(self):
        if self.name not in SCHEME_NAMES:
            raise ValueError(f"unknown power scheme {self.name!r}; "
                             f"expected one of {', '.join(SCHEME_NAMES)}")
        if not 0 < self.k < 1:
            raise ValueError("k must lie in (0, 1)")
        if self.p_fixed <= 0 or self.p_f <= 0:
            raise ValueError("p_fixed and p_f must be > 0")
        if not 0 < self.f_min <= 1:
            raise ValueError("f_min must lie in (0, 1]")
        if self.sleep_power < 0:
            raise ValueError("sleep_power must be >= 0")

    @property
    def allows_sleep(self) -> bool:
        return self.name in ("linear", "dns_dvfs")

    def power(self, u, p_max):
        """Power draw in watts of a powered-on host at cpu utilization u.

        Accepts scalars or arrays; u must already lie in [0, 1].
        """
        if self.name == "npa":
            return p_max * np.ones_like(np.asarray(u, dtype=float)) if np.ndim(u) else float(p_max)
        if self.name == "linear":
            return self.k * p_max + (1.0 - self.k) * p_max * u
        f = np.clip(u, self.f_min, 1.0)
        return self.p_fixed + self.p_f * f ** 3


def instantaneous_power(scheme: PowerScheme, pm, u: float) -> float:
    """Watts drawn by one host at cpu utilization u under the given scheme.

    pm supplies p_max and, optionally, power_state; a sleeping host draws the
    scheme's sleep power regardless of u.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"cpu utilization must lie in [0, 1], got {u}")
    if getattr(pm, "power_state", "on") == "sleep":
        return scheme.sleep_power
    return float(scheme.power(u, pm.p_max))


@dataclass
class PolicyContext:
    """Read-only decision context handed to a policy for one arrival.

    utilization: current per-PM usage fractions, shape (n,) or (n, 3).
    demand: the candidate's demand as fractions of each PM's capacity,
    broadcastable against utilization. history, when present, holds the most
    recent per-slot cpu utilizations, shape (slots, n).
    """

    utilization: np.ndarray
    demand: np.ndarray
    interval: tuple[float, float] = (0.0, 0.0)
    rng: np.random.Generator | None = None
    history: np.ndarray | None = None
    tol: float = CAPACITY_TOL

    def __post_init__(self):
        self.utilization = np.asarray(self.utilization, dtype=float)
        self.demand = np.asarray(self.demand, dtype=float)
        self._mask: np.ndarray | None = None

    @property
    def n_pms(self) -> int:
        return self.utilization.shape[0]

    def feasible_mask(self) -> np.ndarray:
        """Boolean mask of PMs that can host the candidate right now."""
        if self._mask is None:
            fits = self.utilization + self.demand <= 1.0 + self.tol
            self._mask = fits if fits.ndim == 1 else fits.all(axis=1)
        return self._mask

    def integrated_load(self) -> np.ndarray:
        """Per-PM mean utilization across resource dimensions."""
        if self.utilization.ndim == 1:
            return self.utilization
        return self.utilization.mean(axis=1)


class Policy:
    """Base host selector; subclasses return a 1-based pm_id or None (reject)."""

    name = "?"
    needs_history = False

    def select_host(self, ctx: PolicyContext) -> int | None:
        raise NotImplementedError


class FirstFitPolicy(Policy):
    """Lowest-numbered feasible PM."""

    name = "firstfit"

    def select_host(self, ctx: PolicyContext) -> int | None:
        mask = ctx.feasible_mask()
        if not mask.any():
            return None
        return int(np.argmax(mask)) + 1


class RoundRobinPolicy(Policy):
    """First feasible PM at or after a persistent cursor; full cycle scan."""

    name = "roundrobin"

    def __init__(self):
        self._cursor = 0

    def select_host(self, ctx: PolicyContext) -> int | None:
        mask = ctx.feasible_mask()
        if not mask.any():
            return None
        n = ctx.n_pms
        rolled = np.roll(mask, -self._cursor)
        offset = int(np.argmax(rolled))
        chosen = (self._cursor + offset) % n
        self._cursor = (chosen + 1) % n
        return chosen + 1


class RandomPolicy(Policy):
    """Uniform choice among feasible PMs, drawn from the context PRNG."""

    name = "random"

    def select_host(self, ctx: PolicyContext) -> int | None:
        feasible = np.flatnonzero(ctx.feasible_mask())
        if feasible.size == 0:
            return None
        if ctx.rng is None:
            raise ValueError("random policy requires a PRNG in the context")
        return int(feasible[ctx.rng.integers(feasible.size)]) + 1


class LowestUtilizationPolicy(Policy):
    """Feasible PM with the smallest integrated load; ties go to the lowest id.

    cpu_only=True ranks by the cpu dimension alone instead of the integrated
    mean.
    """

    name = "lif"

    def __init__(self, cpu_only: bool = False):
        self.cpu_only = bool(cpu_only)

    def select_host(self, ctx: PolicyContext) -> int | None:
        mask = ctx.feasible_mask()
        if not mask.any():
            return None
        if self.cpu_only and ctx.utilization.ndim == 2:
            score = ctx.utilization[:, 0]
        else:
            score = ctx.integrated_load()
        ranked = np.where(mask, score, np.inf)
        return int(np.argmin(ranked)) + 1


class MaxCorrelationPolicy(Policy):
    """Feasible PM whose cpu history best tracks the datacenter-mean history.

    Needs at least two recorded history slots; zero-variance histories rank
    last, and with no usable history the lowest feasible id wins.
    """

    name = "mc"
    needs_history = True

    def __init__(self, window: int = 12):
        if window < 2:
            raise ValueError("window must be >= 2")
        self.window = int(window)

    def select_host(self, ctx: PolicyContext) -> int | None:
        mask = ctx.feasible_mask()
        if not mask.any():
            return None
        hist = ctx.history
        # Degenerate correlations score below any Pearson r.
        score = np.full(ctx.n_pms, -2.0)
        if hist is not None and hist.shape[0] >= 2:
            hist = np.asarray(hist, dtype=float)
            target = hist.mean(axis=1)
            t_dev = target - target.mean()
            t_norm = float(np.sqrt(np.sum(t_dev ** 2)))
            if t_norm > 0:
                devs = hist - hist.mean(axis=0)
                norms = np.sqrt(np.sum(devs ** 2, axis=0))
                ok = norms > 0
                with np.errstate(invalid="ignore", divide="ignore"):
                    r = (t_dev @ devs) / (t_norm * norms)
                score[ok] = r[ok]
        ranked = np.where(mask, score, -np.inf)
        return int(np.argmax(ranked)) + 1


POLICY_NAMES = ("firstfit", "roundrobin", "random", "rs", "lif", "mu", "mc")


def make_policy(name: str, **params) -> Policy:
    """Instantiate a policy by its registered name (one instance per run)."""
    key = name.lower()
    if key == "firstfit":
        return FirstFitPolicy(**params)
    if key == "roundrobin":
        return RoundRobinPolicy(**params)
    if key in ("random", "rs"):
        return RandomPolicy(**params)
    if key in ("lif", "mu"):
        return LowestUtilizationPolicy(**params)
    if key == "mc":
        return MaxCorrelationPolicy(**params)
    raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")


def propose_migrations(
    utilization: np.ndarray,
    allocations: Sequence[tuple[int, int, np.ndarray]],
    caps: np.ndarray | None = None,
    tol: float = CAPACITY_TOL,
) -> list[tuple[int, int, int]]:
    """Greedy consolidation proposal: (request_id, from_pm, to_pm) triples.

    Sources are scanned in ascending integrated load; the first busy PM whose
    VMs have somewhere to go is drained toward the most-utilized feasible
    hosts that are at least as loaded as the source (so proposals only move
    load uphill). allocations holds (request_id, pm_index, absolute demand)
    for every active allocation; caps converts absolute demand to per-PM
    fractions (omit when capacities are uniformly 1). The proposal is
    computed against this snapshot; the engine re-validates each move.
    """
    util = np.asarray(utilization, dtype=float)
    load = util if util.ndim == 1 else util.mean(axis=1)
    n = load.shape[0]
    by_src: dict[int, list[tuple[int, np.ndarray]]] = {}
    for request_id, src, demand in allocations:
        by_src.setdefault(src, []).append((request_id, np.asarray(demand, dtype=float)))

    for src in sorted(by_src, key=lambda j: (load[j], j)):
        proposals: list[tuple[int, int, int]] = []
        for request_id, demand in sorted(by_src[src], key=lambda item: item[0]):
            frac = demand / caps if caps is not None else demand
            fits = util + frac <= 1.0 + tol
            mask = fits if fits.ndim == 1 else fits.all(axis=1)
            mask[src] = False
            mask &= load >= load[src]
            if not mask.any():
                continue
            ranked = np.where(mask, load, -np.inf)
            dst = int(np.argmax(ranked))
            proposals.append((request_id, src + 1, dst + 1))
        if proposals:
            return proposals
    return []
