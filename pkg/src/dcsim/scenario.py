"""Scenario files: sectioned key-value text describing one experiment.

Every key can be overridden from the environment with SIM_<SECTION>_<KEY>
(for example SIM_WORKLOAD_COUNT=500 or SIM_POLICY_NAME=lif).
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path
from typing import Mapping

from .catalog import Catalog, builtin_ec2_catalog, load_catalog
from .engine import Scenario
from .metrics import Pricing
from .policies import PowerScheme
from .workload import WorkloadSpec, read_trace

__all__ = ["ScenarioError", "load_scenario", "scenario_from_text", "SCHEMA"]

ENV_PREFIX = "SIM_"

SCHEMA = """\
Scenario file schema (sectioned key-value text). Optional keys show their
defaults; every key can be overridden with the environment variable
SIM_<SECTION>_<KEY>.

[fleet]
catalog = builtin            ; 'builtin' or path to a catalog file
pm_types = 1:4, 2:2          ; comma list of pm_type_id:count

[workload]
; either replay a trace ...
trace =                      ; path to a trace CSV (overrides generation)
; ... or generate one:
count = 100                  ; number of requests (> 0)
arrival_rate = 1.0           ; Poisson arrivals per second
mean_duration = 60.0         ; exponential mean lifetime, seconds
max_duration = 600.0         ; lifetime truncation cap, seconds
type_mix = uniform           ; 'uniform' or comma list of vm_type_id:prob
seed =                       ; optional; defaults to the per-run seed
capacity_min =               ; optional pair; set both to draw scalar-mode
capacity_max =               ; capacities uniformly from [min, max]

[policy]
name = firstfit              ; firstfit|roundrobin|random|rs|lif|mu|mc
cpu_only = false             ; lif/mu: rank by cpu instead of integrated load
window = 12                  ; mc: history slots used for correlation

[power]
scheme = linear              ; npa|linear|dvfs|dns_dvfs
k = 0.7                      ; linear: idle fraction of p_max
p_fixed = 100.0              ; dvfs: frequency-independent watts
p_f = 20.0                   ; dvfs: cubic frequency coefficient, watts
f_min = 0.1                  ; dvfs: lower frequency clamp
sleep_power = 0.0            ; watts drawn by a sleeping host

[run]
slot_length = 5.0            ; seconds per utilization slot
migration_interval =         ; seconds between migration ticks; empty = off
repetitions = 1              ; independent runs, seeds seed, seed+1, ...
seed = 1                     ; base seed
ilb_variant = per_server     ; per_server|literal imbalance formula

[pricing]                    ; optional section; enables the cost-per-task metric
c_h = 1.0                    ; machine usage price per hour
tracing_interval = 1.0
task_tracing_interval = 1.0
n_vm = 1
n_c = 1
"""

_SECTIONS = {"fleet", "workload", "policy", "power", "run", "pricing"}

_KEYS = {
    "fleet": {"catalog", "pm_types"},
    "workload": {"trace", "count", "arrival_rate", "mean_duration", "max_duration",
                 "type_mix", "seed", "capacity_min", "capacity_max"},
    "policy": {"name", "cpu_only", "window"},
    "power": {"scheme", "k", "p_fixed", "p_f", "f_min", "sleep_power"},
    "run": {"slot_length", "migration_interval", "repetitions", "seed", "ilb_variant"},
    "pricing": {"c_h", "tracing_interval", "task_tracing_interval", "n_vm", "n_c"},
}


class ScenarioError(ValueError):
    """A scenario file is malformed or inconsistent."""


def _get(cfg: dict[str, dict[str, str]], section: str, key: str,
         default: str | None = None) -> str | None:
    value = cfg.get(section, {}).get(key, default)
    if value is not None and value.strip() == "":
        return default
    return value


def _number(section: str, key: str, raw: str, as_int: bool = False):
    try:
        return int(raw) if as_int else float(raw)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: not a number: {raw!r}") from None


def _boolean(section: str, key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ScenarioError(f"[{section}] {key}: not a boolean: {raw!r}")


def _parse_pairs(section: str, key: str, raw: str) -> list[tuple[int, float]]:
    out = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ScenarioError(f"[{section}] {key}: expected id:value pairs, got {part!r}")
        left, right = part.split(":", 1)
        out.append((_number(section, key, left.strip(), as_int=True),
                    _number(section, key, right.strip())))
    if not out:
        raise ScenarioError(f"[{section}] {key}: empty")
    return out


def _apply_env(cfg: dict[str, dict[str, str]], env: Mapping[str, str]) -> None:
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section, _, key = rest.partition("_")
        if section in _SECTIONS and key:
            cfg.setdefault(section, {})[key] = value


def scenario_from_text(text: str, *, base_dir: Path | None = None,
                       env: Mapping[str, str] | None = None,
                       keep_event_log: bool = False) -> Scenario:
    """Build a Scenario from scenario-file text.

    env defaults to the process environment; pass {} to disable overrides.
    Relative catalog/trace paths resolve against base_dir.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"scenario parse error: {exc}") from None

    cfg: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        name = section.lower()
        if name not in _SECTIONS:
            raise ScenarioError(f"unknown section [{section}]; "
                                f"expected one of {', '.join(sorted(_SECTIONS))}")
        cfg[name] = dict(parser.items(section))
        unknown = set(cfg[name]) - _KEYS[name]
        if unknown:
            raise ScenarioError(f"[{section}]: unknown keys: {', '.join(sorted(unknown))}")
    _apply_env(cfg, os.environ if env is None else env)

    base = base_dir or Path.cwd()

    catalog_src = _get(cfg, "fleet", "catalog", "builtin")
    if catalog_src == "builtin":
        catalog = builtin_ec2_catalog()
    else:
        catalog = load_catalog((base / catalog_src).read_text())

    fleet_raw = _get(cfg, "fleet", "pm_types")
    if fleet_raw is None:
        raise ScenarioError("[fleet] pm_types is required")
    pm_fleet = tuple((tid, int(count)) for tid, count in _parse_pairs("fleet", "pm_types", fleet_raw))
    known_pms = set(catalog.pm_ids())
    for tid, _ in pm_fleet:
        if tid not in known_pms:
            raise ScenarioError(f"[fleet] pm_types: unknown pm type_id {tid}")

    workload = _build_workload(cfg, catalog, base)
    policy_name, policy_params = _build_policy(cfg)
    scheme = _build_scheme(cfg)
    pricing = _build_pricing(cfg)

    slot_length = _number("run", "slot_length", _get(cfg, "run", "slot_length", "5.0"))
    mig_raw = _get(cfg, "run", "migration_interval")
    migration_interval = None if mig_raw is None else _number("run", "migration_interval", mig_raw)
    repetitions = _number("run", "repetitions", _get(cfg, "run", "repetitions", "1"), as_int=True)
    seed = _number("run", "seed", _get(cfg, "run", "seed", "1"), as_int=True)
    ilb_variant = _get(cfg, "run", "ilb_variant", "per_server")
    if ilb_variant not in ("per_server", "literal"):
        raise ScenarioError(f"[run] ilb_variant: expected per_server or literal, got {ilb_variant!r}")

    try:
        return Scenario(
            catalog=catalog,
            pm_fleet=pm_fleet,
            workload=workload,
            slot_length=slot_length,
            migration_interval=migration_interval,
            policy=policy_name,
            policy_params=policy_params,
            power_scheme=scheme,
            repetitions=repetitions,
            seed=seed,
            keep_event_log=keep_event_log,
            pricing=pricing,
            ilb_variant=ilb_variant,
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def _build_workload(cfg, catalog: Catalog, base: Path):
    trace = _get(cfg, "workload", "trace")
    if trace is not None:
        return tuple(read_trace((base / trace).read_text()))
    count = _number("workload", "count", _get(cfg, "workload", "count", "100"), as_int=True)
    rate = _number("workload", "arrival_rate", _get(cfg, "workload", "arrival_rate", "1.0"))
    mean_d = _number("workload", "mean_duration", _get(cfg, "workload", "mean_duration", "60.0"))
    max_d = _number("workload", "max_duration", _get(cfg, "workload", "max_duration", "600.0"))
    mix_raw = _get(cfg, "workload", "type_mix", "uniform")
    if mix_raw == "uniform":
        ids = catalog.vm_ids()
        mix = {tid: 1.0 / len(ids) for tid in ids}
    else:
        mix = dict(_parse_pairs("workload", "type_mix", mix_raw))
    seed_raw = _get(cfg, "workload", "seed")
    seed = None if seed_raw is None else _number("workload", "seed", seed_raw, as_int=True)
    cap_lo = _get(cfg, "workload", "capacity_min")
    cap_hi = _get(cfg, "workload", "capacity_max")
    if (cap_lo is None) != (cap_hi is None):
        raise ScenarioError("[workload] capacity_min and capacity_max must be set together")
    capacity_range = None
    if cap_lo is not None:
        capacity_range = (_number("workload", "capacity_min", cap_lo),
                          _number("workload", "capacity_max", cap_hi))
    try:
        return WorkloadSpec(count=count, arrival_rate=rate, mean_duration=mean_d,
                            max_duration=max_d, type_mix=mix, seed=seed,
                            capacity_range=capacity_range)
    except ValueError as exc:
        raise ScenarioError(f"[workload] {exc}") from None


def _build_policy(cfg) -> tuple[str, dict]:
    name = _get(cfg, "policy", "name", "firstfit")
    params: dict = {}
    cpu_only = _get(cfg, "policy", "cpu_only")
    if cpu_only is not None:
        params["cpu_only"] = _boolean("policy", "cpu_only", cpu_only)
    window = _get(cfg, "policy", "window")
    if window is not None:
        params["window"] = _number("policy", "window", window, as_int=True)
    return name, params


def _build_scheme(cfg) -> PowerScheme:
    name = _get(cfg, "power", "scheme", "linear")
    kwargs = {}
    for key in ("k", "p_fixed", "p_f", "f_min", "sleep_power"):
        raw = _get(cfg, "power", key)
        if raw is not None:
            kwargs[key] = _number("power", key, raw)
    try:
        return PowerScheme(name, **kwargs)
    except ValueError as exc:
        raise ScenarioError(f"[power] {exc}") from None


def _build_pricing(cfg) -> Pricing | None:
    if "pricing" not in cfg:
        return None
    try:
        return Pricing(
            c_h=_number("pricing", "c_h", _get(cfg, "pricing", "c_h", "1.0")),
            tracing_interval=_number("pricing", "tracing_interval",
                                     _get(cfg, "pricing", "tracing_interval", "1.0")),
            task_tracing_interval=_number("pricing", "task_tracing_interval",
                                          _get(cfg, "pricing", "task_tracing_interval", "1.0")),
            n_vm=_number("pricing", "n_vm", _get(cfg, "pricing", "n_vm", "1"), as_int=True),
            n_c=_number("pricing", "n_c", _get(cfg, "pricing", "n_c", "1"), as_int=True),
        )
    except ValueError as exc:
        raise ScenarioError(f"[pricing] {exc}") from None


def load_scenario(path: str | Path, *, env: Mapping[str, str] | None = None,
                  keep_event_log: bool = False) -> Scenario:
    """Read and build a scenario from a file; relative paths inside it resolve
    against the file's directory."""
    p = Path(path)
    return scenario_from_text(p.read_text(), base_dir=p.parent, env=env,
                              keep_event_log=keep_event_log)
