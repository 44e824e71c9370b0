"""Machine-type catalogs: the built-in EC2-style catalog plus user-defined ones.

A catalog pairs a set of VM types (resource demand vectors) with a set of
physical-machine types (capacity vectors plus idle/full-load power bounds).
Catalogs are immutable after construction and safe to share between runs.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

__all__ = [
    "CatalogError",
    "VmType",
    "PmType",
    "Catalog",
    "Violation",
    "builtin_ec2_catalog",
    "load_catalog",
    "serialize_catalog",
    "validate_catalog",
    "format_number",
]

_CONSISTENCY_TOL = 1e-9


class CatalogError(ValueError):
    """Catalog text failed to parse, or a catalog invariant does not hold."""


def format_number(x: float) -> str:
    """Render a float compactly; integral values lose the trailing '.0'.

    The output round-trips exactly through float().
    """
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


@dataclass(frozen=True)
class VmType:
    """One VM size: total CPU capacity in compute units, memory, bandwidth."""

    type_id: int
    cpu_units: float
    cpu_cores: int
    mem_gb: float
    bw: float

    @classmethod
    def from_cores(cls, type_id: int, cpu_cores: int, units_per_core: float,
                   mem_gb: float, bw: float) -> "VmType":
        """Build from a cores x units-per-core spec; total units are derived."""
        return cls(type_id, cpu_cores * units_per_core, cpu_cores, mem_gb, bw)


@dataclass(frozen=True)
class PmType:
    """One physical-machine size, with idle (p_min) and full-load (p_max) watts."""

    type_id: int
    cpu_units: float
    cpu_cores: int
    mem_gb: float
    bw: float
    p_min: float
    p_max: float

    @classmethod
    def from_cores(cls, type_id: int, cpu_cores: int, units_per_core: float,
                   mem_gb: float, bw: float, p_min: float, p_max: float) -> "PmType":
        return cls(type_id, cpu_cores * units_per_core, cpu_cores, mem_gb, bw,
                   p_min, p_max)


@dataclass(frozen=True)
class Catalog:
    """An immutable collection of VM and PM types, keyed by type_id."""

    vm_types: tuple[VmType, ...]
    pm_types: tuple[PmType, ...]

    def __post_init__(self):
        object.__setattr__(self, "_vm_by_id", {t.type_id: t for t in self.vm_types})
        object.__setattr__(self, "_pm_by_id", {t.type_id: t for t in self.pm_types})

    def vm(self, type_id: int) -> VmType:
        try:
            return self._vm_by_id[type_id]
        except KeyError:
            raise CatalogError(f"unknown VM type_id {type_id}") from None

    def pm(self, type_id: int) -> PmType:
        try:
            return self._pm_by_id[type_id]
        except KeyError:
            raise CatalogError(f"unknown PM type_id {type_id}") from None

    def vm_ids(self) -> tuple[int, ...]:
        return tuple(t.type_id for t in self.vm_types)

    def pm_ids(self) -> tuple[int, ...]:
        return tuple(t.type_id for t in self.pm_types)


@dataclass(frozen=True)
class Violation:
    """One broken catalog rule, identifying the offending type."""

    kind: str        # "vm" | "pm"
    type_id: int
    rule: str        # "duplicate_id" | "positive_fields" | "power_bounds" | "unallocatable"
    message: str

    def __str__(self) -> str:
        return f"{self.kind} type {self.type_id}: {self.rule}: {self.message}"


# Published EC2-style machine tables: (type_id, cores, units_per_core, mem_gb, bw).
_BUILTIN_VMS = (
    (1, 1, 1.0, 1.7, 160.0),
    (2, 2, 2.0, 7.5, 850.0),
    (3, 4, 2.0, 15.0, 1690.0),
    (4, 2, 3.25, 17.1, 420.0),
    (5, 4, 3.25, 34.2, 850.0),
    (6, 8, 3.25, 68.4, 1690.0),
    (7, 2, 2.5, 1.7, 350.0),
    (8, 8, 2.5, 7.0, 1690.0),
)

# (type_id, cores, units_per_core, mem_gb, bw, p_min_w, p_max_w)
_BUILTIN_PMS = (
    (1, 4, 4.0, 30.0, 3380.0, 210.0, 300.0),
    (2, 16, 3.25, 136.8, 3380.0, 420.0, 600.0),
    (3, 16, 2.5, 14.0, 3380.0, 350.0, 500.0),
)


def builtin_ec2_catalog() -> Catalog:
    """The built-in catalog of 8 VM types and 3 PM types (EC2-style sizes)."""
    vms = tuple(VmType.from_cores(*row) for row in _BUILTIN_VMS)
    pms = tuple(PmType.from_cores(*row) for row in _BUILTIN_PMS)
    return Catalog(vms, pms)


def validate_catalog(catalog: Catalog) -> list[Violation]:
    """Check every catalog invariant; returns violations instead of raising."""
    out: list[Violation] = []

    seen: set[int] = set()
    for vm in catalog.vm_types:
        if vm.type_id in seen:
            out.append(Violation("vm", vm.type_id, "duplicate_id",
                                 "type_id appears more than once"))
        seen.add(vm.type_id)
        if not (vm.cpu_units > 0 and vm.cpu_cores >= 1 and vm.mem_gb > 0 and vm.bw > 0):
            out.append(Violation("vm", vm.type_id, "positive_fields",
                                 "cpu_units/mem_gb/bw must be > 0 and cpu_cores >= 1"))

    seen = set()
    for pm in catalog.pm_types:
        if pm.type_id in seen:
            out.append(Violation("pm", pm.type_id, "duplicate_id",
                                 "type_id appears more than once"))
        seen.add(pm.type_id)
        if not (pm.cpu_units > 0 and pm.cpu_cores >= 1 and pm.mem_gb > 0 and pm.bw > 0):
            out.append(Violation("pm", pm.type_id, "positive_fields",
                                 "resource fields must be > 0 and cpu_cores >= 1"))
        if not (0 < pm.p_min < pm.p_max):
            out.append(Violation("pm", pm.type_id, "power_bounds",
                                 f"need 0 < p_min < p_max, got {pm.p_min}/{pm.p_max}"))

    # A VM type no PM can host on every dimension is unallocatable by construction.
    for vm in catalog.vm_types:
        fits = any(vm.cpu_units <= pm.cpu_units and vm.mem_gb <= pm.mem_gb
                   and vm.bw <= pm.bw for pm in catalog.pm_types)
        if not fits:
            out.append(Violation("vm", vm.type_id, "unallocatable",
                                 "no PM type can host it on all of cpu/mem/bw"))
    return out


_VM_FIELDS = ("type_id", "cpu_units", "cpu_cores", "mem_gb", "bw")
_PM_FIELDS = _VM_FIELDS + ("p_min_w", "p_max_w")


def serialize_catalog(catalog: Catalog) -> str:
    """Render a catalog as sectioned key-value text; inverse of load_catalog."""
    lines: list[str] = []
    for vm in catalog.vm_types:
        lines.append(f"[vm {vm.type_id}]")
        lines.append(f"type_id = {vm.type_id}")
        lines.append(f"cpu_units = {format_number(vm.cpu_units)}")
        lines.append(f"cpu_cores = {vm.cpu_cores}")
        lines.append(f"mem_gb = {format_number(vm.mem_gb)}")
        lines.append(f"bw = {format_number(vm.bw)}")
        lines.append("")
    for pm in catalog.pm_types:
        lines.append(f"[pm {pm.type_id}]")
        lines.append(f"type_id = {pm.type_id}")
        lines.append(f"cpu_units = {format_number(pm.cpu_units)}")
        lines.append(f"cpu_cores = {pm.cpu_cores}")
        lines.append(f"mem_gb = {format_number(pm.mem_gb)}")
        lines.append(f"bw = {format_number(pm.bw)}")
        lines.append(f"p_min_w = {format_number(pm.p_min)}")
        lines.append(f"p_max_w = {format_number(pm.p_max)}")
        lines.append("")
    return "\n".join(lines)


def _parse_number(section: str, key: str, raw: str, as_int: bool = False):
    try:
        return int(raw) if as_int else float(raw)
    except ValueError:
        raise CatalogError(f"[{section}] {key}: not a number: {raw!r}") from None


def load_catalog(text: str) -> Catalog:
    """Parse sectioned key-value catalog text and enforce all invariants.

    Sections are named "vm <label>" or "pm <label>"; fields are exactly
    type_id, cpu_units, cpu_cores, mem_gb, bw, and for PMs p_min_w/p_max_w.
    Unknown keys are errors.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise CatalogError(f"catalog parse error: {exc}") from None

    vms: list[VmType] = []
    pms: list[PmType] = []
    for section in parser.sections():
        kind = section.split()[0].lower() if section.split() else ""
        if kind not in ("vm", "pm"):
            raise CatalogError(f"[{section}]: section must start with 'vm' or 'pm'")
        fields = _PM_FIELDS if kind == "pm" else _VM_FIELDS
        items = dict(parser.items(section))
        unknown = set(items) - set(fields)
        if unknown:
            raise CatalogError(f"[{section}]: unknown keys: {', '.join(sorted(unknown))}")
        missing = set(fields) - set(items)
        if missing:
            raise CatalogError(f"[{section}]: missing keys: {', '.join(sorted(missing))}")
        type_id = _parse_number(section, "type_id", items["type_id"], as_int=True)
        cpu_units = _parse_number(section, "cpu_units", items["cpu_units"])
        cpu_cores = _parse_number(section, "cpu_cores", items["cpu_cores"], as_int=True)
        mem_gb = _parse_number(section, "mem_gb", items["mem_gb"])
        bw = _parse_number(section, "bw", items["bw"])
        if kind == "vm":
            vms.append(VmType(type_id, cpu_units, cpu_cores, mem_gb, bw))
        else:
            p_min = _parse_number(section, "p_min_w", items["p_min_w"])
            p_max = _parse_number(section, "p_max_w", items["p_max_w"])
            pms.append(PmType(type_id, cpu_units, cpu_cores, mem_gb, bw, p_min, p_max))

    catalog = Catalog(tuple(vms), tuple(pms))
    violations = validate_catalog(catalog)
    if violations:
        raise CatalogError("invalid catalog: " + "; ".join(str(v) for v in violations))
    return catalog
