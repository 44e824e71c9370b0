"""dcsim: a deterministic, seeded discrete-event simulator for VM scheduling
in IaaS datacenters, with pluggable placement policies, power-management
schemes, and a load-imbalance / energy / cost metric suite."""

from .catalog import (
    Catalog,
    CatalogError,
    PmType,
    VmType,
    builtin_ec2_catalog,
    load_catalog,
    serialize_catalog,
    validate_catalog,
)
from .engine import (
    Allocation,
    DataCenterState,
    PmInstance,
    Scenario,
    SimulationError,
    SimulationResult,
    can_host,
    run_simulation,
)
from .metrics import (
    MetricReport,
    Pricing,
    UtilizationSnapshot,
    confidence_interval,
    summarize,
)
from .policies import PolicyContext, PowerScheme, instantaneous_power, make_policy
from .scenario import ScenarioError, load_scenario, scenario_from_text
from .workload import (
    TraceError,
    VmRequest,
    WorkloadSpec,
    generate_workload,
    read_trace,
    write_trace,
)

__version__ = "0.1.0"
