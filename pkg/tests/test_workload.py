import math

import numpy as np
import pytest

from dcsim.catalog import builtin_ec2_catalog
from dcsim.workload import (
    TraceError,
    VmRequest,
    WorkloadSpec,
    generate_workload,
    read_trace,
    write_trace,
)

UNIFORM_MIX = {t: 1.0 / 8 for t in range(1, 9)}


def spec(**overrides) -> WorkloadSpec:
    base = dict(count=100, arrival_rate=1.0, mean_duration=60.0,
                max_duration=600.0, type_mix=UNIFORM_MIX, seed=42)
    base.update(overrides)
    return WorkloadSpec(**base)


def test_generation_is_deterministic():
    a = generate_workload(spec())
    b = generate_workload(spec())
    assert a == b


def test_different_seeds_differ():
    assert generate_workload(spec(seed=1)) != generate_workload(spec(seed=2))


def test_output_sorted_by_start_time():
    reqs = generate_workload(spec(count=5000))
    starts = [r.start_time for r in reqs]
    assert starts == sorted(starts)


def test_interarrival_mean_matches_rate():
    n = 100_000
    reqs = generate_workload(spec(count=n, arrival_rate=1.0, seed=7))
    starts = np.array([r.start_time for r in reqs])
    gaps = np.diff(np.concatenate([[0.0], starts]))
    se = gaps.std(ddof=1) / math.sqrt(n)
    assert abs(gaps.mean() - 1.0) < 3 * se


def test_truncation_cap_is_hard():
    cap = 6.0  # mean/10
    reqs = generate_workload(spec(count=2000, mean_duration=60.0, max_duration=cap))
    assert all(r.end_time - r.start_time <= cap + 1e-12 for r in reqs)


def test_truncated_duration_mean_matches_analytic():
    n = 100_000
    mean_d, cap = 60.0, 120.0
    reqs = generate_workload(spec(count=n, mean_duration=mean_d, max_duration=cap, seed=9))
    durations = np.array([r.end_time - r.start_time for r in reqs])
    # E[min(X, c)] for X ~ Exp(mean m) is m * (1 - exp(-c/m))
    analytic = mean_d * (1.0 - math.exp(-cap / mean_d))
    se = durations.std(ddof=1) / math.sqrt(n)
    assert abs(durations.mean() - analytic) < 3 * se


def test_type_frequencies_match_mix():
    n = 100_000
    mix = {1: 0.5, 2: 0.3, 3: 0.2}
    reqs = generate_workload(spec(count=n, type_mix=mix, seed=3))
    for tid, p in mix.items():
        observed = sum(1 for r in reqs if r.vm_type_id == tid)
        sigma = math.sqrt(p * (1 - p) * n)
        assert abs(observed - p * n) < 3 * sigma


def test_capacity_range_draws_within_bounds():
    reqs = generate_workload(spec(count=500, capacity_range=(0.2, 0.4)))
    assert all(0.2 <= r.capacity <= 0.4 for r in reqs)


def test_unknown_type_in_mix_rejected():
    bad = spec(type_mix={123: 1.0})
    with pytest.raises(ValueError, match="unknown VM type_ids"):
        generate_workload(bad, builtin_ec2_catalog())


def test_seed_required():
    with pytest.raises(ValueError, match="seed"):
        generate_workload(spec(seed=None))


@pytest.mark.parametrize("kwargs", [
    dict(count=0),
    dict(arrival_rate=0.0),
    dict(mean_duration=-1.0),
    dict(max_duration=0.0),
    dict(type_mix={1: 0.5, 2: 0.6}),
    dict(type_mix={1: 1.5, 2: -0.5}),
    dict(capacity_range=(0.0, 0.5)),
    dict(capacity_range=(0.6, 0.5)),
])
def test_spec_invariants(kwargs):
    with pytest.raises(ValueError):
        spec(**kwargs)


def test_request_invariants():
    with pytest.raises(ValueError):
        VmRequest(1, 1, 5.0, 5.0)
    with pytest.raises(ValueError):
        VmRequest(1, 1, -1.0, 5.0)
    with pytest.raises(ValueError):
        VmRequest(1, 1, 0.0, 5.0, capacity=1.5)


# trace serialization -------------------------------------------------------

def test_read_trace_example_row():
    text = "request_id,vm_type_id,start_time,end_time,capacity\n1,1,0,6,0.25\n"
    [r] = read_trace(text)
    assert r == VmRequest(1, 1, 0.0, 6.0, 0.25)


def test_write_trace_example_row():
    text = write_trace([VmRequest(1, 1, 0.0, 6.0, 0.25)])
    assert text.splitlines()[1] == "1,1,0,6,0.25"


def test_empty_file_reads_empty():
    assert read_trace("") == []


def test_empty_list_writes_header_only():
    assert write_trace([]) == "request_id,vm_type_id,start_time,end_time,capacity\n"


def test_row_error_carries_row_number():
    text = ("request_id,vm_type_id,start_time,end_time,capacity\n"
            "1,1,0,6,\n"
            "2,1,9,3,\n")
    with pytest.raises(TraceError, match="row 3"):
        read_trace(text)


def test_malformed_row_rejected():
    text = "request_id,vm_type_id,start_time,end_time,capacity\n1,1,zero,6,\n"
    with pytest.raises(TraceError, match="row 2"):
        read_trace(text)


def test_bad_header_rejected():
    with pytest.raises(TraceError, match="header"):
        read_trace("id,type,start,end,cap\n1,1,0,6,\n")


def test_round_trip_multi_dimensional():
    reqs = generate_workload(spec(count=1000, seed=5))
    assert read_trace(write_trace(reqs)) == reqs


def test_round_trip_scalar():
    reqs = generate_workload(spec(count=1000, seed=6, capacity_range=(0.05, 0.95)))
    assert read_trace(write_trace(reqs)) == reqs


def test_line_endings_are_lf():
    text = write_trace(generate_workload(spec(count=3)))
    assert "\r" not in text
    assert text.endswith("\n")
