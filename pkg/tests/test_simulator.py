from decimal import Decimal

import pytest

from hybridplan.domain import FleetConfig
from hybridplan.errors import ConfigValueError, PolicyMismatchError
from hybridplan.simulator import (SWEEP_HEADER, Policy, PolicyKind, QuerySpec, simulate, sl_billed_ms, sweep,
                                  sweep_csv)

VM_ONLY = Policy(PolicyKind.VM_ONLY)
SL_ONLY = Policy(PolicyKind.SL_ONLY)


def test_vm_only_hand_trace(flat_profile):
    out = simulate(QuerySpec(10, 2.0), FleetConfig(1, 0), VM_ONLY, flat_profile)
    assert out.completion_s == 75.0
    assert out.tasks_on_vm == 10 and out.tasks_on_sl == 0
    # 75 billed seconds at 0.001/s, no SL, no external store
    assert out.cost.total == Decimal("0.075")


def test_sl_only_hand_trace(flat_profile):
    out = simulate(QuerySpec(10, 2.0), FleetConfig(0, 1), SL_ONLY, flat_profile)
    assert out.completion_s == pytest.approx(26.0)
    assert out.cost.sl_compute == Decimal("0.052")
    assert out.cost.external_store == Decimal("0.26")


def test_relay_hand_trace(flat_profile):
    # SL finishes 21 tasks by 54.6 s and starts one more before the VM is
    # ready; the VM takes the other 8 tasks from 55 s.
    out = simulate(QuerySpec(30, 2.0), FleetConfig(1, 1), Policy.relay(), flat_profile)
    assert out.completion_s == pytest.approx(71.0)
    assert (out.tasks_on_sl, out.tasks_on_vm) == (22, 8)
    assert out.relay_map == {"req-0000": "i-00000000"}
    sl = [r for r in out.instances if r.kind == "SL"][0]
    assert sl.terminate_s == pytest.approx(57.2)


def test_keep_and_segue_hand_traces(flat_profile):
    keep = simulate(QuerySpec(30, 2.0), FleetConfig(1, 1), Policy.relay(False), flat_profile)
    assert keep.completion_s == pytest.approx(65.0)
    assert (keep.tasks_on_sl, keep.tasks_on_vm) == (25, 5)
    assert keep.relay_map == {}
    segue = simulate(QuerySpec(30, 2.0), FleetConfig(1, 1), Policy.segue(30.0), flat_profile)
    assert segue.completion_s == pytest.approx(91.0)
    assert (segue.tasks_on_sl, segue.tasks_on_vm) == (12, 18)


def test_zero_tasks_costs_nothing(aws):
    out = simulate(QuerySpec(0), FleetConfig(3, 3), Policy.relay(), aws)
    assert out.completion_s == 0 and out.cost.total == 0


def test_policy_preconditions(aws):
    q = QuerySpec(5)
    with pytest.raises(PolicyMismatchError):
        simulate(q, FleetConfig(1, 1), SL_ONLY, aws)
    with pytest.raises(PolicyMismatchError):
        simulate(q, FleetConfig(1, 1), VM_ONLY, aws)
    with pytest.raises(PolicyMismatchError):
        simulate(q, FleetConfig(2, 1), Policy.segue(90), aws)
    with pytest.raises(PolicyMismatchError):
        simulate(q, FleetConfig(0, 0), Policy.relay(), aws)
    with pytest.raises(ConfigValueError):
        Policy(PolicyKind.SEGUE_STATIC, 0)


def test_relay_on_vm_only_fleet_matches_vm_only(aws):
    q = QuerySpec(40)
    assert simulate(q, FleetConfig(3, 0), Policy.relay(), aws) == simulate(q, FleetConfig(3, 0), VM_ONLY, aws)


def test_extreme_fleet_orderings(aws5):
    q100, q500 = QuerySpec(100), QuerySpec(500)
    sl = simulate(q100, FleetConfig(0, 5), SL_ONLY, aws5).completion_s
    vm = simulate(q100, FleetConfig(5, 0), VM_ONLY, aws5).completion_s
    assert sl < vm
    assert (simulate(q500, FleetConfig(5, 0), VM_ONLY, aws5).completion_s
            < simulate(q500, FleetConfig(0, 5), SL_ONLY, aws5).completion_s)


def test_relay_uses_less_sl_than_keep(aws5):
    q = QuerySpec(500)
    relay = simulate(q, FleetConfig(5, 5), Policy.relay(), aws5)
    keep = simulate(q, FleetConfig(5, 5), Policy.relay(False), aws5)
    assert relay.sl_busy_seconds < keep.sl_busy_seconds
    assert relay.cost.sl_compute < keep.cost.sl_compute


def test_sweep_grid(aws5):
    rows = sweep(QuerySpec(250), aws5, Policy.relay(), 5, 5)
    assert len(rows) == 35
    fleets = [f.as_tuple() for f, _ in rows]
    assert fleets == sorted(fleets)
    assert (0, 5) in fleets and (5, 0) in fleets
    best = min(rows, key=lambda r: r[1].completion_s)[0]
    assert best.n_vm >= 1 and best.n_sl >= 1


def test_sweep_csv(aws5):
    text = sweep_csv(sweep(QuerySpec(20), aws5, Policy.relay(), 1, 1))
    lines = text.strip().splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    assert [tuple(x.split(",")[:2]) for x in lines[1:]] == [("0", "1"), ("1", "0"), ("1", "1")]


def test_sweep_needs_an_instance(aws5):
    with pytest.raises(ConfigValueError):
        sweep(QuerySpec(1), aws5, Policy.relay(), 0, 0)


def test_deterministic(aws):
    q = QuerySpec(333, 1.7, 2)
    a = simulate(q, FleetConfig(3, 4), Policy.relay(), aws)
    b = simulate(q, FleetConfig(3, 4), Policy.relay(), aws)
    assert a == b


def test_slots_per_instance_speed_up(aws):
    one = simulate(QuerySpec(100, 2.0, 1), FleetConfig(2, 0), VM_ONLY, aws)
    two = simulate(QuerySpec(100, 2.0, 2), FleetConfig(2, 0), VM_ONLY, aws)
    assert two.completion_s == pytest.approx(55 + 25 * 2)
    assert two.completion_s < one.completion_s


def test_sl_granularity_rounding():
    assert sl_billed_ms(1, 1) == 1
    assert sl_billed_ms(2_600_000, 1) == 2600
    assert sl_billed_ms(2_600_001, 100) == 2700
