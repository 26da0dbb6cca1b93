"""Event-driven execution and billing model for a query on a hybrid VM/SL fleet.

Time is tracked internally in integer microseconds so that billing
granularity rounding is exact and runs are bit-reproducible.
"""
from __future__ import annotations

import csv
import enum
import heapq
import io
import math
from dataclasses import dataclass, field
from decimal import Decimal

from .domain import CostBreakdown, FleetConfig, ProviderProfile
from .errors import ConfigValueError, PolicyMismatchError

US_PER_S = 1_000_000
_HOUR_US = 3600 * US_PER_S
_VM, _SL = 0, 1  # heap rank: VM slots win ties


def _to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


class PolicyKind(str, enum.Enum):
    SL_ONLY = "SL_ONLY"
    VM_ONLY = "VM_ONLY"
    HYBRID_KEEP = "HYBRID_KEEP"
    HYBRID_RELAY = "HYBRID_RELAY"
    SEGUE_STATIC = "SEGUE_STATIC"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    segue_timeout_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind is PolicyKind.SEGUE_STATIC and not self.segue_timeout_s > 0:
            raise ConfigValueError("SEGUE_STATIC needs segue_timeout_s > 0")

    @classmethod
    def relay(cls, enabled: bool = True) -> "Policy":
        return cls(PolicyKind.HYBRID_RELAY if enabled else PolicyKind.HYBRID_KEEP)

    @classmethod
    def segue(cls, timeout_s: float) -> "Policy":
        return cls(PolicyKind.SEGUE_STATIC, timeout_s)


@dataclass(frozen=True)
class QuerySpec:
    n_tasks: int
    task_service_s: float = 2.0
    slots_per_instance: int = 1

    def __post_init__(self):
        if self.n_tasks < 0:
            raise ConfigValueError("n_tasks must be >= 0")
        if not self.task_service_s > 0:
            raise ConfigValueError("task_service_s must be > 0")
        if self.slots_per_instance < 1:
            raise ConfigValueError("slots_per_instance must be >= 1")


@dataclass(frozen=True)
class InstanceRecord:
    id: str
    kind: str  # "VM" or "SL"
    launch_s: float
    ready_s: float
    terminate_s: float
    relay_peer: str | None = None
    tasks: int = 0


@dataclass(frozen=True)
class SimOutcome:
    completion_s: float
    cost: CostBreakdown
    tasks_on_sl: int
    tasks_on_vm: int
    sl_busy_seconds: float
    vm_billed_seconds: float
    instances: tuple[InstanceRecord, ...] = field(default=(), repr=False)

    @property
    def relay_map(self) -> dict[str, str]:
        """REQUEST id of each relayed SL mapped to its VM INSTANCE id."""
        return {r.id: r.relay_peer for r in self.instances if r.kind == "SL" and r.relay_peer}


def _check_policy(fleet: FleetConfig, policy: Policy) -> None:
    kind = policy.kind
    if fleet.n_vm + fleet.n_sl == 0:
        raise PolicyMismatchError("fleet {0,0} cannot execute tasks")
    if kind is PolicyKind.SL_ONLY and fleet.n_vm != 0:
        raise PolicyMismatchError(f"SL_ONLY requires n_vm=0, got {fleet}")
    if kind is PolicyKind.VM_ONLY and fleet.n_sl != 0:
        raise PolicyMismatchError(f"VM_ONLY requires n_sl=0, got {fleet}")
    if kind is PolicyKind.SEGUE_STATIC and not (fleet.n_sl == fleet.n_vm >= 1):
        raise PolicyMismatchError(f"SEGUE_STATIC requires n_sl = n_vm >= 1, got {fleet}")


def simulate(query: QuerySpec, fleet: FleetConfig, policy: Policy, profile: ProviderProfile) -> SimOutcome:
    """Greedy earliest-finish execution of ``query`` on ``fleet``.

    Each task goes to the slot on which it would complete first; ties go to
    VM slots, then to lower instance ids. A slot therefore idles only while
    every waiting task finishes sooner elsewhere. An SL stops taking tasks
    at its stop time (peer VM ready under relay, the timeout under
    segueing) and is released once its in-flight task finishes.
    """
    if query.n_tasks == 0:
        return SimOutcome(0.0, CostBreakdown(), 0, 0, 0.0, 0.0)
    _check_policy(fleet, policy)

    vm_dur = _to_us(query.task_service_s)
    sl_dur = _to_us(query.task_service_s * profile.sl_overhead_factor)
    vm_ready = _to_us(profile.vm_cold_boot_s)
    sl_ready = _to_us(profile.sl_boot_s)
    never = math.inf

    n_pairs = min(fleet.n_vm, fleet.n_sl) if policy.kind is PolicyKind.HYBRID_RELAY else 0
    sl_stop = []
    for i in range(fleet.n_sl):
        if i < n_pairs:
            sl_stop.append(vm_ready)
        elif policy.kind is PolicyKind.SEGUE_STATIC:
            sl_stop.append(_to_us(policy.segue_timeout_s))
        else:
            sl_stop.append(never)

    # Heap entries: (finish time if the slot takes the next task, rank, instance, slot).
    heap = []
    for i in range(fleet.n_vm):
        for s in range(query.slots_per_instance):
            heap.append((vm_ready + vm_dur, _VM, i, s))
    for i in range(fleet.n_sl):
        if sl_ready < sl_stop[i]:
            for s in range(query.slots_per_instance):
                heap.append((sl_ready + sl_dur, _SL, i, s))
    heapq.heapify(heap)

    vm_tasks = [0] * fleet.n_vm
    sl_tasks = [0] * fleet.n_sl
    sl_last_end = [sl_ready] * fleet.n_sl
    sl_task_durations = []  # one entry per SL task, microseconds
    completion = 0
    remaining = query.n_tasks
    while remaining:
        if not heap:
            raise PolicyMismatchError("no slot can accept the remaining tasks")
        end, kind, idx, slot = heapq.heappop(heap)
        if kind == _SL:
            sl_tasks[idx] += 1
            sl_last_end[idx] = max(sl_last_end[idx], end)
            sl_task_durations.append(sl_dur)
            if end < sl_stop[idx]:
                heapq.heappush(heap, (end + sl_dur, kind, idx, slot))
        else:
            vm_tasks[idx] += 1
            heapq.heappush(heap, (end + vm_dur, kind, idx, slot))
        remaining -= 1
        completion = max(completion, end)

    records = []
    for i in range(fleet.n_vm):
        records.append(InstanceRecord(
            id=f"i-{i:08x}", kind="VM", launch_s=0.0, ready_s=vm_ready / US_PER_S,
            terminate_s=completion / US_PER_S, tasks=vm_tasks[i]))
    for i in range(fleet.n_sl):
        terminate = max(sl_last_end[i], min(sl_stop[i], completion))
        records.append(InstanceRecord(
            id=f"req-{i:04d}", kind="SL", launch_s=0.0, ready_s=sl_ready / US_PER_S,
            terminate_s=terminate / US_PER_S,
            relay_peer=f"i-{i:08x}" if i < n_pairs else None, tasks=sl_tasks[i]))

    tasks_on_sl = sum(sl_tasks)
    cost, vm_billed_s = _bill(fleet, completion, sl_task_durations, tasks_on_sl, profile)
    return SimOutcome(
        completion_s=completion / US_PER_S,
        cost=cost,
        tasks_on_sl=tasks_on_sl,
        tasks_on_vm=sum(vm_tasks),
        sl_busy_seconds=sum(sl_task_durations) / US_PER_S,
        vm_billed_seconds=float(vm_billed_s),
        instances=tuple(records),
    )


def sl_billed_ms(duration_us: int, granularity_ms: int) -> int:
    """Billed milliseconds for one SL task, rounded up to the granularity."""
    gran_us = granularity_ms * 1000
    return -(-duration_us // gran_us) * granularity_ms


def _bill(fleet, completion_us, sl_task_durations, tasks_on_sl, profile):
    # VMs are charged per started second from launch until the query completes.
    per_vm_s = -(-completion_us // US_PER_S)
    vm_billed_s = per_vm_s * fleet.n_vm
    billed = Decimal(vm_billed_s)
    gran = profile.sl_billing_granularity_ms
    billed_ms = sum(sl_billed_ms(d, gran) for d in sl_task_durations)
    sl_compute = profile.sl_rate_per_s * Decimal(billed_ms) / 1000
    external = Decimal(0)
    if tasks_on_sl >= 1:
        external = profile.external_store_hourly_price * Decimal(completion_us) / _HOUR_US
    cost = CostBreakdown(
        # multiply before dividing so exact amounts do not pick up a rounding micro-unit
        vm_compute=profile.vm_hourly_price * billed / 3600,
        vm_storage=profile.vm_storage_hourly_price * billed / 3600,
        burstable=profile.burstable_price_per_vcpu_hour * profile.vcpus_per_instance * billed / 3600,
        sl_compute=sl_compute,
        external_store=external,
    )
    return cost, vm_billed_s


def sweep(query: QuerySpec, profile: ProviderProfile, policy: Policy,
          max_vm: int | None = None, max_sl: int | None = None) -> list[tuple[FleetConfig, SimOutcome]]:
    """Simulate every fleet in ``[0..max_vm] x [0..max_sl]`` except ``{0,0}``."""
    max_vm = profile.max_vm if max_vm is None else max_vm
    max_sl = profile.max_sl if max_sl is None else max_sl
    if max_vm < 0 or max_sl < 0 or max_vm + max_sl < 1:
        raise ConfigValueError("sweep bounds must allow at least one instance")
    rows = []
    for n_vm in range(max_vm + 1):
        for n_sl in range(max_sl + 1):
            if n_vm == n_sl == 0:
                continue
            fleet = FleetConfig(n_vm, n_sl)
            rows.append((fleet, simulate(query, fleet, policy, profile)))
    return rows


SWEEP_HEADER = ("n_vm", "n_sl", "completion_s", "total_cost", "vm_cost", "sl_cost")


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for fleet, out in rows:
        writer.writerow([fleet.n_vm, fleet.n_sl, f"{out.completion_s:.6f}",
                         out.cost.total, out.cost.vm_total, out.cost.sl_compute])
    return buf.getvalue()
