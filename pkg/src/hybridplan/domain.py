"""Shared value types: fleets, provider profiles, query features, costs."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from decimal import ROUND_UP, Decimal
from typing import Any

from .errors import ConfigValueError, EmptyFleetError, FleetBoundsError

MICRO = Decimal("0.000001")

# Order of the numeric model inputs. ``instances`` is split into two columns.
FEATURE_ORDER = (
    "n_vm",
    "n_sl",
    "input_size",
    "start_time_epoch",
    "total_memory",
    "available_memory",
    "memory_per_executor",
    "num_waiting_apps",
    "total_available_cores",
)


def to_money(value) -> Decimal:
    """Round a currency amount up to micro-unit precision."""
    return Decimal(value).quantize(MICRO, rounding=ROUND_UP)


@dataclass(frozen=True, order=True)
class FleetConfig:
    n_vm: int
    n_sl: int

    def __post_init__(self):
        if int(self.n_vm) != self.n_vm or int(self.n_sl) != self.n_sl:
            raise ConfigValueError(f"fleet counts must be integers, got {self.n_vm}, {self.n_sl}")
        if self.n_vm < 0 or self.n_sl < 0:
            raise ConfigValueError(f"fleet counts must be non-negative, got {self.n_vm}, {self.n_sl}")
        object.__setattr__(self, "n_vm", int(self.n_vm))
        object.__setattr__(self, "n_sl", int(self.n_sl))

    @property
    def size(self) -> int:
        return self.n_vm + self.n_sl

    def as_tuple(self) -> tuple[int, int]:
        return (self.n_vm, self.n_sl)

    def __str__(self) -> str:
        return f"({self.n_vm},{self.n_sl})"


@dataclass(frozen=True)
class ProviderProfile:
    """Prices, billing granularity and boot behaviour of one cloud provider."""

    name: str
    vm_hourly_price: Decimal
    vm_storage_hourly_price: Decimal
    sl_price_per_gb_second: Decimal
    external_store_hourly_price: Decimal
    burstable_price_per_vcpu_hour: Decimal = Decimal("0")
    vcpus_per_instance: int = 2
    sl_memory_gb: Decimal = Decimal("2")
    sl_billing_granularity_ms: int = 1
    vm_cold_boot_s: float = 55.0
    sl_boot_s: float = 0.0
    sl_overhead_factor: float = 1.30
    max_vm: int = 8
    max_sl: int = 8

    def __post_init__(self):
        for name in (
            "vm_hourly_price",
            "vm_storage_hourly_price",
            "sl_price_per_gb_second",
            "external_store_hourly_price",
            "burstable_price_per_vcpu_hour",
            "sl_memory_gb",
        ):
            value = Decimal(str(getattr(self, name)))
            if value < 0:
                raise ConfigValueError(f"{name} must be >= 0, got {value}")
            object.__setattr__(self, name, value)
        if self.sl_overhead_factor < 1:
            raise ConfigValueError("sl_overhead_factor must be >= 1")
        if self.vm_cold_boot_s < self.sl_boot_s or self.sl_boot_s < 0:
            raise ConfigValueError("require 0 <= sl_boot_s <= vm_cold_boot_s")
        if int(self.sl_billing_granularity_ms) < 1:
            raise ConfigValueError("sl_billing_granularity_ms must be a positive integer")
        if self.vcpus_per_instance < 0 or self.max_vm < 0 or self.max_sl < 0:
            raise ConfigValueError("counts must be non-negative")

    # Per-second rates used by the cost estimator.
    @property
    def vm_hourly_total(self) -> Decimal:
        return (
            self.vm_hourly_price
            + self.vm_storage_hourly_price
            + self.burstable_price_per_vcpu_hour * self.vcpus_per_instance
        )

    @property
    def vm_rate_per_s(self) -> Decimal:
        return self.vm_hourly_total / 3600

    @property
    def sl_rate_per_s(self) -> Decimal:
        return self.sl_price_per_gb_second * self.sl_memory_gb

    @property
    def external_rate_per_s(self) -> Decimal:
        return self.external_store_hourly_price / 3600

    def with_bounds(self, max_vm: int, max_sl: int) -> "ProviderProfile":
        return replace(self, max_vm=max_vm, max_sl=max_sl)


def validate_fleet(config: FleetConfig, profile: ProviderProfile) -> FleetConfig:
    if config.n_vm + config.n_sl == 0:
        raise EmptyFleetError("fleet {0,0} has no instances")
    if config.n_vm > profile.max_vm or config.n_sl > profile.max_sl:
        raise FleetBoundsError(
            f"fleet {config} exceeds bounds ({profile.max_vm},{profile.max_sl}) of {profile.name}"
        )
    return config


@dataclass(frozen=True)
class QueryFeatures:
    """Model inputs for one query run.

    ``n_vm``/``n_sl`` are floats because augmented samples jitter them;
    :attr:`fleet` gives the integral configuration.
    """

    n_vm: float
    n_sl: float
    input_size: float
    start_time_epoch: float
    total_memory: float
    available_memory: float
    memory_per_executor: float
    num_waiting_apps: float
    total_available_cores: float
    query_id: str = "alien"

    def __post_init__(self):
        for name in FEATURE_ORDER:
            if getattr(self, name) < 0:
                raise ConfigValueError(f"feature {name} must be >= 0")
        if self.available_memory > self.total_memory:
            raise ConfigValueError("available_memory exceeds total_memory")

    @property
    def fleet(self) -> FleetConfig:
        return FleetConfig(int(round(self.n_vm)), int(round(self.n_sl)))

    def with_fleet(self, fleet: FleetConfig) -> "QueryFeatures":
        return replace(self, n_vm=float(fleet.n_vm), n_sl=float(fleet.n_sl))

    def vector(self) -> list[float]:
        return [float(getattr(self, name)) for name in FEATURE_ORDER]


@dataclass(frozen=True)
class WorkloadSample:
    features: QueryFeatures
    query_duration_s: float

    def __post_init__(self):
        if not self.query_duration_s > 0:
            raise ConfigValueError("query_duration_s must be > 0")

    @property
    def query_id(self) -> str:
        return self.features.query_id

    def to_record(self) -> dict[str, Any]:
        f = self.features
        return {
            "query_id": f.query_id,
            "instances": {"n_vm": f.n_vm, "n_sl": f.n_sl},
            "input_size": f.input_size,
            "start_time_epoch": f.start_time_epoch,
            "total_memory": f.total_memory,
            "available_memory": f.available_memory,
            "memory_per_executor": f.memory_per_executor,
            "num_waiting_apps": f.num_waiting_apps,
            "total_available_cores": f.total_available_cores,
            "query_duration": self.query_duration_s,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "WorkloadSample":
        inst = rec["instances"]
        feats = QueryFeatures(
            n_vm=float(inst["n_vm"]),
            n_sl=float(inst["n_sl"]),
            input_size=float(rec["input_size"]),
            start_time_epoch=float(rec["start_time_epoch"]),
            total_memory=float(rec["total_memory"]),
            available_memory=float(rec["available_memory"]),
            memory_per_executor=float(rec["memory_per_executor"]),
            num_waiting_apps=float(rec["num_waiting_apps"]),
            total_available_cores=float(rec["total_available_cores"]),
            query_id=str(rec.get("query_id", "alien")),
        )
        return cls(feats, float(rec["query_duration"]))


@dataclass(frozen=True)
class EngineConfig:
    compute_provider: str = "aws-sim"
    compute_instance_family: str = "t3"
    compute_relay: bool = True
    compute_knob: float = 0.0
    train_max_batch: int = 100
    train_pref_same_instance: bool = False
    train_min_ram_gb: float = 4.0
    train_error_difference_trigger_s: float = 50.0

    def __post_init__(self):
        if self.compute_knob < 0:
            raise ConfigValueError("compute.knob must be >= 0")
        if not self.train_error_difference_trigger_s > 0:
            raise ConfigValueError("errorDifference.trigger must be > 0")
        if self.train_max_batch < 1:
            raise ConfigValueError("max.batch must be >= 1")


@dataclass(frozen=True)
class CostBreakdown:
    vm_compute: Decimal = Decimal("0")
    vm_storage: Decimal = Decimal("0")
    burstable: Decimal = Decimal("0")
    sl_compute: Decimal = Decimal("0")
    external_store: Decimal = Decimal("0")
    total: Decimal = field(init=False)

    def __post_init__(self):
        parts = [to_money(getattr(self, f.name)) for f in fields(self) if f.name != "total"]
        for f, value in zip((f for f in fields(self) if f.name != "total"), parts):
            object.__setattr__(self, f.name, value)
        object.__setattr__(self, "total", sum(parts, Decimal("0")))

    @property
    def vm_total(self) -> Decimal:
        return self.vm_compute + self.vm_storage + self.burstable

    def as_dict(self) -> dict[str, str]:
        return {f.name: str(getattr(self, f.name)) for f in fields(self)}
