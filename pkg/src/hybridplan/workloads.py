"""Synthetic analytics workloads labeled by the simulator.

Five query classes with TPC-DS flavoured SQL stand in for live runs. A
class turns an input size into a task count; the simulator supplies the
completion time that becomes the training label.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import FleetConfig, ProviderProfile, QueryFeatures, WorkloadSample
from .simulator import Policy, QuerySpec, SimOutcome, simulate

GIB = 1024 ** 3
BYTES_PER_TASK = 128 * 1024 ** 2  # one map task per input split
BASE_EPOCH = 1_700_000_000.0


@dataclass(frozen=True)
class QueryClass:
    query_id: str
    sql: str
    input_size_bytes: int
    task_service_s: float = 2.0

    def n_tasks(self, input_size_bytes: float | None = None) -> int:
        size = self.input_size_bytes if input_size_bytes is None else input_size_bytes
        return max(1, math.ceil(size / BYTES_PER_TASK))

    def spec(self, input_size_bytes: float | None = None) -> QuerySpec:
        return QuerySpec(self.n_tasks(input_size_bytes), self.task_service_s)


CATALOG = (
    QueryClass(
        "q11",
        "SELECT c.c_customer_id, c.c_first_name, SUM(s.ss_net_paid) AS total "
        "FROM customer c JOIN store_sales s ON c.c_customer_sk = s.ss_customer_sk "
        "JOIN date_dim d ON s.ss_sold_date_sk = d.d_date_sk "
        "WHERE d.d_year IN (SELECT d_year FROM date_dim WHERE d_moy = 1) "
        "GROUP BY c.c_customer_id, c.c_first_name",
        4 * GIB, 1.6,
    ),
    QueryClass(
        "q49",
        "SELECT channel, item, return_ratio FROM web_sales ws JOIN web_returns wr "
        "ON ws.ws_order_number = wr.wr_order_number "
        "WHERE ws.ws_net_profit > 1 AND wr.wr_return_amt > (SELECT AVG(wr_return_amt) FROM web_returns) "
        "ORDER BY return_ratio",
        3 * GIB, 2.0,
    ),
    QueryClass(
        "q68",
        "SELECT c_last_name, c_first_name, ca_city, bought_city, ss_ticket_number, extended_price "
        "FROM store_sales, date_dim, store, household_demographics, customer_address, customer "
        "WHERE ss_sold_date_sk = d_date_sk AND ss_store_sk = s_store_sk AND ss_hdemo_sk = hd_demo_sk "
        "ORDER BY c_last_name",
        6 * GIB, 1.5,
    ),
    QueryClass(
        "q74",
        "SELECT customer_id, customer_first_name FROM "
        "(SELECT c_customer_id AS customer_id, c_first_name AS customer_first_name, d_year "
        "FROM customer, store_sales, date_dim WHERE c_customer_sk = ss_customer_sk) t_s "
        "WHERE d_year IN (SELECT d_year FROM date_dim WHERE d_year > 2000) "
        "ORDER BY customer_id",
        2 * GIB, 2.4,
    ),
    QueryClass(
        "q82",
        "SELECT i_item_id, i_item_desc, i_current_price FROM item, inventory, date_dim, store_sales "
        "WHERE i_current_price BETWEEN 62 AND 92 AND inv_item_sk = i_item_sk "
        "AND d_date_sk = inv_date_sk AND ss_item_sk = i_item_sk "
        "GROUP BY i_item_id, i_item_desc, i_current_price ORDER BY i_item_id",
        5 * GIB, 1.8,
    ),
)


def catalog_by_id() -> dict[str, QueryClass]:
    return {q.query_id: q for q in CATALOG}


def policy_for(relay: bool) -> Policy:
    return Policy.relay(relay)


def cluster_state(rng: np.random.Generator, index: int = 0) -> dict:
    """Cluster-level features of a static analytics cluster at submission time."""
    total = 64.0
    return {
        "start_time_epoch": BASE_EPOCH + 900.0 * index,
        "total_memory": total,
        "available_memory": float(np.round(total * rng.uniform(0.3, 0.9), 3)),
        "memory_per_executor": 4.0,
        "num_waiting_apps": float(rng.integers(0, 4)),
        "total_available_cores": float(rng.integers(8, 33)),
    }


def make_features(qc: QueryClass, fleet: FleetConfig, state: dict,
                  input_size_bytes: float | None = None) -> QueryFeatures:
    size = qc.input_size_bytes if input_size_bytes is None else input_size_bytes
    return QueryFeatures(
        n_vm=float(fleet.n_vm), n_sl=float(fleet.n_sl), input_size=float(size),
        query_id=qc.query_id, **state,
    )


def run(qc: QueryClass, fleet: FleetConfig, profile: ProviderProfile, relay: bool = True,
        input_size_bytes: float | None = None) -> SimOutcome:
    return simulate(qc.spec(input_size_bytes), fleet, policy_for(relay), profile)


def grid(max_vm: int, max_sl: int) -> list[FleetConfig]:
    """All fleets of ``[0..max_vm] x [0..max_sl]`` except ``{0,0}``, in lexicographic order."""
    return [FleetConfig(v, s) for v in range(max_vm + 1) for s in range(max_sl + 1) if v + s > 0]


def generate(profile: ProviderProfile, classes=CATALOG, n_fleets: int = 20,
             max_vm: int | None = None, max_sl: int | None = None, seed: int = 0,
             relay: bool = True) -> list[WorkloadSample]:
    """Simulate ``n_fleets`` distinct random fleets for every query class."""
    max_vm = profile.max_vm if max_vm is None else max_vm
    max_sl = profile.max_sl if max_sl is None else max_sl
    fleets = grid(max_vm, max_sl)
    rng = np.random.default_rng(seed)
    out = []
    for qc in classes:
        picks = rng.choice(len(fleets), size=min(n_fleets, len(fleets)), replace=False)
        for k in picks:
            fleet = fleets[int(k)]
            state = cluster_state(rng, len(out))
            outcome = run(qc, fleet, profile, relay)
            out.append(WorkloadSample(make_features(qc, fleet, state), outcome.completion_s))
    return out


def registry_for(classes=CATALOG) -> dict[str, dict]:
    from .similarity import extract_signature

    return {qc.query_id: extract_signature(qc.sql, qc.n_tasks()).to_dict() for qc in classes}
