import numpy as np
import pytest

from hybridplan import workloads
from hybridplan.config import resolve_profile
from hybridplan.domain import FleetConfig, ProviderProfile, QueryFeatures, WorkloadSample
from hybridplan.forest import Hyper, augment, train


@pytest.fixture(scope="session")
def aws():
    return resolve_profile("aws-sim")


@pytest.fixture(scope="session")
def aws5(aws):
    return aws.with_bounds(5, 5)


@pytest.fixture
def flat_profile():
    """Round per-second prices for hand arithmetic."""
    return ProviderProfile(
        name="flat",
        vm_hourly_price="3.6",          # 0.001 / s
        vm_storage_hourly_price="0",
        sl_price_per_gb_second="0.001",  # x 2 GB = 0.002 / s
        external_store_hourly_price="36",  # 0.01 / s
    )


@pytest.fixture(scope="session")
def samples(aws):
    return workloads.generate(aws, seed=0)


@pytest.fixture(scope="session")
def trained(samples):
    """Small forest on the augmented catalog; shared by the slower tests."""
    aug = augment(samples, 10, 0.05, seed=0)
    model, report = train(aug, 0.8, Hyper(n_trees=30), known_queries=workloads.registry_for())
    return model, report


@pytest.fixture(scope="session")
def model(trained):
    return trained[0]


@pytest.fixture(scope="session")
def base_q11():
    qc = workloads.catalog_by_id()["q11"]
    state = workloads.cluster_state(np.random.default_rng(0))
    return workloads.make_features(qc, FleetConfig(1, 1), state)


def make_sample(duration=10.0, query_id="q", **kw):
    feats = dict(n_vm=1.0, n_sl=1.0, input_size=1e9, start_time_epoch=1.7e9, total_memory=64.0,
                 available_memory=32.0, memory_per_executor=4.0, num_waiting_apps=0.0,
                 total_available_cores=16.0)
    feats.update(kw)
    return WorkloadSample(QueryFeatures(**feats, query_id=query_id), duration)
