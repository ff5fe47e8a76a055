"""Shared fixtures: a seeded simulation, registered credentials, small clusters."""

import pytest

from instacluster.provider.models import AccessCredentials
from instacluster.simulation import Simulation, provision_cluster
from instacluster.specfile import ClusterSpec

KEY_ID = "AKIDINSTATEST"
SECRET = "insta-secret"


def make_spec(**overrides) -> ClusterSpec:
    fields = {"region": "r1", "slave_count": 3, "seed": 7}
    fields.update(overrides)
    return ClusterSpec(**fields)


@pytest.fixture
def sim():
    return Simulation(7)


@pytest.fixture
def creds(sim):
    sim.provider.register_credentials(KEY_ID, SECRET)
    return AccessCredentials(key_id=KEY_ID, secret=SECRET)


@pytest.fixture
def cluster(sim, creds):
    """A ready 1 master + 3 slave cluster in r1."""
    return provision_cluster(sim, make_spec(), creds)


@pytest.fixture
def service_cluster(sim, creds):
    """A ready cluster running spark and hue."""
    return provision_cluster(sim, make_spec(services=["spark", "hue"]), creds)
