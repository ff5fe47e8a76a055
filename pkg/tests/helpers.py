"""Brute-force checks of the cluster invariants against simulator truth."""

from instacluster.cluster import ClusterState
from instacluster.errors import AuthFailed
from instacluster.hosts.simulator import PrivateKey
from instacluster.hosts.state import LOOPBACK
from instacluster.simulation import Simulation


def expected_hosts_lines(sim: Simulation, state: ClusterState) -> list[str]:
    lines = [f"{LOOPBACK[0]} {LOOPBACK[1]}"]
    for instance_id, hostname in state.hostname_map.ordered():
        lines.append(f"{sim.provider.instance(instance_id).private_ip} {hostname}")
    return lines


def assert_hosts_consistent(sim: Simulation, state: ClusterState) -> None:
    expected = "\n".join(expected_hosts_lines(sim, state)) + "\n"
    for instance_id in state.hostname_map.bindings:
        assert sim.hosts.read_hosts_file(instance_id) == expected, instance_id


def assert_clean(sim: Simulation, state: ClusterState) -> None:
    for instance_id in state.hostname_map.bindings:
        host = sim.hosts.host(instance_id)
        assert sim.config.temp_user not in host.users
        assert host.password_users() == []


def assert_key_reachable(sim: Simulation, state: ClusterState) -> None:
    for instance_id in state.hostname_map.bindings:
        session = sim.hosts.authenticate(
            instance_id, sim.config.cluster_user, PrivateKey(state.key.private)
        )
        assert sim.hosts.is_valid(session)


def assert_key_rejected(sim: Simulation, state: ClusterState, private: str) -> None:
    for instance_id in state.hostname_map.bindings:
        try:
            sim.hosts.authenticate(instance_id, sim.config.cluster_user, PrivateKey(private))
        except AuthFailed:
            continue
        raise AssertionError(f"old key still accepted on {instance_id}")


def assert_tagged(sim: Simulation, state: ClusterState) -> None:
    for instance_id, hostname in state.hostname_map.bindings.items():
        assert sim.provider.instance(instance_id).tags["Name"] == hostname


def assert_cluster_invariants(sim: Simulation, state: ClusterState) -> None:
    assert_hosts_consistent(sim, state)
    assert_clean(sim, state)
    assert_key_reachable(sim, state)
    assert_tagged(sim, state)
