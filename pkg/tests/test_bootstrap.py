"""Tests for the provisioning protocol: user data, naming, master and slave init."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from instacluster.bootstrap.protocol import (
    assign_hostnames,
    discover_slaves,
    hosts_entries,
    master_init,
    render_hosts_file,
)
from instacluster.bootstrap.userdata import (
    MasterConfig,
    parse_user_data,
    render_user_data,
    role_of,
    slave_user_data,
)
from instacluster.cluster import MASTER, ClusterPhase, HostnameMap, slave_index
from instacluster.errors import (
    ClusterAlreadyExists,
    DiscoveryTimeout,
    DuplicateTagHostname,
    MalformedUserData,
    MissingIp,
    SlaveUnreachable,
)
from instacluster.hosts.state import AGENT, SERVER
from instacluster.keys import generate_keypair
from instacluster.lifecycle import start_cluster, stop_cluster
from instacluster.provider.models import Instance, InstanceState
from instacluster.simulation import provision_cluster

from .conftest import KEY_ID, SECRET, make_spec
from .helpers import assert_cluster_invariants


def instances(count, start=0):
    return [
        Instance(id=f"i-{n:03d}", region="r1", image_id="ami", instance_type="t", launch_seq=n)
        for n in range(start, start + count)
    ]


def master_config(**overrides):
    fields = {"access_key_id": KEY_ID, "secret_key": SECRET, "region": "r1", "seed": 7}
    fields.update(overrides)
    return MasterConfig(**fields)


def launch_by_hand(sim, creds, slaves, **config):
    """Launch slaves, then a master, without the provision driver."""
    slave_ids = []
    if slaves:
        slave_ids = sim.provider.launch_instances(
            creds, "r1", sim.config.image_id, "m3.large", slaves,
            user_data=slave_user_data(KEY_ID),
        )
    config.setdefault("expected_slave_count", slaves)
    (master_id,) = sim.provider.launch_instances(
        creds, "r1", sim.config.image_id, "m3.large", 1,
        user_data=master_config(**config).to_user_data(),
    )
    sim.clock.settle()
    return master_id, slave_ids


# ---------------------------------------------------------------------------
# User data
# ---------------------------------------------------------------------------


class TestUserData:
    def test_master_round_trip(self):
        config = master_config(expected_slave_count=6, deactivate_key_after_discovery=True)
        parsed = MasterConfig.from_user_data(parse_user_data(config.to_user_data()))
        assert parsed == config

    def test_unknown_keys_ignored(self):
        fields = parse_user_data("role=slave\naccess_key_id=AK\ncolour=blue\n")
        assert fields == {"role": "slave", "access_key_id": "AK"}

    def test_comments_and_blank_lines(self):
        assert parse_user_data("# boot\n\nrole=slave\n") == {"role": "slave"}

    def test_malformed_line(self):
        with pytest.raises(MalformedUserData):
            parse_user_data("role=slave\nnot a pair\n")

    @pytest.mark.parametrize("text", ["", "access_key_id=AK\n", "role=worker\n"])
    def test_role_required(self, text):
        with pytest.raises(MalformedUserData):
            role_of(parse_user_data(text))

    def test_master_fields_required(self):
        with pytest.raises(MalformedUserData):
            MasterConfig.from_user_data({"role": "master", "region": "r1"})

    def test_bad_count(self):
        fields = parse_user_data(master_config().to_user_data())
        fields["expected_slaves"] = "-2"
        with pytest.raises(MalformedUserData):
            MasterConfig.from_user_data(fields)

    def test_render_orders_keys(self):
        assert render_user_data({"region": "r1", "role": "master"}) == "role=master\nregion=r1\n"


# ---------------------------------------------------------------------------
# Hostname assignment
# ---------------------------------------------------------------------------


class TestAssignHostnames:
    def test_launch_order(self):
        slaves = instances(3, start=1)
        mapping = assign_hostnames("i-000", slaves)
        assert mapping.hostnames() == ["master", "slave-1", "slave-2", "slave-3"]
        assert mapping.hostname_of("i-002") == "slave-2"

    def test_no_slaves(self):
        assert assign_hostnames("i-000", []).bindings == {"i-000": MASTER}

    def test_tagged_slaves_keep_names(self):
        a, b, c, d = instances(4, start=1)
        tags = {a.id: "slave-2", b.id: "slave-1", c.id: "slave-3"}
        mapping = assign_hostnames("i-000", [a, b, c, d], tags)
        assert mapping.hostname_of(a.id) == "slave-2"
        assert mapping.hostname_of(b.id) == "slave-1"
        assert mapping.hostname_of(d.id) == "slave-4"

    def test_gaps_are_filled(self):
        a, b = instances(2, start=1)
        mapping = assign_hostnames("i-000", [a, b], {a.id: "slave-2"})
        assert mapping.hostname_of(b.id) == "slave-1"

    def test_foreign_tags_ignored(self):
        (a,) = instances(1, start=1)
        mapping = assign_hostnames("i-000", [a], {a.id: "webserver"})
        assert mapping.hostname_of(a.id) == "slave-1"

    def test_duplicate_tag(self):
        a, b = instances(2, start=1)
        with pytest.raises(DuplicateTagHostname):
            assign_hostnames("i-000", [a, b], {a.id: "slave-1", b.id: "slave-1"})

    def test_master_tag_on_slave(self):
        (a,) = instances(1, start=1)
        with pytest.raises(DuplicateTagHostname):
            assign_hostnames("i-000", [a], {a.id: MASTER})

    @given(
        count=st.integers(min_value=0, max_value=12),
        data=st.data(),
    )
    def test_tagged_bindings_are_fixed_points(self, count, data):
        slaves = instances(count, start=1)
        indices = data.draw(
            st.lists(st.integers(min_value=1, max_value=20), unique=True, max_size=count)
        )
        tagged = data.draw(st.permutations(slaves))[: len(indices)]
        tags = {s.id: f"slave-{i}" for s, i in zip(tagged, indices)}

        mapping = assign_hostnames("i-000", slaves, tags)

        names = list(mapping.bindings.values())
        assert len(names) == len(set(names)) == count + 1
        for instance_id, tag in tags.items():
            assert mapping.hostname_of(instance_id) == tag
        # untagged slaves take the lowest indices nobody holds
        fresh = sorted(
            slave_index(mapping.hostname_of(s.id)) for s in slaves if s.id not in tags
        )
        free = [k for k in range(1, count + 21) if k not in indices][: len(fresh)]
        assert fresh == free


class TestHostsEntries:
    def test_order_and_render(self):
        mapping = HostnameMap(
            master_id="m", bindings={"s2": "slave-2", "m": "master", "s1": "slave-1"}
        )
        ips = {"m": "10.0.0.1", "s1": "10.0.0.2", "s2": "10.0.0.3"}
        assert [e.hostname for e in hosts_entries(mapping, ips)] == [
            "master", "slave-1", "slave-2",
        ]
        assert render_hosts_file(mapping, ips).endswith("10.0.0.3 slave-2\n")

    def test_missing_ip(self):
        mapping = HostnameMap(master_id="m", bindings={"m": "master", "s1": "slave-1"})
        with pytest.raises(MissingIp):
            hosts_entries(mapping, {"m": "10.0.0.1"})


# ---------------------------------------------------------------------------
# Master and slave init
# ---------------------------------------------------------------------------


class TestSlaveInit:
    def test_opens_temporary_account(self, sim, creds):
        (slave_id,) = sim.provider.launch_instances(
            creds, "r1", sim.config.image_id, "t", 1, user_data=slave_user_data(KEY_ID)
        )
        host = sim.hosts.host(slave_id)
        assert host.users["tmpuser"].password == KEY_ID
        assert AGENT in host.components
        assert AGENT not in host.daemons
        assert host.init_marker == "slave"

    def test_idempotent_across_reboots(self, sim, creds):
        (slave_id,) = sim.provider.launch_instances(
            creds, "r1", sim.config.image_id, "t", 1, user_data=slave_user_data(KEY_ID)
        )
        sim.provider.stop_instance(creds, slave_id)
        sim.provider.start_instance(creds, slave_id)
        assert sim.boot_result(slave_id).ok
        assert sim.hosts.host(slave_id).boot_count == 2

    def test_malformed_user_data_recorded(self, sim, creds):
        (instance_id,) = sim.provider.launch_instances(
            creds, "r1", sim.config.image_id, "t", 1, user_data="role=slave\n"
        )
        result = sim.boot_result(instance_id)
        assert isinstance(result.error, MalformedUserData)
        assert sim.hosts.host(instance_id).boot_error == "MalformedUserData"


class TestMasterInit:
    def test_ready_cluster(self, sim, creds):
        master_id, slave_ids = launch_by_hand(sim, creds, 3)
        state = sim.boot_result(master_id).unwrap()
        assert state.phase == ClusterPhase.READY
        assert state.master_id == master_id
        assert state.hostname_map.slave_ids() == slave_ids
        assert state.key == generate_keypair(7, 1)
        assert_cluster_invariants(sim, state)

    def test_daemons_running(self, sim, creds):
        master_id, slave_ids = launch_by_hand(sim, creds, 2)
        assert sim.hosts.daemon_running(master_id, SERVER)
        assert not sim.hosts.daemon_running(master_id, AGENT)
        for slave_id in slave_ids:
            assert sim.hosts.daemon_running(slave_id, AGENT)

    def test_agent_on_master(self, sim, creds):
        master_id, _ = launch_by_hand(sim, creds, 1, agent_on_master=True)
        assert sim.hosts.daemon_running(master_id, AGENT)

    def test_master_only_cluster(self, sim, creds):
        master_id, _ = launch_by_hand(sim, creds, 0)
        state = sim.boot_result(master_id).unwrap()
        assert state.hostname_map.hostnames() == ["master"]
        assert_cluster_invariants(sim, state)

    def test_more_slaves_than_expected_are_all_adopted(self, sim, creds):
        master_id, slave_ids = launch_by_hand(sim, creds, 3, expected_slave_count=2)
        assert sim.boot_result(master_id).unwrap().slave_count == 3

    def test_discovery_timeout(self, sim, creds):
        master_id, _ = launch_by_hand(sim, creds, 1, expected_slave_count=2)
        result = sim.boot_result(master_id)
        assert isinstance(result.error, DiscoveryTimeout)
        assert result.error.waited == sim.config.discovery_timeout
        assert sim.clock.now == sim.config.discovery_timeout
        assert sim.registry.get("r1").phase == ClusterPhase.FAILED

    def test_deactivate_after_discovery(self, sim, creds):
        master_id, _ = launch_by_hand(sim, creds, 2, deactivate_key_after_discovery=True)
        state = sim.boot_result(master_id).unwrap()
        assert not sim.provider.credentials_active(KEY_ID)
        assert state.phase == ClusterPhase.READY
        assert_cluster_invariants(sim, state)

    def test_unreachable_slave(self, sim, creds):
        slave_ids = sim.provider.launch_instances(
            creds, "r1", sim.config.image_id, "t", 2, user_data=slave_user_data(KEY_ID)
        )
        sim.hosts.delete_user(sim.hosts.console(slave_ids[1]), "tmpuser")
        (master_id,) = sim.provider.launch_instances(
            creds, "r1", sim.config.image_id, "t", 1,
            user_data=master_config(expected_slave_count=2).to_user_data(),
        )
        result = sim.boot_result(master_id)
        assert isinstance(result.error, SlaveUnreachable)
        assert result.error.failures == {"slave-2": "AuthFailed"}
        assert sim.registry.get("r1").phase == ClusterPhase.FAILED
        # the reachable slave was still configured
        assert "tmpuser" not in sim.hosts.host(slave_ids[0]).users

    def test_rerun_after_partial_failure(self, sim, creds):
        slave_ids = sim.provider.launch_instances(
            creds, "r1", sim.config.image_id, "t", 2, user_data=slave_user_data(KEY_ID)
        )
        sim.hosts.delete_user(sim.hosts.console(slave_ids[1]), "tmpuser")
        (master_id,) = sim.provider.launch_instances(
            creds, "r1", sim.config.image_id, "t", 1,
            user_data=master_config(expected_slave_count=2).to_user_data(),
        )
        assert isinstance(sim.boot_result(master_id).error, SlaveUnreachable)

        sim.hosts.create_user(slave_ids[1], "tmpuser", KEY_ID)
        state = master_init(sim, master_id, master_config(expected_slave_count=2))
        assert state.phase == ClusterPhase.READY
        assert state.failures == {}
        assert_cluster_invariants(sim, state)

    def test_one_cluster_per_region(self, sim, creds, cluster):
        with pytest.raises(ClusterAlreadyExists):
            provision_cluster(sim, make_spec(slave_count=1), creds)
        # the existing cluster is untouched and the new instances are gone
        assert sim.registry.get("r1").master_id == cluster.master_id
        terminated = [
            i for i in sim.provider.all_instances("r1") if i.state.value == "terminated"
        ]
        assert len(terminated) == 2

    def test_failed_cluster_with_live_instances_keeps_region(self, sim, creds, cluster):
        stop_cluster(sim, cluster, creds)
        sim.provider.start_instance(creds, cluster.master_id)
        sim.clock.settle()
        assert cluster.phase == ClusterPhase.FAILED
        known = {i.id for i in sim.provider.all_instances("r1")}

        with pytest.raises(ClusterAlreadyExists):
            provision_cluster(sim, make_spec(), creds)
        assert sim.registry.get("r1").master_id == cluster.master_id
        fresh = [i for i in sim.provider.all_instances("r1") if i.id not in known]
        assert len(fresh) == 4
        assert all(i.state == InstanceState.TERMINATED for i in fresh)

        start_cluster(sim, cluster, creds)
        assert cluster.phase == ClusterPhase.READY
        assert_cluster_invariants(sim, cluster)

    def test_any_boot_failure_terminates_launched_instances(self, sim, creds):
        (stray,) = sim.provider.launch_instances(creds, "r1", sim.config.image_id, "t", 1)
        sim.provider.tag_instance(creds, stray, "Name", "master")

        with pytest.raises(DuplicateTagHostname):
            provision_cluster(sim, make_spec(), creds)
        states = {i.id: i.state for i in sim.provider.all_instances("r1")}
        assert states.pop(stray) == InstanceState.RUNNING
        assert len(states) == 4
        assert set(states.values()) == {InstanceState.TERMINATED}

        # a failed cluster without live instances no longer holds the region
        sim.provider.terminate_instances(creds, [stray])
        state = provision_cluster(sim, make_spec(), creds)
        assert state.phase == ClusterPhase.READY
        assert_cluster_invariants(sim, state)

    def test_second_region(self, sim, creds, cluster):
        other = provision_cluster(sim, make_spec(region="r2", slave_count=1), creds)
        assert other.phase == ClusterPhase.READY
        assert sim.registry.regions() == ["r1", "r2"]


class TestDiscoverSlaves:
    def test_running_same_image_same_region(self, sim, creds):
        slaves = sim.provider.launch_instances(creds, "r1", sim.config.image_id, "t", 2)
        sim.provider.launch_instances(creds, "r1", "ami-other", "t", 1)
        sim.provider.launch_instances(creds, "r2", sim.config.image_id, "t", 1)
        (me,) = sim.provider.launch_instances(creds, "r1", sim.config.image_id, "t", 1)
        sim.provider.stop_instance(creds, slaves[1])

        found = discover_slaves(sim.provider, creds, "r1", me, sim.config.image_id)
        assert [i.id for i in found] == [slaves[0]]
