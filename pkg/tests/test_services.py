"""Tests for the service catalog, planner, heartbeats and actions."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instacluster.cluster import ClusterState, HostnameMap
from instacluster.errors import (
    AgentNotRunning,
    PortConflict,
    ServerUnreachable,
    UnknownHost,
    UnknownService,
)
from instacluster.hosts.state import AGENT, SERVER
from instacluster.lifecycle import stop_cluster
from instacluster.services.catalog import ServiceCatalog, default_catalog
from instacluster.services.models import (
    ActionMessage,
    ActionType,
    ComponentSpec,
    HealthStatus,
    Heartbeat,
    Placement,
    ServerState,
    ServiceDescriptor,
)
from instacluster.services.planner import suggest_configuration
from instacluster.services.server import (
    Agent,
    HeartbeatMonitor,
    ServiceServer,
    agent_tick,
    split_overrides,
)
from instacluster.simulation import provision_cluster

from .conftest import make_spec

INTERVAL = 10.0


def cluster_of(slaves: int) -> ClusterState:
    bindings = {"m": "master"}
    bindings.update({f"s{k}": f"slave-{k}" for k in range(1, slaves + 1)})
    return ClusterState(region="r1", hostname_map=HostnameMap(master_id="m", bindings=bindings))


def stop_agent(sim, state, hostname):
    instance_id = state.hostname_map.id_of(hostname)
    sim.hosts.stop_component(sim.hosts.console(instance_id), AGENT)


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------


class TestCatalog:
    def test_ported_entries(self):
        catalog = default_catalog()
        spark = catalog.get("spark")
        assert {c.name: c.port for c in spark.components} == {
            "spark-driver": 7077,
            "spark-web-ui": 8888,
            "spark-job-server": 8090,
        }
        hue = catalog.get("hue")
        assert hue.placement == Placement.MASTER_ONLY
        assert hue.components[0].port == 8808

    def test_name_only_entries(self):
        catalog = default_catalog()
        for name in ("hdfs", "yarn", "hive", "kafka", "nagios", "ganglia"):
            assert name in catalog
        assert catalog.get("hive").component_names == ["hive"]

    def test_unknown(self):
        with pytest.raises(UnknownService):
            default_catalog().get("foo")

    def test_from_yaml(self, tmp_path):
        path = tmp_path / "catalog.yaml"
        path.write_text(
            "services:\n"
            "  - name: web\n"
            "    placement: master_only\n"
            "    components:\n"
            "      - name: web-ui\n"
            "        port: 9000\n"
        )
        catalog = ServiceCatalog.from_yaml_file(path)
        assert list(catalog.services) == ["web"]
        assert catalog.get("web").components[0].port == 9000


# ---------------------------------------------------------------------------
# Planner
# ---------------------------------------------------------------------------


class TestSuggestConfiguration:
    def test_hue_on_master(self):
        plan = suggest_configuration(["hue"], cluster_of(3))
        assert plan.placements == {"hue": ["master"]}
        assert plan.ports == {"hue-web-ui": 8808}

    def test_spark_ports(self):
        plan = suggest_configuration(["spark"], cluster_of(3))
        assert plan.ports == {
            "spark-driver": 7077,
            "spark-web-ui": 8888,
            "spark-job-server": 8090,
        }
        assert plan.placements["spark"] == ["slave-1"]

    def test_all_slaves(self):
        plan = suggest_configuration(["hdfs"], cluster_of(3))
        assert plan.placements["hdfs"] == ["slave-1", "slave-2", "slave-3"]

    def test_no_slaves_puts_everything_on_master(self):
        plan = suggest_configuration(["hdfs", "spark", "hue"], cluster_of(0))
        assert all(v == ["master"] for v in plan.placements.values())
        assert plan.components_on("master") >= {"hdfs", "spark-driver", "hue-web-ui"}

    def test_server_port(self):
        plan = suggest_configuration([], cluster_of(1))
        assert plan.server_host == "master"
        assert plan.server_port == 8080

    def test_duplicates_planned_once(self):
        plan = suggest_configuration(["spark", "spark"], cluster_of(1))
        assert plan.services == ["spark"]

    def test_unknown_service(self):
        with pytest.raises(UnknownService):
            suggest_configuration(["foo"], cluster_of(1))

    def test_port_conflict(self):
        catalog = ServiceCatalog([
            ServiceDescriptor(name="a", components=[ComponentSpec(name="a-ui", port=9000)]),
            ServiceDescriptor(name="b", components=[ComponentSpec(name="b-ui", port=9000)]),
        ])
        with pytest.raises(PortConflict):
            suggest_configuration(["a", "b"], cluster_of(1), catalog)

    def test_server_port_reserved(self):
        catalog = ServiceCatalog([
            ServiceDescriptor(name="a", components=[ComponentSpec(name="a-ui", port=8080)]),
        ])
        with pytest.raises(PortConflict):
            suggest_configuration(["a"], cluster_of(1), catalog)

    def test_deterministic(self):
        services = ["hue", "hdfs", "spark", "zookeeper"]
        assert suggest_configuration(services, cluster_of(4)) == suggest_configuration(
            list(services), cluster_of(4)
        )


# ---------------------------------------------------------------------------
# Heartbeats
# ---------------------------------------------------------------------------


def oracle_stale(ticks: list[float], now: float) -> bool:
    seen = [t for t in ticks if t <= now]
    return not seen or now - max(seen) > 3 * INTERVAL


class TestHeartbeatMonitor:
    def make(self):
        return HeartbeatMonitor(ServerState(region="r1"), INTERVAL, 3)

    def test_tick_makes_healthy(self):
        monitor = self.make()
        monitor.record(Heartbeat(agent_host="slave-1", timestamp=10.0))
        health = monitor.status("slave-1", 10.0)
        assert health.last_seen == 10.0
        assert health.status == HealthStatus.HEALTHY

    def test_stale_after_three_intervals(self):
        monitor = self.make()
        monitor.record(Heartbeat(agent_host="slave-1", timestamp=10.0))
        assert monitor.status("slave-1", 40.0).status == HealthStatus.HEALTHY
        assert monitor.status("slave-1", 41.0).status == HealthStatus.STALE

    def test_recovery(self):
        monitor = self.make()
        monitor.record(Heartbeat(agent_host="slave-1", timestamp=0.0))
        assert monitor.status("slave-1", 50.0).status == HealthStatus.STALE
        monitor.record(Heartbeat(agent_host="slave-1", timestamp=50.0))
        assert monitor.status("slave-1", 50.0).status == HealthStatus.HEALTHY

    def test_never_seen_is_stale(self):
        assert self.make().status("slave-9", 0.0).status == HealthStatus.STALE

    def test_last_seen_never_decreases(self):
        monitor = self.make()
        monitor.record(Heartbeat(agent_host="slave-1", timestamp=20.0))
        monitor.record(Heartbeat(agent_host="slave-1", timestamp=5.0))
        assert monitor.status("slave-1", 20.0).last_seen == 20.0

    def test_seeded_schedules_match_oracle(self):
        for seed in range(1000):
            rng = random.Random(seed)
            stop_at = rng.uniform(0, 200)
            ticks = [t * INTERVAL for t in range(30) if t * INTERVAL <= stop_at]
            monitor = self.make()
            for t in ticks:
                monitor.record(Heartbeat(agent_host="slave-1", timestamp=t))
            for now in (rng.uniform(0, 300) for _ in range(5)):
                now = max(now, ticks[-1] if ticks else 0.0)
                stale = monitor.status("slave-1", now).status == HealthStatus.STALE
                assert stale == oracle_stale(ticks, now), (seed, now)

    @settings(max_examples=200)
    @given(
        ticks=st.lists(st.floats(min_value=0, max_value=500, allow_nan=False), max_size=20),
        delta=st.floats(min_value=0, max_value=100, allow_nan=False),
    )
    def test_property_matches_oracle(self, ticks, delta):
        ticks = sorted(ticks)
        monitor = self.make()
        for t in ticks:
            monitor.record(Heartbeat(agent_host="slave-1", timestamp=t))
        now = (ticks[-1] if ticks else 0.0) + delta
        stale = monitor.status("slave-1", now).status == HealthStatus.STALE
        assert stale == oracle_stale(ticks, now)


class TestAgents:
    def test_tick(self, sim, cluster):
        server = ServiceServer(sim, "r1")
        sim.clock.advance(10.0)
        now = sim.clock.now
        agent = Agent(cluster.hostname_map.id_of("slave-1"), "slave-1")
        heartbeat = agent_tick(agent, server)
        assert heartbeat.timestamp == now
        assert AGENT in heartbeat.running_components
        assert server.monitor.status("slave-1", now).last_seen == now

    def test_stopped_agent_goes_stale(self, sim, cluster):
        server = ServiceServer(sim, "r1")
        stop_agent(sim, cluster, "slave-2")
        server.run_heartbeats(40.0)
        health = {h.hostname: h.status for h in server.health()}
        assert health["slave-2"] == HealthStatus.STALE
        assert health["slave-1"] == HealthStatus.HEALTHY
        assert health["master"] == HealthStatus.HEALTHY

    def test_agent_not_running(self, sim, cluster):
        stop_agent(sim, cluster, "slave-1")
        agent = Agent(cluster.hostname_map.id_of("slave-1"), "slave-1")
        with pytest.raises(AgentNotRunning):
            agent_tick(agent, ServiceServer(sim, "r1"))

    def test_server_unreachable(self, sim, cluster):
        master = cluster.master_id
        sim.hosts.stop_component(sim.hosts.console(master), SERVER)
        agent = Agent(cluster.hostname_map.id_of("slave-1"), "slave-1")
        with pytest.raises(ServerUnreachable):
            agent_tick(agent, ServiceServer(sim, "r1"))

    def test_fresh_cluster_is_healthy(self, sim, cluster):
        health = ServiceServer(sim, "r1").health()
        assert [h.hostname for h in health] == ["master", "slave-1", "slave-2", "slave-3"]
        assert all(h.status == HealthStatus.HEALTHY for h in health)

    def test_stopped_cluster_is_stale(self, sim, creds, cluster):
        stop_cluster(sim, cluster, creds)
        server = ServiceServer(sim, "r1")
        server.run_heartbeats(40.0)
        assert all(h.status == HealthStatus.STALE for h in server.health())


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


class TestSubmitAction:
    def msg(self, action, targets, service="spark", **params):
        return ActionMessage(action=action, service=service, target_hosts=targets, params=params)

    def test_install_on_slaves(self, sim, cluster):
        server = ServiceServer(sim, "r1")
        targets = ["slave-1", "slave-2", "slave-3"]
        results = server.submit_action(self.msg(ActionType.INSTALL, targets))
        assert all(r.ok for r in results.values())
        for hostname in targets:
            host = sim.hosts.host(cluster.hostname_map.id_of(hostname))
            assert {"spark-driver", "spark-web-ui", "spark-job-server"} <= host.components

    def test_start_before_install(self, sim, cluster):
        server = ServiceServer(sim, "r1")
        results = server.submit_action(self.msg(ActionType.START, ["slave-1", "slave-2"]))
        assert [r.error for r in results.values()] == ["NotInstalled", "NotInstalled"]

    def test_stale_agent_isolated(self, sim, cluster):
        server = ServiceServer(sim, "r1")
        stop_agent(sim, cluster, "slave-2")
        server.run_heartbeats(40.0)
        results = server.submit_action(
            self.msg(ActionType.INSTALL, ["slave-1", "slave-2", "slave-3"])
        )
        assert results["slave-2"].error == "StaleAgent"
        assert results["slave-1"].ok and results["slave-3"].ok

    def test_configure_stores_params(self, sim, cluster):
        server = ServiceServer(sim, "r1")
        server.submit_action(self.msg(ActionType.CONFIGURE, ["slave-1"], executor_memory="4g"))
        host = sim.hosts.host(cluster.hostname_map.id_of("slave-1"))
        assert host.configs["spark"] == {"executor_memory": "4g"}

    def test_unknown_service(self, sim, cluster):
        with pytest.raises(UnknownService):
            ServiceServer(sim, "r1").submit_action(
                self.msg(ActionType.INSTALL, ["slave-1"], service="foo")
            )

    def test_unknown_host(self, sim, cluster):
        with pytest.raises(UnknownHost):
            ServiceServer(sim, "r1").submit_action(self.msg(ActionType.INSTALL, ["slave-9"]))

    def test_messages_traced(self, sim, cluster):
        ServiceServer(sim, "r1").submit_action(self.msg(ActionType.INSTALL, ["slave-1"]))
        event = sim.trace.filter("services.action")[-1]
        assert event.data["message"]["schema_version"] == 1
        assert event.data["message"]["action"] == "install"
        assert event.data["results"]["slave-1"]["ok"] is True


class TestDeployPlan:
    def test_daemons_match_plan(self, sim, service_cluster):
        plan = sim.servers["r1"].plan
        assert plan.services == ["spark", "hue"]
        for instance_id, hostname in service_cluster.hostname_map.ordered():
            running = sim.hosts.host(instance_id).daemons - {AGENT, SERVER}
            assert running == plan.components_on(hostname)

    def test_overrides_delivered(self, sim, creds):
        state = provision_cluster(
            sim,
            make_spec(services=["spark"], config_overrides={"spark.executor_memory": "4g"}),
            creds,
        )
        host = sim.hosts.host(state.hostname_map.id_of("slave-1"))
        assert host.configs["spark"] == {"executor_memory": "4g"}

    def test_split_overrides(self):
        assert split_overrides({"spark.a": "1", "hue.b": "2"}) == {
            "hue": {"b": "2"},
            "spark": {"a": "1"},
        }
        with pytest.raises(ValueError):
            split_overrides({"nodot": "1"})
