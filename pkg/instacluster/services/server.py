"""Provisioning server and agents.

The server runs on the master, tracks agent heartbeats on the simulated
clock and executes action messages on the target hosts. Actions aimed at the
master itself are carried out by the server directly unless the master runs
its own agent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from ..cluster import MASTER, ClusterState
from ..errors import (
    AgentNotRunning,
    HostError,
    ServerUnreachable,
    StaleAgent,
    UnknownHost,
)
from ..hosts.state import AGENT, SERVER
from .catalog import ServiceCatalog, default_catalog
from .models import (
    ActionMessage,
    ActionResult,
    ActionType,
    AgentHealth,
    DeploymentPlan,
    HealthStatus,
    Heartbeat,
    ServerState,
)

if TYPE_CHECKING:
    from ..simulation import Simulation

logger = logging.getLogger(__name__)


class HeartbeatMonitor:
    """Staleness detector: stale iff now - last_seen > interval * beats."""

    def __init__(self, state: ServerState, interval: float = 10.0, stale_after_beats: int = 3):
        self.state = state
        self.interval = interval
        self.stale_after_beats = stale_after_beats

    @property
    def threshold(self) -> float:
        return self.interval * self.stale_after_beats

    def record(self, heartbeat: Heartbeat) -> float:
        """Store a heartbeat; last_seen never moves backwards."""
        previous = self.state.last_seen.get(heartbeat.agent_host)
        if previous is None or heartbeat.timestamp >= previous:
            self.state.last_seen[heartbeat.agent_host] = heartbeat.timestamp
            self.state.reported[heartbeat.agent_host] = sorted(heartbeat.running_components)
        return self.state.last_seen[heartbeat.agent_host]

    def status(self, hostname: str, now: float) -> AgentHealth:
        last = self.state.last_seen.get(hostname)
        stale = last is None or now - last > self.threshold
        return AgentHealth(
            hostname=hostname,
            last_seen=last,
            status=HealthStatus.STALE if stale else HealthStatus.HEALTHY,
        )


@dataclass(frozen=True)
class Agent:
    instance_id: str
    hostname: str


def agent_tick(agent: Agent, server: ServiceServer) -> Heartbeat:
    """Send one heartbeat from ``agent`` at the current simulated time."""
    hosts = server.sim.hosts
    if not hosts.daemon_running(agent.instance_id, AGENT):
        raise AgentNotRunning(agent.hostname)
    heartbeat = Heartbeat(
        agent_host=agent.hostname,
        timestamp=server.sim.clock.now,
        running_components=set(hosts.hosts[agent.instance_id].daemons),
    )
    server.receive(heartbeat)
    return heartbeat


class ServiceServer:
    """The provisioning server of one cluster."""

    def __init__(
        self,
        sim: Simulation,
        region: str,
        catalog: ServiceCatalog | None = None,
    ):
        self.sim = sim
        self.cluster: ClusterState = sim.registry.require(region)
        self.state = sim.servers.setdefault(region, ServerState(region=region))
        self.catalog = catalog or default_catalog()
        self.monitor = HeartbeatMonitor(
            self.state, sim.config.heartbeat_interval, sim.config.stale_after_beats
        )

    # ------------------------------------------------------------------
    # Heartbeats
    # ------------------------------------------------------------------

    @property
    def reachable(self) -> bool:
        return self.sim.hosts.daemon_running(self.cluster.master_id, SERVER)

    def receive(self, heartbeat: Heartbeat) -> None:
        if not self.reachable:
            raise ServerUnreachable(self.cluster.region)
        self.monitor.record(heartbeat)
        self.sim.trace.record("services.heartbeat", **heartbeat.model_dump(mode="json"))

    def agents(self) -> list[Agent]:
        """Hosts expected to run an agent."""
        found = []
        for instance_id, hostname in self.cluster.hostname_map.ordered():
            if hostname == MASTER and not self.cluster.agent_on_master:
                continue
            found.append(Agent(instance_id, hostname))
        return found

    def heartbeat_round(self) -> list[Heartbeat]:
        """Every agent whose daemon runs sends one heartbeat now."""
        sent = []
        for agent in self.agents():
            if self.sim.hosts.daemon_running(agent.instance_id, AGENT):
                sent.append(agent_tick(agent, self))
        return sent

    def run_heartbeats(self, seconds: float) -> None:
        """Advance the clock, with a heartbeat round every interval."""
        interval = self.monitor.interval
        remaining = seconds
        while remaining >= interval:
            self.sim.clock.advance(interval)
            remaining -= interval
            if self.reachable:
                self.heartbeat_round()
        if remaining > 0:
            self.sim.clock.advance(remaining)

    def health(self) -> list[AgentHealth]:
        """One row per cluster host, master first."""
        now = self.sim.clock.now
        rows = []
        for _, hostname in self.cluster.hostname_map.ordered():
            if hostname == MASTER and not self.cluster.agent_on_master:
                status = HealthStatus.HEALTHY if self.reachable else HealthStatus.STALE
                rows.append(AgentHealth(hostname=hostname, last_seen=None, status=status))
            else:
                rows.append(self.monitor.status(hostname, now))
        return rows

    def is_healthy(self, hostname: str) -> bool:
        if hostname == MASTER and not self.cluster.agent_on_master:
            return self.reachable
        return self.monitor.status(hostname, self.sim.clock.now).status == HealthStatus.HEALTHY

    # ------------------------------------------------------------------
    # Actions
    # ------------------------------------------------------------------

    def submit_action(self, msg: ActionMessage) -> dict[str, ActionResult]:
        """Run ``msg`` on every target; each host succeeds or fails on its own."""
        if not self.reachable:
            raise ServerUnreachable(self.cluster.region)
        descriptor = self.catalog.get(msg.service)
        for hostname in msg.target_hosts:
            if self.cluster.hostname_map.id_of(hostname) is None:
                raise UnknownHost(hostname)

        self.state.actions_sent += 1
        results: dict[str, ActionResult] = {}
        for hostname in msg.target_hosts:
            if not self.is_healthy(hostname):
                results[hostname] = ActionResult(hostname=hostname, ok=False,
                                                 error=StaleAgent.__name__)
                continue
            instance_id = self.cluster.hostname_map.id_of(hostname)
            try:
                self._apply(instance_id, msg, descriptor.component_names)
                results[hostname] = ActionResult(hostname=hostname, ok=True)
            except HostError as e:
                logger.warning("%s %s on %s failed: %s", msg.action.value, msg.service,
                               hostname, e)
                results[hostname] = ActionResult(hostname=hostname, ok=False, error=e.name)

        self.sim.trace.record(
            "services.action",
            message=msg.model_dump(mode="json"),
            results={h: r.model_dump(mode="json") for h, r in results.items()},
        )
        return results

    def _apply(self, instance_id: str, msg: ActionMessage, components: list[str]) -> None:
        hosts = self.sim.hosts
        session = hosts.console(instance_id)
        if msg.action == ActionType.CONFIGURE:
            hosts.configure_service(session, msg.service, msg.params)
            return
        for component in components:
            if msg.action == ActionType.INSTALL:
                hosts.install_component(session, component)
            elif msg.action == ActionType.START:
                hosts.start_component(session, component)
            else:
                hosts.stop_component(session, component)

    # ------------------------------------------------------------------
    # Plans
    # ------------------------------------------------------------------

    def deploy_plan(
        self, plan: DeploymentPlan, overrides: dict[str, str] | None = None
    ) -> dict[str, dict[str, ActionResult]]:
        """install -> configure -> start each planned service; keeps the plan."""
        params = split_overrides(overrides or {})
        outcome: dict[str, dict[str, ActionResult]] = {}
        for service in plan.services:
            targets = plan.placements[service]
            steps = [
                ActionMessage(action=ActionType.INSTALL, service=service, target_hosts=targets),
                ActionMessage(action=ActionType.CONFIGURE, service=service, target_hosts=targets,
                              params=params.get(service, {})),
                ActionMessage(action=ActionType.START, service=service, target_hosts=targets),
            ]
            merged: dict[str, ActionResult] = {}
            for msg in steps:
                for hostname, result in self.submit_action(msg).items():
                    if hostname not in merged or merged[hostname].ok:
                        merged[hostname] = result
            outcome[service] = merged
        self.state.plan = plan
        return outcome

    def restart_services(self) -> dict[str, dict[str, ActionResult]]:
        """Re-issue start for the stored plan (daemons do not survive a restart)."""
        outcome: dict[str, dict[str, ActionResult]] = {}
        plan = self.state.plan
        if plan is None:
            return outcome
        for service in plan.services:
            msg = ActionMessage(action=ActionType.START, service=service,
                                target_hosts=plan.placements[service])
            outcome[service] = self.submit_action(msg)
        return outcome


def split_overrides(overrides: dict[str, str]) -> dict[str, dict[str, str]]:
    """{"spark.executor_memory": "4g"} -> {"spark": {"executor_memory": "4g"}}."""
    params: dict[str, dict[str, str]] = {}
    for key, value in sorted(overrides.items()):
        service, _, name = key.partition(".")
        if not name:
            raise ValueError(f"config override {key!r} is not <service>.<key>")
        params.setdefault(service, {})[name] = value
    return params
