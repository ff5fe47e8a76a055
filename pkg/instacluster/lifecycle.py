"""Post-provision operations: stop, start with reconciliation, extend.

Private IPs change across a stop/start, so every full restart ends in the
master re-discovering its slaves, rotating the cluster key pair and
redistributing the hosts file. Hostnames stay bound to instances through
their Name tags.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from .bootstrap.protocol import (
    distribute_cluster_config,
    record_phase,
    start_provisioning_daemons,
    wait_for_slaves,
)
from .bootstrap.userdata import MasterConfig, parse_user_data, slave_user_data
from .cluster import ClusterPhase, ClusterState
from .errors import ClusterNotReady, InstaClusterError
from .keys import generate_keypair
from .provider.models import AccessCredentials, InstanceState

if TYPE_CHECKING:
    from .simulation import Simulation

logger = logging.getLogger(__name__)


@dataclass
class ReconcileReport:
    """Outcome of one reconciliation after a restart."""

    rebound: list[tuple[str, str, str]] = field(default_factory=list)  # (id, old_ip, new_ip)
    new_key_generation: int = 0
    hosts_files_rewritten: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "rebound": [list(r) for r in self.rebound],
            "new_key_generation": self.new_key_generation,
            "hosts_files_rewritten": self.hosts_files_rewritten,
        }


def stop_cluster(sim: Simulation, state: ClusterState, creds: AccessCredentials) -> ClusterState:
    """Stop every instance of the cluster, master first. Stopping twice is a no-op."""
    with sim.registry.busy(state.region):
        if state.phase not in (ClusterPhase.READY, ClusterPhase.STOPPED):
            raise ClusterNotReady(state.region, state.phase.value)
        for instance_id, hostname in state.hostname_map.ordered():
            if sim.provider.instance(instance_id).state == InstanceState.RUNNING:
                sim.provider.stop_instance(creds, instance_id)
                logger.debug("stopped %s (%s)", hostname, instance_id)
        if state.phase != ClusterPhase.STOPPED:
            record_phase(sim, state, ClusterPhase.STOPPED)
        sim.trace.record("lifecycle.stop", region=state.region)
        return state


def start_cluster(
    sim: Simulation, state: ClusterState, creds: AccessCredentials
) -> ReconcileReport:
    """Start the slaves, then the master; the master's boot reconciles.

    A cluster whose instances all run already is only reconciled.
    """
    with sim.registry.busy(state.region):
        if state.phase not in (ClusterPhase.READY, ClusterPhase.STOPPED, ClusterPhase.FAILED):
            raise ClusterNotReady(state.region, state.phase.value)
        provider = sim.provider
        sim.trace.record("lifecycle.start", region=state.region)

        master = provider.instance(state.master_id)
        stopped = [
            i for i in state.hostname_map.slave_ids()
            if provider.instance(i).state == InstanceState.STOPPED
        ]
        for slave_id in stopped:
            provider.start_instance(creds, slave_id)
        # every slave must be up before the master looks for them
        sim.clock.settle()
        if master.state == InstanceState.RUNNING:
            config = MasterConfig.from_user_data(parse_user_data(master.user_data))
            return reconcile_on_restart(sim, state.master_id, state, config)

        provider.start_instance(creds, state.master_id)
        sim.clock.settle()
        return sim.boot_result(state.master_id).unwrap()


def reconcile_on_restart(
    sim: Simulation, master_id: str, state: ClusterState, config: MasterConfig
) -> ReconcileReport:
    """Rebind hostnames, rotate the key pair and rewrite every hosts file."""
    creds = AccessCredentials(key_id=config.access_key_id, secret=config.secret_key)
    old_key = state.key
    old_ips = dict(state.ip_table)
    expected = max(config.expected_slave_count, state.slave_count)
    record_phase(sim, state, ClusterPhase.DISCOVERING)

    try:
        slaves = wait_for_slaves(sim, creds, state.region, master_id, state.image_id, expected)
        new_key = generate_keypair(state.seed, old_key.generation + 1 if old_key else 1)
        written = distribute_cluster_config(sim, state, creds, slaves, old_key, new_key)
        state.key = new_key
        state.expected_slave_count = state.slave_count
        start_provisioning_daemons(sim, state)

        from .services.server import ServiceServer

        ServiceServer(sim, state.region).restart_services()
    except InstaClusterError:
        record_phase(sim, state, ClusterPhase.FAILED)
        raise

    rebound = [
        (instance_id, old_ips[instance_id], state.ip_table[instance_id])
        for instance_id, _ in state.hostname_map.ordered()
        if instance_id in old_ips and old_ips[instance_id] != state.ip_table[instance_id]
    ]
    state.restarts += 1
    record_phase(sim, state, ClusterPhase.READY)
    report = ReconcileReport(
        rebound=rebound,
        new_key_generation=new_key.generation,
        hosts_files_rewritten=written,
    )
    sim.trace.record("lifecycle.reconcile", region=state.region, **report.to_dict())
    logger.info(
        "reconciled %s: %d address(es) changed, key generation %d",
        state.region, len(rebound), new_key.generation,
    )
    return report


def extend_cluster(
    sim: Simulation,
    state: ClusterState,
    creds: AccessCredentials,
    additional: int,
    instance_type: str | None = None,
) -> ClusterState:
    """Add ``additional`` slaves: stop, launch, start old slaves, start master."""
    if additional < 1:
        raise ValueError("additional must be a positive number of slaves")
    with sim.registry.busy(state.region):
        if state.phase not in (ClusterPhase.READY, ClusterPhase.STOPPED):
            raise ClusterNotReady(state.region, state.phase.value)
        if state.phase == ClusterPhase.READY:
            stop_cluster(sim, state, creds)

        provider = sim.provider
        master = provider.instance(state.master_id)
        config = MasterConfig.from_user_data(parse_user_data(master.user_data))
        config = config.model_copy(
            update={"expected_slave_count": state.slave_count + additional}
        )
        provider.modify_user_data(creds, state.master_id, config.to_user_data())
        new_ids = provider.launch_instances(
            creds,
            state.region,
            state.image_id,
            instance_type or state.slave_instance_type,
            additional,
            user_data=slave_user_data(state.access_key_id),
        )
        sim.trace.record("lifecycle.extend", region=state.region, new=new_ids)

        start_cluster(sim, state, creds)
        _redeploy(sim, state)
        logger.info("extended %s by %d slave(s)", state.region, additional)
        return state


def _redeploy(sim: Simulation, state: ClusterState) -> None:
    """Re-plan the deployed services so new slaves get their share."""
    from .services.planner import suggest_configuration
    from .services.server import ServiceServer

    server = ServiceServer(sim, state.region)
    if server.state.plan is None:
        return
    plan = suggest_configuration(server.state.plan.services, state)
    server.deploy_plan(plan, state.config_overrides)
