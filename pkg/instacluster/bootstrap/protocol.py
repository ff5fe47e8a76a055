"""The cluster provisioning protocol.

Slaves boot first and open a temporary password account; the master then
discovers them through the provider, names them, generates the cluster key
pair, pushes key and hosts file over the temporary account, removes it, tags
every instance and finally starts the provisioning server.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from ..cluster import (
    MASTER,
    ClusterPhase,
    ClusterState,
    HostnameMap,
    slave_hostname,
    slave_index,
)
from ..errors import (
    AuthFailed,
    ClusterAlreadyExists,
    DiscoveryTimeout,
    DuplicateTagHostname,
    HostError,
    InstaClusterError,
    MalformedUserData,
    MissingIp,
    SlaveUnreachable,
)
from ..hosts.simulator import Password, PrivateKey
from ..hosts.state import AGENT, SERVER, HostEntry, render_hosts_entries
from ..keys import KeyPair, generate_keypair
from ..provider.models import (
    AccessCredentials,
    Instance,
    InstanceFilter,
    InstanceState,
    check_region,
)
from .userdata import ROLE_SLAVE, MasterConfig

if TYPE_CHECKING:
    from ..provider.base import Provider
    from ..simulation import Simulation

logger = logging.getLogger(__name__)

NAME_TAG = "Name"


# ---------------------------------------------------------------------------
# Slave side
# ---------------------------------------------------------------------------


def slave_init(sim: Simulation, host_id: str, fields: dict[str, str]) -> None:
    """Open the temporary account and install (not start) the agent.

    Runs on every boot; a host that already ran it is left untouched.
    """
    key_id = fields.get("access_key_id")
    if not key_id:
        raise MalformedUserData("access_key_id missing")
    host = sim.hosts.hosts[host_id]
    if host.init_marker == ROLE_SLAVE:
        logger.debug("slave %s already initialized", host_id)
        return
    console = sim.hosts.console(host_id)
    sim.hosts.create_user(host_id, sim.config.temp_user, password=key_id)
    sim.hosts.install_component(console, AGENT, version=sim.config.agent_version)
    sim.hosts.set_init_marker(console, ROLE_SLAVE)
    sim.trace.record("bootstrap.slave_init", host=host_id)


# ---------------------------------------------------------------------------
# Discovery and naming
# ---------------------------------------------------------------------------


def discover_slaves(
    provider: Provider,
    creds: AccessCredentials,
    region: str,
    self_id: str,
    image_id: str,
) -> list[Instance]:
    """Running instances of the master's image in ``region``, minus the master."""
    return provider.describe_instances(
        creds,
        InstanceFilter(
            region=region,
            states={InstanceState.RUNNING},
            image_id=image_id,
            exclude_ids={self_id},
        ),
    )


def wait_for_slaves(
    sim: Simulation,
    creds: AccessCredentials,
    region: str,
    self_id: str,
    image_id: str,
    expected: int,
) -> list[Instance]:
    """Poll discovery until ``expected`` slaves run or the timeout elapses."""
    started = sim.clock.now
    timeout = sim.config.discovery_timeout
    while True:
        found = discover_slaves(sim.provider, creds, region, self_id, image_id)
        if len(found) >= expected:
            return found
        waited = sim.clock.now - started
        if waited >= timeout:
            sim.trace.record("bootstrap.discovery_timeout", expected=expected, found=len(found))
            raise DiscoveryTimeout(expected, len(found), waited)
        logger.debug("found %d/%d slaves after %gs", len(found), expected, waited)
        sim.clock.advance(min(sim.config.poll_interval, timeout - waited))


def assign_hostnames(
    self_id: str,
    slaves: list[Instance],
    prior_tags: dict[str, str] | None = None,
) -> HostnameMap:
    """Bind the master to "master" and every slave to a "slave-k" name.

    Slaves whose Name tag already holds a slave-k name keep it; the others
    get the lowest free indices in launch order.
    """
    prior_tags = prior_tags or {}
    bindings = {self_id: MASTER}
    claimed: dict[str, list[str]] = {}
    untagged: list[str] = []
    for slave in slaves:
        tag = prior_tags.get(slave.id)
        if tag == MASTER:
            raise DuplicateTagHostname(MASTER, [self_id, slave.id])
        if tag is not None and slave_index(tag) is not None:
            claimed.setdefault(tag, []).append(slave.id)
        else:
            untagged.append(slave.id)

    for hostname, owners in claimed.items():
        if len(owners) > 1:
            raise DuplicateTagHostname(hostname, owners)
        bindings[owners[0]] = hostname

    taken = {slave_index(name) for name in claimed}
    index = 1
    for instance_id in untagged:
        while index in taken:
            index += 1
        bindings[instance_id] = slave_hostname(index)
        taken.add(index)
    return HostnameMap(master_id=self_id, bindings=bindings)


def hosts_entries(hostname_map: HostnameMap, ip_table: dict[str, str]) -> list[HostEntry]:
    """Cluster entries in hosts-file order (master, then slaves by index)."""
    entries = []
    for instance_id, hostname in hostname_map.ordered():
        ip = ip_table.get(instance_id)
        if not ip:
            raise MissingIp(hostname)
        entries.append(HostEntry(ip=ip, hostname=hostname))
    return entries


def render_hosts_file(hostname_map: HostnameMap, ip_table: dict[str, str]) -> str:
    return render_hosts_entries(hosts_entries(hostname_map, ip_table))


# ---------------------------------------------------------------------------
# Master side
# ---------------------------------------------------------------------------


def _owns_live_instances(sim: Simulation, state: ClusterState) -> bool:
    return any(
        sim.provider.instance(i).state != InstanceState.TERMINATED
        for i in state.hostname_map.bindings
    )


def master_init(sim: Simulation, host_id: str, config: MasterConfig) -> ClusterState:
    """First boot of the master: build the cluster from the running slaves."""
    region = check_region(config.region)
    existing = sim.registry.get(region)
    if existing is not None and existing.master_id != host_id and (
        existing.phase != ClusterPhase.FAILED or _owns_live_instances(sim, existing)
    ):
        raise ClusterAlreadyExists(region)

    me = sim.provider.instance(host_id)
    creds = AccessCredentials(key_id=config.access_key_id, secret=config.secret_key)
    state = ClusterState(
        region=region,
        hostname_map=HostnameMap(master_id=host_id, bindings={host_id: MASTER}),
        phase=ClusterPhase.DISCOVERING,
        seed=config.seed,
        image_id=me.image_id,
        master_instance_type=me.instance_type,
        slave_instance_type=me.instance_type,
        expected_slave_count=config.expected_slave_count,
        agent_on_master=config.agent_on_master,
        deactivate_key=config.deactivate_key_after_discovery,
        access_key_id=config.access_key_id,
    )
    sim.registry.put(state)
    record_phase(sim, state, ClusterPhase.DISCOVERING)

    try:
        slaves = wait_for_slaves(
            sim, creds, region, host_id, me.image_id, config.expected_slave_count
        )
        if slaves:
            state.slave_instance_type = slaves[0].instance_type
        key = generate_keypair(config.seed, 1)
        distribute_cluster_config(sim, state, creds, slaves, old_key=None, new_key=key)
        state.key = key
        if config.deactivate_key_after_discovery:
            sim.provider.deactivate_credentials(config.access_key_id)
        start_provisioning_daemons(sim, state)
    except InstaClusterError:
        record_phase(sim, state, ClusterPhase.FAILED)
        raise

    record_phase(sim, state, ClusterPhase.READY)
    logger.info("cluster in %s ready with %d slave(s)", region, state.slave_count)
    return state


def distribute_cluster_config(
    sim: Simulation,
    state: ClusterState,
    creds: AccessCredentials,
    slaves: list[Instance],
    old_key: KeyPair | None,
    new_key: KeyPair,
) -> int:
    """Name the hosts, push key and hosts file everywhere, tag instances.

    Slaves known from ``state.hostname_map`` are reached with ``old_key``,
    new ones through the temporary account. Returns the number of hosts
    files written.
    """
    master_id = state.master_id
    prior_ids = set(state.hostname_map.bindings) if old_key else set()
    prior_tags = {s.id: s.tags[NAME_TAG] for s in slaves if NAME_TAG in s.tags}
    hostname_map = assign_hostnames(master_id, slaves, prior_tags)

    ip_table = {master_id: sim.provider.instance(master_id).private_ip or ""}
    ip_table.update({s.id: s.private_ip or "" for s in slaves})
    entries = hosts_entries(hostname_map, ip_table)

    state.hostname_map = hostname_map
    record_phase(sim, state, ClusterPhase.CONFIGURING)

    failures: dict[str, str] = {}
    written = 0
    for slave_id in hostname_map.slave_ids():
        hostname = hostname_map.hostname_of(slave_id)
        try:
            _configure_slave(
                sim, slave_id, hostname, entries, creds.key_id,
                old_key if slave_id in prior_ids else None, new_key,
            )
            written += 1
        except HostError as e:
            failures[hostname] = e.name
            logger.warning("could not configure %s (%s): %s", hostname, slave_id, e)
    if failures:
        state.failures = failures
        raise SlaveUnreachable(failures)
    state.failures = {}
    state.ip_table = ip_table

    console = sim.hosts.console(master_id)
    user = sim.config.cluster_user
    sim.hosts.install_authorized_key(console, user, new_key.public)
    if old_key is not None and old_key.public != new_key.public:
        sim.hosts.revoke_authorized_key(console, user, old_key.public)
    sim.hosts.set_hostname(console, MASTER)
    sim.hosts.write_hosts_file(console, entries)
    written += 1

    for instance_id, hostname in hostname_map.ordered():
        sim.provider.tag_instance(creds, instance_id, NAME_TAG, hostname)
    return written


def _configure_slave(
    sim: Simulation,
    slave_id: str,
    hostname: str,
    entries: list[HostEntry],
    temp_password: str,
    old_key: KeyPair | None,
    new_key: KeyPair,
) -> None:
    hosts = sim.hosts
    user = sim.config.cluster_user
    temp = (sim.config.temp_user, Password(temp_password))
    # a slave configured by an earlier, partly failed attempt already holds new_key
    latest = (user, PrivateKey(new_key.private))
    if old_key is None:
        attempts = [temp, latest]
    else:
        attempts = [(user, PrivateKey(old_key.private)), latest, temp]

    session = None
    failure: AuthFailed | None = None
    for login, credential in attempts:
        try:
            session = hosts.authenticate(slave_id, login, credential)
            break
        except AuthFailed as e:
            failure = e
            logger.debug("%s rejected %s login: %s", hostname, login, e)
    if session is None:
        assert failure is not None
        raise failure
    via_temp_user = session.user == sim.config.temp_user

    hosts.install_authorized_key(session, user, new_key.public)
    if old_key is not None and old_key.public != new_key.public:
        hosts.revoke_authorized_key(session, user, old_key.public)
    hosts.set_hostname(session, hostname)
    hosts.write_hosts_file(session, entries)
    if via_temp_user:
        hosts.delete_user(session, sim.config.temp_user)
    sim.trace.record("bootstrap.configured", host=slave_id, hostname=hostname,
                     via="temp_user" if via_temp_user else "key")


def start_provisioning_daemons(sim: Simulation, state: ClusterState) -> None:
    """Start the server on the master, then every agent, then take a heartbeat round."""
    from ..services.server import ServiceServer

    hosts = sim.hosts
    console = hosts.console(state.master_id)
    hosts.install_component(console, SERVER, version=sim.config.agent_version)
    hosts.start_component(console, SERVER)
    if state.agent_on_master:
        hosts.install_component(console, AGENT, version=sim.config.agent_version)
        hosts.start_component(console, AGENT)

    failures: dict[str, str] = {}
    for slave_id in state.hostname_map.slave_ids():
        hostname = state.hostname_map.hostname_of(slave_id)
        try:
            session = hosts.authenticate(
                slave_id, sim.config.cluster_user, PrivateKey(state.key.private)
            )
            hosts.start_component(session, AGENT)
        except HostError as e:
            failures[hostname] = e.name
    if failures:
        state.failures = failures
        raise SlaveUnreachable(failures)

    ServiceServer(sim, state.region).heartbeat_round()


def record_phase(sim: Simulation, state: ClusterState, phase: ClusterPhase) -> None:
    state.phase = phase
    sim.trace.record("bootstrap.phase", region=state.region, phase=phase.value)
