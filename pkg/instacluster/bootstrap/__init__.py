"""The cluster bootstrap protocol (slave init, master init, naming, keys)."""

from ..keys import KeyPair, generate_keypair
from .protocol import (
    NAME_TAG,
    assign_hostnames,
    discover_slaves,
    distribute_cluster_config,
    hosts_entries,
    master_init,
    record_phase,
    render_hosts_file,
    slave_init,
    start_provisioning_daemons,
    wait_for_slaves,
)
from .userdata import (
    ROLE_MASTER,
    ROLE_SLAVE,
    MasterConfig,
    parse_user_data,
    render_user_data,
    role_of,
    slave_user_data,
)

__all__ = [
    "KeyPair",
    "generate_keypair",
    "NAME_TAG",
    "assign_hostnames",
    "discover_slaves",
    "distribute_cluster_config",
    "hosts_entries",
    "master_init",
    "record_phase",
    "render_hosts_file",
    "slave_init",
    "start_provisioning_daemons",
    "wait_for_slaves",
    "ROLE_MASTER",
    "ROLE_SLAVE",
    "MasterConfig",
    "parse_user_data",
    "render_user_data",
    "role_of",
    "slave_user_data",
]
