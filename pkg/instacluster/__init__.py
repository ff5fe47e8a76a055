"""InstaCluster - cluster provisioning on a deterministic simulated cloud."""

from .config import SimulationConfig
from .errors import EXIT_CODES, InstaClusterError
from .lifecycle import (
    ReconcileReport,
    extend_cluster,
    reconcile_on_restart,
    start_cluster,
    stop_cluster,
)
from .simulation import BootResult, Simulation, World, provision_cluster
from .specfile import (
    ClusterSpec,
    export_spec,
    load_spec,
    save_spec,
    validate_spec,
    validate_spec_file,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SimulationConfig",
    "EXIT_CODES",
    "InstaClusterError",
    "ReconcileReport",
    "extend_cluster",
    "reconcile_on_restart",
    "start_cluster",
    "stop_cluster",
    "BootResult",
    "Simulation",
    "World",
    "provision_cluster",
    "ClusterSpec",
    "export_spec",
    "load_spec",
    "save_spec",
    "validate_spec",
    "validate_spec_file",
]
