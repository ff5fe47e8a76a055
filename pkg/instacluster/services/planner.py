"""Deployment suggestion: deterministic placement plus catalog ports."""

from __future__ import annotations

from ..cluster import MASTER, ClusterState
from ..errors import PortConflict
from .catalog import ServiceCatalog, default_catalog
from .models import SERVER_COMPONENT, SERVER_PORT, DeploymentPlan, Placement


def suggest_configuration(
    services: list[str],
    cluster: ClusterState,
    catalog: ServiceCatalog | None = None,
) -> DeploymentPlan:
    """Plan which hosts run each service.

    master_only services go to the master, all_slaves to every slave, any to
    the lowest-index slave. A cluster without slaves puts everything on the
    master. Duplicate service names are planned once.
    """
    catalog = catalog or default_catalog()
    selected = list(dict.fromkeys(services))
    descriptors = [catalog.get(name) for name in selected]

    port_owner: dict[int, str] = {SERVER_PORT: SERVER_COMPONENT}
    ports: dict[str, int] = {}
    for descriptor in descriptors:
        for component in descriptor.components:
            if component.port is None:
                continue
            owner = port_owner.get(component.port)
            if owner is not None and owner != component.name:
                raise PortConflict(component.port, [owner, component.name])
            port_owner[component.port] = component.name
            ports[component.name] = component.port

    slaves = [name for name in cluster.hostname_map.hostnames() if name != MASTER]
    placements: dict[str, list[str]] = {}
    host_components: dict[str, set[str]] = {}
    for descriptor in descriptors:
        if not slaves or descriptor.placement == Placement.MASTER_ONLY:
            targets = [MASTER]
        elif descriptor.placement == Placement.ALL_SLAVES:
            targets = list(slaves)
        else:
            targets = [slaves[0]]
        placements[descriptor.name] = targets
        for hostname in targets:
            host_components.setdefault(hostname, set()).update(descriptor.component_names)

    return DeploymentPlan(
        services=selected,
        placements=placements,
        ports=ports,
        host_components={h: sorted(c) for h, c in sorted(host_components.items())},
    )
