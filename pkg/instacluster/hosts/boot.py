"""Boot-time init scripts: what a host runs when it reaches running."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from ..bootstrap.userdata import ROLE_SLAVE, MasterConfig, parse_user_data, role_of

if TYPE_CHECKING:
    from ..provider.models import Instance
    from ..simulation import Simulation

logger = logging.getLogger(__name__)


def on_boot(sim: Simulation, instance: Instance) -> object:
    """Dispatch on the role in the instance's user data.

    A master whose cluster already holds a key pair was restarted and
    reconciles; any other master builds a new cluster.
    """
    fields = parse_user_data(instance.user_data)
    role = role_of(fields)
    if role == ROLE_SLAVE:
        from ..bootstrap.protocol import slave_init

        return slave_init(sim, instance.id, fields)

    config = MasterConfig.from_user_data(fields)
    existing = sim.registry.get(config.region)
    if existing is not None and existing.master_id == instance.id and existing.key is not None:
        from ..lifecycle import reconcile_on_restart

        logger.info("master %s restarted, reconciling %s", instance.id, config.region)
        return reconcile_on_restart(sim, instance.id, existing, config)

    from ..bootstrap.protocol import master_init

    return master_init(sim, instance.id, config)
