"""IaaS provider interface and the in-memory simulator."""

from .base import Provider
from .models import (
    AccessCredentials,
    Instance,
    InstanceFilter,
    InstanceState,
    KeyPairRecord,
    TagPredicate,
    check_region,
)
from .simulated import InstanceHooks, ProviderState, SimulatedProvider

__all__ = [
    "Provider",
    "AccessCredentials",
    "Instance",
    "InstanceFilter",
    "InstanceState",
    "KeyPairRecord",
    "TagPredicate",
    "check_region",
    "InstanceHooks",
    "ProviderState",
    "SimulatedProvider",
]
