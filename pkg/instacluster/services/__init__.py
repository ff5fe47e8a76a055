"""Service provisioning: catalog, deployment planning, server and agents."""

from .catalog import DEFAULT_CATALOG, ServiceCatalog, default_catalog
from .models import (
    SERVER_COMPONENT,
    SERVER_PORT,
    ActionMessage,
    ActionResult,
    ActionType,
    AgentHealth,
    ComponentSpec,
    DeploymentPlan,
    HealthStatus,
    Heartbeat,
    Placement,
    ServerState,
    ServiceDescriptor,
)
from .planner import suggest_configuration
from .server import Agent, HeartbeatMonitor, ServiceServer, agent_tick, split_overrides

__all__ = [
    "DEFAULT_CATALOG",
    "ServiceCatalog",
    "default_catalog",
    "SERVER_COMPONENT",
    "SERVER_PORT",
    "ActionMessage",
    "ActionResult",
    "ActionType",
    "AgentHealth",
    "ComponentSpec",
    "DeploymentPlan",
    "HealthStatus",
    "Heartbeat",
    "Placement",
    "ServerState",
    "ServiceDescriptor",
    "suggest_configuration",
    "Agent",
    "HeartbeatMonitor",
    "ServiceServer",
    "agent_tick",
    "split_overrides",
]
