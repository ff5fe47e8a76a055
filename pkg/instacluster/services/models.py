"""Service catalog entries and the server/agent wire messages."""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, Field, model_validator

from ..models import SortedSet

SCHEMA_VERSION = 1
SERVER_PORT = 8080
SERVER_COMPONENT = "ambari-server"


class Placement(str, Enum):
    MASTER_ONLY = "master_only"
    ALL_SLAVES = "all_slaves"
    ANY = "any"


class ComponentSpec(BaseModel):
    name: str
    port: int | None = Field(default=None, ge=1, le=65535)


class ServiceDescriptor(BaseModel):
    """A catalog entry."""

    name: str
    display_name: str = ""
    placement: Placement = Placement.ANY
    components: list[ComponentSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _default_component(self) -> ServiceDescriptor:
        # name-only entries deploy a single component named after the service
        if not self.components:
            self.components = [ComponentSpec(name=self.name)]
        return self

    @property
    def component_names(self) -> list[str]:
        return [c.name for c in self.components]


class Heartbeat(BaseModel):
    """Agent -> server liveness message."""

    schema_version: int = SCHEMA_VERSION
    agent_host: str
    timestamp: float
    running_components: SortedSet = Field(default_factory=set)


class ActionType(str, Enum):
    INSTALL = "install"
    CONFIGURE = "configure"
    START = "start"
    STOP = "stop"


class ActionMessage(BaseModel):
    """Server -> agents command."""

    schema_version: int = SCHEMA_VERSION
    action: ActionType
    service: str
    target_hosts: list[str]
    params: dict[str, str] = Field(default_factory=dict)


class ActionResult(BaseModel):
    hostname: str
    ok: bool
    error: str | None = None


class HealthStatus(str, Enum):
    HEALTHY = "healthy"
    STALE = "stale"


class AgentHealth(BaseModel):
    hostname: str
    last_seen: float | None = None
    status: HealthStatus


class DeploymentPlan(BaseModel):
    """Where each selected service runs and which ports its components use."""

    services: list[str] = Field(default_factory=list)
    placements: dict[str, list[str]] = Field(default_factory=dict)     # service -> hostnames
    ports: dict[str, int] = Field(default_factory=dict)                # component -> port
    host_components: dict[str, list[str]] = Field(default_factory=dict)
    server_host: str = "master"
    server_port: int = SERVER_PORT

    def components_on(self, hostname: str) -> set[str]:
        return set(self.host_components.get(hostname, []))


class ServerState(BaseModel):
    """What the provisioning server remembers."""

    region: str
    last_seen: dict[str, float] = Field(default_factory=dict)
    reported: dict[str, list[str]] = Field(default_factory=dict)
    plan: DeploymentPlan | None = None
    actions_sent: int = 0
