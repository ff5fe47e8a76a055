"""Provider data types: credentials, instances, filters."""

from __future__ import annotations

import re
from enum import Enum

from pydantic import BaseModel, Field

from ..errors import InvalidRegion

_REGION_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9-]*$")


def check_region(region: str) -> str:
    """Return the region name or raise InvalidRegion."""
    if not region or not _REGION_RE.match(region):
        raise InvalidRegion(region)
    return region


class InstanceState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    STOPPED = "stopped"
    TERMINATED = "terminated"


# Allowed (from, to) moves; terminate is reachable from any live state.
TRANSITIONS: set[tuple[InstanceState, InstanceState]] = {
    (InstanceState.PENDING, InstanceState.RUNNING),
    (InstanceState.RUNNING, InstanceState.STOPPED),
    (InstanceState.STOPPED, InstanceState.PENDING),
    (InstanceState.PENDING, InstanceState.TERMINATED),
    (InstanceState.RUNNING, InstanceState.TERMINATED),
    (InstanceState.STOPPED, InstanceState.TERMINATED),
}


class AccessCredentials(BaseModel):
    """An access key as held by a caller."""

    key_id: str
    secret: str
    active: bool = True


class KeyPairRecord(BaseModel):
    """A launch key pair imported into the provider."""

    name: str
    public_key: str


class Instance(BaseModel):
    """A simulated VM."""

    id: str
    region: str
    image_id: str
    instance_type: str
    state: InstanceState = InstanceState.PENDING
    private_ip: str | None = None
    launch_seq: int
    tags: dict[str, str] = Field(default_factory=dict)
    user_data: str = ""
    key_name: str | None = None
    previous_ip: str | None = None      # address held before the last stop

    @property
    def name(self) -> str | None:
        return self.tags.get("Name")

    def descriptor(self) -> Instance:
        """Detached copy handed to callers."""
        return self.model_copy(deep=True)


class TagPredicate(BaseModel):
    """Matches instances whose tag ``key`` exists (and equals ``value`` when set)."""

    key: str
    value: str | None = None

    def matches(self, tags: dict[str, str]) -> bool:
        if self.key not in tags:
            return False
        return self.value is None or tags[self.key] == self.value


class InstanceFilter(BaseModel):
    """Selects instances of one region. Empty criteria match everything."""

    region: str
    states: set[InstanceState] = Field(default_factory=set)
    image_id: str | None = None
    tags: list[TagPredicate] = Field(default_factory=list)
    exclude_ids: set[str] = Field(default_factory=set)

    def matches(self, instance: Instance) -> bool:
        if instance.region != self.region:
            return False
        if self.states and instance.state not in self.states:
            return False
        if self.image_id is not None and instance.image_id != self.image_id:
            return False
        if instance.id in self.exclude_ids:
            return False
        return all(p.matches(instance.tags) for p in self.tags)
