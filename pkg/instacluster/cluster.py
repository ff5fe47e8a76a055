"""Cluster state as seen by the master, and the per-region registry."""

from __future__ import annotations

import re
import threading
from contextlib import contextmanager
from enum import Enum
from typing import Iterator

from pydantic import BaseModel, Field

from .errors import BusyCluster, NoCluster
from .keys import KeyPair

MASTER = "master"
_SLAVE_RE = re.compile(r"^slave-([1-9][0-9]*)$")


def slave_hostname(index: int) -> str:
    return f"slave-{index}"


def slave_index(hostname: str) -> int | None:
    """Index k of a "slave-k" hostname, None for anything else."""
    match = _SLAVE_RE.match(hostname)
    return int(match.group(1)) if match else None


def hostname_sort_key(hostname: str) -> tuple[int, int, str]:
    """Master first, then slaves by index, then anything else by name."""
    if hostname == MASTER:
        return (0, 0, hostname)
    index = slave_index(hostname)
    if index is not None:
        return (1, index, hostname)
    return (2, 0, hostname)


class ClusterPhase(str, Enum):
    DISCOVERING = "discovering"
    CONFIGURING = "configuring"
    READY = "ready"
    STOPPED = "stopped"
    FAILED = "failed"


class HostnameMap(BaseModel):
    """instance_id -> hostname bindings of one cluster."""

    master_id: str
    bindings: dict[str, str] = Field(default_factory=dict)

    def hostname_of(self, instance_id: str) -> str:
        return self.bindings[instance_id]

    def id_of(self, hostname: str) -> str | None:
        for instance_id, name in self.bindings.items():
            if name == hostname:
                return instance_id
        return None

    def ordered(self) -> list[tuple[str, str]]:
        """(instance_id, hostname) pairs, master first, slaves by index."""
        return sorted(self.bindings.items(), key=lambda item: hostname_sort_key(item[1]))

    def slave_ids(self) -> list[str]:
        return [i for i, _ in self.ordered() if i != self.master_id]

    def hostnames(self) -> list[str]:
        return [name for _, name in self.ordered()]


class ClusterState(BaseModel):
    """The master's authoritative view of its cluster."""

    region: str
    hostname_map: HostnameMap
    key: KeyPair | None = None
    phase: ClusterPhase = ClusterPhase.DISCOVERING
    ip_table: dict[str, str] = Field(default_factory=dict)

    # provisioning parameters, kept for restarts and spec export
    seed: int = 0
    image_id: str = ""
    master_instance_type: str = ""
    slave_instance_type: str = ""
    expected_slave_count: int = 0
    agent_on_master: bool = False
    deactivate_key: bool = False
    config_overrides: dict[str, str] = Field(default_factory=dict)
    access_key_id: str = ""

    failures: dict[str, str] = Field(default_factory=dict)
    restarts: int = 0

    @property
    def master_id(self) -> str:
        return self.hostname_map.master_id

    @property
    def size(self) -> int:
        return len(self.hostname_map.bindings)

    @property
    def slave_count(self) -> int:
        return self.size - 1


class ClusterRegistry:
    """ClusterStates keyed by region, plus the one-operation-at-a-time guard."""

    def __init__(self, clusters: dict[str, ClusterState]):
        self.clusters = clusters
        self._locks: dict[str, threading.RLock] = {}
        self._guard = threading.Lock()

    def get(self, region: str) -> ClusterState | None:
        return self.clusters.get(region)

    def require(self, region: str | None) -> ClusterState:
        """The cluster of ``region``; with no region, the only cluster there is."""
        if region is None:
            if len(self.clusters) != 1:
                raise NoCluster(None)
            return next(iter(self.clusters.values()))
        state = self.clusters.get(region)
        if state is None:
            raise NoCluster(region)
        return state

    def put(self, state: ClusterState) -> None:
        self.clusters[state.region] = state

    def regions(self) -> list[str]:
        return sorted(self.clusters)

    @contextmanager
    def busy(self, region: str) -> Iterator[None]:
        """Hold the cluster for one lifecycle operation; re-entrant per thread."""
        with self._guard:
            lock = self._locks.setdefault(region, threading.RLock())
        if not lock.acquire(blocking=False):
            raise BusyCluster(region)
        try:
            yield
        finally:
            lock.release()
