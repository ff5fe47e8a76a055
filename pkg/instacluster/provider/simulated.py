"""Deterministic in-memory IaaS provider.

All state lives in a ProviderState model so it can be persisted and compared.
Every authenticated call is serialized behind one re-entrant lock. Boot and
shutdown effects are delegated to an InstanceHooks implementation (the host
simulator wiring), fired outside the lock.
"""

from __future__ import annotations

import hashlib
import ipaddress
import logging
import random
import threading
from typing import Protocol

from pydantic import BaseModel, Field

from ..clock import SimClock
from ..config import SimulationConfig
from ..errors import (
    InactiveCredentials,
    InvalidCredentials,
    InvalidTransition,
    UnknownInstance,
    UnknownKey,
)
from ..trace import TraceRecorder
from .base import Provider
from .models import (
    TRANSITIONS,
    AccessCredentials,
    Instance,
    InstanceFilter,
    InstanceState,
    KeyPairRecord,
    check_region,
)

logger = logging.getLogger(__name__)


class InstanceHooks(Protocol):
    """Callbacks into the simulated guest OS."""

    def on_boot(self, instance: Instance) -> None: ...

    def on_shutdown(self, instance: Instance) -> None: ...


class _NoHooks:
    def on_boot(self, instance: Instance) -> None:
        pass

    def on_shutdown(self, instance: Instance) -> None:
        pass


class ProviderState(BaseModel):
    """Everything the simulated cloud knows."""

    seed: int = 0
    credentials: dict[str, AccessCredentials] = Field(default_factory=dict)
    key_pairs: dict[str, KeyPairRecord] = Field(default_factory=dict)
    instances: dict[str, Instance] = Field(default_factory=dict)
    launch_counter: int = 0
    ip_counter: int = 0
    delay_draws: int = 0


def _derive(seed: int, *parts: object) -> str:
    text = ":".join(str(p) for p in (seed, *parts))
    return hashlib.sha256(text.encode()).hexdigest()


class SimulatedProvider(Provider):
    """In-memory provider with seeded ids, IPs and boot delays."""

    name = "simulator"

    def __init__(
        self,
        state: ProviderState,
        clock: SimClock,
        config: SimulationConfig | None = None,
        hooks: InstanceHooks | None = None,
        trace: TraceRecorder | None = None,
    ):
        self.state = state
        self.clock = clock
        self.config = config or SimulationConfig()
        self.hooks: InstanceHooks = hooks or _NoHooks()
        self.trace = trace or TraceRecorder(lambda: clock.now)
        self._lock = threading.RLock()
        self._network = ipaddress.ip_network(self.config.ip_network)
        # usable host addresses, excluding network and broadcast
        self._ip_space = self._network.num_addresses - 2
        self._ip_base = int(_derive(state.seed, "ip-base"), 16) % self._ip_space

    # ------------------------------------------------------------------
    # Administration (unauthenticated, simulator only)
    # ------------------------------------------------------------------

    def register_credentials(self, key_id: str, secret: str) -> AccessCredentials:
        """Create an access key, or return the existing one with that id."""
        with self._lock:
            record = self.state.credentials.get(key_id)
            if record is None:
                record = AccessCredentials(key_id=key_id, secret=secret, active=True)
                self.state.credentials[key_id] = record
                self.trace.record("provider.register_credentials", key_id=key_id)
            return record.model_copy()

    def import_key_pair(self, name: str, public_key: str) -> None:
        with self._lock:
            self.state.key_pairs[name] = KeyPairRecord(name=name, public_key=public_key)
            self.trace.record("provider.import_key_pair", name=name)

    def key_pair(self, name: str) -> KeyPairRecord | None:
        return self.state.key_pairs.get(name)

    def instance(self, instance_id: str) -> Instance:
        """Introspection without credentials (tests and host wiring)."""
        try:
            return self.state.instances[instance_id].descriptor()
        except KeyError:
            raise UnknownInstance(instance_id) from None

    def all_instances(self, region: str | None = None) -> list[Instance]:
        found = [i for i in self.state.instances.values() if region in (None, i.region)]
        return [i.descriptor() for i in sorted(found, key=lambda i: i.launch_seq)]

    def credentials_active(self, key_id: str) -> bool:
        record = self.state.credentials.get(key_id)
        return bool(record and record.active)

    # ------------------------------------------------------------------
    # Provider interface
    # ------------------------------------------------------------------

    def launch_instances(
        self,
        creds: AccessCredentials,
        region: str,
        image_id: str,
        instance_type: str,
        count: int,
        user_data: str = "",
        key_name: str | None = None,
    ) -> list[str]:
        if count < 1:
            raise ValueError("count must be >= 1")
        with self._lock:
            self._authorize(creds)
            check_region(region)
            ids = []
            for _ in range(count):
                seq = self.state.launch_counter
                self.state.launch_counter += 1
                instance = Instance(
                    id="i-" + _derive(self.state.seed, "instance", seq)[:17],
                    region=region,
                    image_id=image_id,
                    instance_type=instance_type,
                    launch_seq=seq,
                    user_data=user_data,
                    key_name=key_name,
                )
                instance.private_ip = self._allocate_ip(region)
                self.state.instances[instance.id] = instance
                ids.append(instance.id)
            self.trace.record(
                "provider.launch",
                region=region,
                image_id=image_id,
                instance_type=instance_type,
                ids=ids,
            )
            logger.info("launched %d %s instance(s) in %s", count, instance_type, region)
        for instance_id in ids:
            self._schedule_boot(instance_id)
        return ids

    def describe_instances(
        self, creds: AccessCredentials, filter: InstanceFilter
    ) -> list[Instance]:
        with self._lock:
            self._authorize(creds)
            found = [i for i in self.state.instances.values() if filter.matches(i)]
            found.sort(key=lambda i: i.launch_seq)
            self.trace.record(
                "provider.describe",
                region=filter.region,
                matched=[i.id for i in found],
            )
            return [i.descriptor() for i in found]

    def tag_instance(
        self, creds: AccessCredentials, instance_id: str, key: str, value: str
    ) -> None:
        with self._lock:
            self._authorize(creds)
            instance = self._get(instance_id)
            if instance.state == InstanceState.TERMINATED:
                raise UnknownInstance(instance_id)
            instance.tags[key] = value
            self.trace.record("provider.tag", id=instance_id, key=key, value=value)

    def stop_instance(self, creds: AccessCredentials, instance_id: str) -> None:
        with self._lock:
            self._authorize(creds)
            instance = self._get(instance_id)
            self._transition(instance, InstanceState.STOPPED)
            old_ip = instance.private_ip
            instance.previous_ip = old_ip
            if not self.config.stable_ips:
                instance.private_ip = None
            self.trace.record("provider.stop", id=instance_id, released_ip=old_ip)
            snapshot = instance.descriptor()
        self.hooks.on_shutdown(snapshot)

    def start_instance(self, creds: AccessCredentials, instance_id: str) -> None:
        with self._lock:
            self._authorize(creds)
            instance = self._get(instance_id)
            if instance.state != InstanceState.STOPPED:
                raise InvalidTransition(instance_id, instance.state.value, "running")
            self._transition(instance, InstanceState.PENDING)
            if instance.private_ip is None:
                instance.private_ip = self._allocate_ip(
                    instance.region, avoid=instance.previous_ip
                )
            self.trace.record("provider.start", id=instance_id, private_ip=instance.private_ip)
        self._schedule_boot(instance_id)

    def terminate_instances(self, creds: AccessCredentials, instance_ids: list[str]) -> None:
        shut_down = []
        with self._lock:
            self._authorize(creds)
            for instance_id in instance_ids:
                instance = self._get(instance_id)
                was_running = instance.state == InstanceState.RUNNING
                self._transition(instance, InstanceState.TERMINATED)
                instance.private_ip = None
                if was_running:
                    shut_down.append(instance.descriptor())
            self.trace.record("provider.terminate", ids=list(instance_ids))
        for snapshot in shut_down:
            self.hooks.on_shutdown(snapshot)

    def modify_user_data(
        self, creds: AccessCredentials, instance_id: str, user_data: str
    ) -> None:
        with self._lock:
            self._authorize(creds)
            instance = self._get(instance_id)
            if instance.state != InstanceState.STOPPED:
                raise InvalidTransition(instance_id, instance.state.value, "modify-user-data")
            instance.user_data = user_data
            self.trace.record("provider.modify_user_data", id=instance_id)

    def deactivate_credentials(self, key_id: str) -> None:
        with self._lock:
            record = self.state.credentials.get(key_id)
            if record is None:
                raise UnknownKey(key_id)
            record.active = False
            self.trace.record("provider.deactivate_credentials", key_id=key_id)
            logger.info("access key %s deactivated", key_id)

    # ------------------------------------------------------------------
    # Internals
    # ------------------------------------------------------------------

    def _authorize(self, creds: AccessCredentials) -> None:
        record = self.state.credentials.get(creds.key_id)
        if record is None or record.secret != creds.secret:
            raise InvalidCredentials(creds.key_id)
        if not record.active:
            raise InactiveCredentials(creds.key_id)

    def _get(self, instance_id: str) -> Instance:
        try:
            return self.state.instances[instance_id]
        except KeyError:
            raise UnknownInstance(instance_id) from None

    def _transition(self, instance: Instance, target: InstanceState) -> None:
        if (instance.state, target) not in TRANSITIONS:
            raise InvalidTransition(instance.id, instance.state.value, target.value)
        instance.state = target

    def _ips_in_use(self, region: str) -> set[str]:
        return {
            i.private_ip
            for i in self.state.instances.values()
            if i.region == region and i.private_ip and i.state != InstanceState.TERMINATED
        }

    def _allocate_ip(self, region: str, avoid: str | None = None) -> str:
        in_use = self._ips_in_use(region)
        for _ in range(self._ip_space):
            offset = (self._ip_base + self.state.ip_counter) % self._ip_space + 1
            self.state.ip_counter += 1
            candidate = str(self._network.network_address + offset)
            if candidate not in in_use and candidate != avoid:
                return candidate
        raise RuntimeError(f"address space {self._network} exhausted in {region}")

    def _schedule_boot(self, instance_id: str) -> None:
        delay = 0.0
        if self.config.boot_delay_max > 0:
            with self._lock:
                rng = random.Random(_derive(self.state.seed, "boot-delay", self.state.delay_draws))
                self.state.delay_draws += 1
            delay = round(rng.uniform(0.0, self.config.boot_delay_max), 3)
        self.clock.schedule(delay, f"boot {instance_id}", lambda: self._boot(instance_id))
        if delay == 0.0:
            self.clock.advance(0.0)

    def _boot(self, instance_id: str) -> None:
        with self._lock:
            instance = self.state.instances[instance_id]
            if instance.state != InstanceState.PENDING:
                # stopped or terminated while the boot was queued
                return
            self._transition(instance, InstanceState.RUNNING)
            self.trace.record("provider.boot", id=instance_id, private_ip=instance.private_ip)
            snapshot = instance.descriptor()
        self.hooks.on_boot(snapshot)
