"""Host simulator: users, keys, hosts file, components and remote sessions.

Mutations are serialized per host. A RemoteSession is only ever produced by
``authenticate`` (or ``console`` for the host's own boot scripts) and stays
valid while the host remains in the same boot and its user is not deleted.
"""

from __future__ import annotations

import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator

from ..config import SimulationConfig
from ..errors import (
    AuthFailed,
    DuplicateHostsEntry,
    HostUnreachable,
    NotInstalled,
    SessionInvalid,
    UnknownUser,
    UserExists,
)
from ..keys import public_key_for
from ..trace import TraceRecorder
from .state import HostEntry, HostState, UserAccount, render_hosts_entries

logger = logging.getLogger(__name__)

ROOT = "root"


@dataclass(frozen=True)
class Password:
    secret: str


@dataclass(frozen=True)
class PrivateKey:
    key: str


Credential = Password | PrivateKey


@dataclass(frozen=True)
class RemoteSession:
    """An authenticated channel to a host, acting as ``user``."""

    host_id: str
    user: str
    boot_count: int
    user_serial: int
    local: bool = False


class HostSimulator:
    """Owns every HostState and implements the guest operations."""

    def __init__(
        self,
        hosts: dict[str, HostState],
        config: SimulationConfig | None = None,
        trace: TraceRecorder | None = None,
    ):
        self.hosts = hosts
        self.config = config or SimulationConfig()
        self.trace = trace or TraceRecorder()
        self._locks: dict[str, threading.RLock] = {}
        self._locks_guard = threading.Lock()

    # ------------------------------------------------------------------
    # Power (driven by provider hooks)
    # ------------------------------------------------------------------

    def power_on(
        self, instance_id: str, private_ip: str | None, launch_key: str | None
    ) -> HostState:
        """Boot a host, creating its disk on first boot."""
        with self._locked(instance_id):
            host = self.hosts.get(instance_id)
            if host is None:
                default_name = "ip-" + (private_ip or "0.0.0.0").replace(".", "-")
                host = HostState(instance_id=instance_id, hostname=default_name)
                # images ship the login user key-only
                self._add_user(host, self.config.cluster_user, password=None)
                if launch_key:
                    host.users[self.config.cluster_user].authorized_public_keys.add(launch_key)
                self.hosts[instance_id] = host
            host.running = True
            host.boot_count += 1
            host.boot_error = None
            self.trace.record("host.power_on", host=instance_id, boot=host.boot_count)
            return host

    def power_off(self, instance_id: str) -> None:
        with self._locked(instance_id):
            host = self.hosts.get(instance_id)
            if host is None:
                return
            host.running = False
            host.daemons = set()
            self.trace.record("host.power_off", host=instance_id)

    def mark_failed(self, instance_id: str, error: str) -> None:
        with self._locked(instance_id):
            self.hosts[instance_id].boot_error = error
            self.trace.record("host.boot_failed", host=instance_id, error=error)

    # ------------------------------------------------------------------
    # Sessions
    # ------------------------------------------------------------------

    def authenticate(self, host_id: str, user: str, credential: Credential) -> RemoteSession:
        with self._locked(host_id):
            host = self._running(host_id)
            account = host.users.get(user)
            method = "password" if isinstance(credential, Password) else "key"
            if account is None:
                self._auth_failed(host_id, user, method, "unknown user")
            if isinstance(credential, Password):
                if account.password is None:
                    self._auth_failed(host_id, user, method, "password authentication disabled")
                if not account.accepts_password(credential.secret):
                    self._auth_failed(host_id, user, method, "wrong password")
            elif public_key_for(credential.key) not in account.authorized_public_keys:
                self._auth_failed(host_id, user, method, "key not authorized")
            self.trace.record("host.auth", host=host_id, user=user, method=method, ok=True)
            return RemoteSession(host_id, user, host.boot_count, account.serial)

    def console(self, host_id: str) -> RemoteSession:
        """Local root session for the host's own boot scripts and daemons."""
        with self._locked(host_id):
            host = self._running(host_id)
            return RemoteSession(host_id, ROOT, host.boot_count, 0, local=True)

    def is_valid(self, session: RemoteSession) -> bool:
        host = self.hosts.get(session.host_id)
        if host is None or not host.running or host.boot_count != session.boot_count:
            return False
        if session.local:
            return True
        account = host.users.get(session.user)
        return account is not None and account.serial == session.user_serial

    # ------------------------------------------------------------------
    # Users and keys
    # ------------------------------------------------------------------

    def create_user(self, host_id: str, name: str, password: str | None) -> None:
        with self._locked(host_id):
            host = self._running(host_id)
            if name in host.users:
                raise UserExists(host_id, name)
            self._add_user(host, name, password)
            self.trace.record("host.create_user", host=host_id, user=name,
                              password=password is not None)

    def delete_user(self, session: RemoteSession, name: str) -> None:
        with self._session(session) as host:
            if name not in host.users:
                raise UnknownUser(session.host_id, name)
            del host.users[name]
            self.trace.record("host.delete_user", host=session.host_id, user=name)

    def install_authorized_key(self, session: RemoteSession, user: str, public_key: str) -> None:
        with self._session(session) as host:
            account = self._user(host, user)
            account.authorized_public_keys.add(public_key)
            self.trace.record("host.install_key", host=session.host_id, user=user,
                              key=public_key[-16:])

    def revoke_authorized_key(self, session: RemoteSession, user: str, public_key: str) -> None:
        with self._session(session) as host:
            account = self._user(host, user)
            account.authorized_public_keys.discard(public_key)
            self.trace.record("host.revoke_key", host=session.host_id, user=user,
                              key=public_key[-16:])

    # ------------------------------------------------------------------
    # Files
    # ------------------------------------------------------------------

    def write_hosts_file(self, session: RemoteSession, entries: list[HostEntry]) -> None:
        """Replace the hosts file in one step."""
        new_entries = [HostEntry(ip=e.ip, hostname=e.hostname) for e in entries]
        seen: set[str] = set()
        for entry in new_entries:
            if entry.hostname in seen:
                raise DuplicateHostsEntry(session.host_id, entry.hostname)
            seen.add(entry.hostname)
        with self._session(session) as host:
            host.hosts_file = new_entries
            self.trace.record("host.write_hosts", host=session.host_id,
                              entries=[f"{e.ip} {e.hostname}" for e in new_entries])

    def read_hosts_file(self, host_id: str) -> str:
        host = self.hosts[host_id]
        return render_hosts_entries(list(host.hosts_file))

    def set_hostname(self, session: RemoteSession, hostname: str) -> None:
        with self._session(session) as host:
            host.hostname = hostname
            self.trace.record("host.set_hostname", host=session.host_id, hostname=hostname)

    def set_init_marker(self, session: RemoteSession, role: str) -> None:
        with self._session(session) as host:
            host.init_marker = role

    def configure_service(
        self, session: RemoteSession, service: str, params: dict[str, str]
    ) -> None:
        with self._session(session) as host:
            host.configs[service] = dict(sorted(params.items()))
            self.trace.record("host.configure", host=session.host_id, service=service,
                              params=host.configs[service])

    # ------------------------------------------------------------------
    # Components
    # ------------------------------------------------------------------

    def install_component(
        self, session: RemoteSession, component: str, version: str | None = None
    ) -> None:
        with self._session(session) as host:
            host.components.add(component)
            if version:
                host.component_versions[component] = version
            self.trace.record("host.install", host=session.host_id, component=component)

    def start_component(self, session: RemoteSession, component: str) -> None:
        with self._session(session) as host:
            if component not in host.components:
                raise NotInstalled(session.host_id, component)
            host.daemons.add(component)
            self.trace.record("host.start", host=session.host_id, component=component)

    def stop_component(self, session: RemoteSession, component: str) -> None:
        with self._session(session) as host:
            if component not in host.components:
                raise NotInstalled(session.host_id, component)
            host.daemons.discard(component)
            self.trace.record("host.stop", host=session.host_id, component=component)

    # ------------------------------------------------------------------
    # Introspection
    # ------------------------------------------------------------------

    def host(self, host_id: str) -> HostState:
        return self.hosts[host_id].model_copy(deep=True)

    def is_running(self, host_id: str) -> bool:
        host = self.hosts.get(host_id)
        return bool(host and host.running)

    def daemon_running(self, host_id: str, component: str) -> bool:
        host = self.hosts.get(host_id)
        return bool(host and host.running and component in host.daemons)

    # ------------------------------------------------------------------
    # Internals
    # ------------------------------------------------------------------

    @contextmanager
    def _locked(self, host_id: str) -> Iterator[None]:
        with self._locks_guard:
            lock = self._locks.setdefault(host_id, threading.RLock())
        with lock:
            yield

    @contextmanager
    def _session(self, session: RemoteSession) -> Iterator[HostState]:
        with self._locked(session.host_id):
            if not self.is_valid(session):
                raise SessionInvalid(session.host_id, session.user)
            yield self.hosts[session.host_id]

    def _running(self, host_id: str) -> HostState:
        host = self.hosts.get(host_id)
        if host is None or not host.running:
            raise HostUnreachable(host_id)
        return host

    def _user(self, host: HostState, user: str) -> UserAccount:
        try:
            return host.users[user]
        except KeyError:
            raise UnknownUser(host.instance_id, user) from None

    def _add_user(self, host: HostState, name: str, password: str | None) -> None:
        host.user_serial += 1
        host.users[name] = UserAccount(name=name, password=password, serial=host.user_serial)

    def _auth_failed(self, host_id: str, user: str, method: str, reason: str) -> None:
        self.trace.record("host.auth", host=host_id, user=user, method=method, ok=False,
                          reason=reason)
        logger.debug("auth %s@%s via %s failed: %s", user, host_id, method, reason)
        raise AuthFailed(host_id, user, reason)
