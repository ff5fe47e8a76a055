"""Persisted guest OS state of a simulated host."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..models import SortedSet

AGENT = "agent"
SERVER = "server"
LOOPBACK = ("127.0.0.1", "localhost")


class HostEntry(BaseModel):
    """One line of the hosts file."""

    ip: str
    hostname: str


class UserAccount(BaseModel):
    """A login account. Password is None for key-only users."""

    name: str
    password: str | None = None
    authorized_public_keys: SortedSet = Field(default_factory=set)
    serial: int = 0     # distinguishes a re-created user from the deleted one

    def accepts_password(self, password: str) -> bool:
        return self.password is not None and self.password == password


class HostState(BaseModel):
    """Disk and process state of one instance."""

    instance_id: str
    hostname: str
    users: dict[str, UserAccount] = Field(default_factory=dict)
    hosts_file: list[HostEntry] = Field(default_factory=list)
    components: SortedSet = Field(default_factory=set)
    daemons: SortedSet = Field(default_factory=set)
    configs: dict[str, dict[str, str]] = Field(default_factory=dict)
    component_versions: dict[str, str] = Field(default_factory=dict)
    init_marker: str | None = None      # role whose init script already ran
    running: bool = False
    boot_count: int = 0
    boot_error: str | None = None
    user_serial: int = 0

    def password_users(self) -> list[str]:
        return sorted(u.name for u in self.users.values() if u.password is not None)


def render_hosts_entries(entries: list[HostEntry]) -> str:
    """Render a hosts file: loopback first, one "<ip> <hostname>" line per entry."""
    lines = [f"{LOOPBACK[0]} {LOOPBACK[1]}"]
    lines.extend(f"{e.ip} {e.hostname}" for e in entries)
    return "\n".join(lines) + "\n"
