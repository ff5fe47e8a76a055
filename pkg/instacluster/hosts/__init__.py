"""Simulated guest hosts."""

from .simulator import HostSimulator, Password, PrivateKey, RemoteSession
from .state import AGENT, SERVER, HostEntry, HostState, UserAccount, render_hosts_entries

__all__ = [
    "HostSimulator",
    "Password",
    "PrivateKey",
    "RemoteSession",
    "AGENT",
    "SERVER",
    "HostEntry",
    "HostState",
    "UserAccount",
    "render_hosts_entries",
]
