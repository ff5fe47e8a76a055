"""Simulation configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace


def _as_bool(value: str) -> bool:
    return value.strip().lower() in {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class SimulationConfig:
    """Knobs of the simulated cloud and of the provisioning protocol."""

    # provider-sim
    stable_ips: bool = False            # keep private IPs across stop/start
    boot_delay_max: float = 0.0         # 0 = synchronous boot
    image_id: str = "ami-instacluster"
    ip_network: str = "10.0.0.0/16"

    # bootstrap
    poll_interval: float = 5.0          # simulated seconds between discovery polls
    discovery_timeout: float = 300.0
    cluster_user: str = "ubuntu"
    temp_user: str = "tmpuser"
    agent_version: str = "2.1.0"

    # services
    heartbeat_interval: float = 10.0
    stale_after_beats: int = 3

    @property
    def stale_threshold(self) -> float:
        return self.heartbeat_interval * self.stale_after_beats

    @classmethod
    def from_env(cls, environ: dict[str, str] | None = None) -> SimulationConfig:
        """Build a config from INSTA_* environment variables over the defaults."""
        environ = os.environ if environ is None else environ
        overrides: dict[str, object] = {}
        for f in fields(cls):
            raw = environ.get(f"INSTA_{f.name.upper()}")
            if raw is None:
                continue
            if f.type == "bool":
                overrides[f.name] = _as_bool(raw)
            elif f.type == "float":
                overrides[f.name] = float(raw)
            elif f.type == "int":
                overrides[f.name] = int(raw)
            else:
                overrides[f.name] = raw
        return replace(cls(), **overrides)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
