"""The simulated world: provider, hosts, clock, registry and trace wired together."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

from pydantic import BaseModel, Field

from .bootstrap.userdata import MasterConfig, parse_user_data, slave_user_data
from .clock import ClockState, SimClock
from .cluster import ClusterRegistry, ClusterState
from .config import SimulationConfig
from .errors import InstaClusterError
from .hosts import boot
from .hosts.simulator import HostSimulator
from .hosts.state import HostState
from .provider.models import AccessCredentials, Instance, check_region
from .provider.simulated import ProviderState, SimulatedProvider
from .services.models import ServerState
from .trace import TraceRecorder

if TYPE_CHECKING:
    from .specfile import ClusterSpec

logger = logging.getLogger(__name__)


class World(BaseModel):
    """Complete persisted state of one simulated cloud."""

    seed: int = 0
    clock: ClockState = Field(default_factory=ClockState)
    provider: ProviderState = Field(default_factory=ProviderState)
    hosts: dict[str, HostState] = Field(default_factory=dict)
    clusters: dict[str, ClusterState] = Field(default_factory=dict)
    servers: dict[str, ServerState] = Field(default_factory=dict)

    @classmethod
    def new(cls, seed: int) -> World:
        return cls(seed=seed, provider=ProviderState(seed=seed))

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> World:
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class BootResult:
    """What a host's init script produced on its latest boot."""

    instance_id: str
    role: str | None = None
    value: Any = None
    error: InstaClusterError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def unwrap(self) -> Any:
        if self.error is not None:
            raise self.error
        return self.value


class Simulation:
    """One simulated cloud and everything running inside it."""

    def __init__(self, world: World | int = 0, config: SimulationConfig | None = None):
        self.world = world if isinstance(world, World) else World.new(world)
        self.config = config or SimulationConfig()
        self.clock = SimClock(self.world.clock)
        self.trace = TraceRecorder(lambda: self.clock.now)
        self.provider = SimulatedProvider(
            self.world.provider, self.clock, self.config, hooks=self, trace=self.trace
        )
        self.hosts = HostSimulator(self.world.hosts, self.config, self.trace)
        self.registry = ClusterRegistry(self.world.clusters)
        self.servers = self.world.servers
        self.boot_results: dict[str, BootResult] = {}

    @property
    def seed(self) -> int:
        return self.world.seed

    # ------------------------------------------------------------------
    # Provider hooks
    # ------------------------------------------------------------------

    def on_boot(self, instance: Instance) -> None:
        launch_key = None
        if instance.key_name:
            record = self.provider.key_pair(instance.key_name)
            launch_key = record.public_key if record else None
        self.hosts.power_on(instance.id, instance.private_ip, launch_key)

        role = None
        try:
            role = parse_user_data(instance.user_data).get("role")
            result = BootResult(instance.id, role, value=boot.on_boot(self, instance))
        except InstaClusterError as e:
            logger.warning("init script on %s failed: %s", instance.id, e)
            self.hosts.mark_failed(instance.id, e.name)
            result = BootResult(instance.id, role, error=e)
        self.boot_results[instance.id] = result

    def on_shutdown(self, instance: Instance) -> None:
        self.hosts.power_off(instance.id)

    def boot_result(self, instance_id: str) -> BootResult:
        try:
            return self.boot_results[instance_id]
        except KeyError:
            raise RuntimeError(f"{instance_id} has not booted in this simulation") from None

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def save(self, path: str | Path) -> Path:
        self.clock.settle()
        return self.world.save(path)

    @classmethod
    def load(cls, path: str | Path, config: SimulationConfig | None = None) -> Simulation:
        return cls(World.load(path), config)

    def snapshot(self) -> dict[str, Any]:
        """Deep, JSON-ready copy of the world for comparisons."""
        return self.world.model_dump(mode="json")


def provision_cluster(
    sim: Simulation,
    spec: ClusterSpec,
    creds: AccessCredentials,
    image_id: str | None = None,
    key_name: str | None = None,
) -> ClusterState:
    """Launch a cluster described by ``spec`` and deploy its services.

    Slaves are launched before the master. When the master's boot fails
    for any reason the freshly launched instances are terminated again.
    """
    from .services.planner import suggest_configuration
    from .services.server import ServiceServer

    region = check_region(spec.region)
    image = image_id or sim.config.image_id
    provider = sim.provider
    provider.register_credentials(creds.key_id, creds.secret)
    sim.trace.record("provision.begin", region=region, slaves=spec.slave_count, seed=spec.seed)

    launched: list[str] = []
    if spec.slave_count:
        launched += provider.launch_instances(
            creds, region, image, spec.slave_instance_type, spec.slave_count,
            user_data=slave_user_data(creds.key_id), key_name=key_name,
        )
    config = MasterConfig(
        access_key_id=creds.key_id,
        secret_key=creds.secret,
        region=region,
        deactivate_key_after_discovery=spec.deactivate_key,
        expected_slave_count=spec.slave_count,
        seed=spec.seed,
        agent_on_master=spec.agent_on_master,
    )
    (master_id,) = provider.launch_instances(
        creds, region, image, spec.master_instance_type, 1,
        user_data=config.to_user_data(), key_name=key_name,
    )
    launched.append(master_id)
    sim.clock.settle()

    try:
        state: ClusterState = sim.boot_result(master_id).unwrap()
    except InstaClusterError as e:
        logger.warning("provisioning %s failed (%s); terminating %d instance(s)",
                       region, e.name, len(launched))
        try:
            provider.terminate_instances(creds, launched)
        except InstaClusterError as cleanup:
            logger.error("could not terminate %s: %s", launched, cleanup)
        raise

    state.slave_instance_type = spec.slave_instance_type
    state.config_overrides = dict(spec.config_overrides)
    if spec.services:
        plan = suggest_configuration(spec.services, state)
        ServiceServer(sim, region).deploy_plan(plan, spec.config_overrides)
    sim.trace.record("provision.end", region=region, phase=state.phase.value)
    return state
