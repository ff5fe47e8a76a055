"""Cluster spec documents (``.cluster.json``): export, validate, load, save."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .cluster import ClusterPhase, ClusterState
from .errors import ClusterNotReady, InvalidRegion, InvalidSpec
from .provider.models import check_region
from .services.catalog import ServiceCatalog, default_catalog
from .services.models import DeploymentPlan

logger = logging.getLogger(__name__)

SPEC_VERSION = 1
SPEC_SUFFIX = ".cluster.json"


class ClusterSpec(BaseModel):
    """Everything needed to rebuild a cluster deterministically."""

    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = SPEC_VERSION
    region: str
    master_instance_type: str = "m3.large"
    slave_count: int = Field(default=0, ge=0)
    slave_instance_type: str = "m3.large"
    services: list[str] = Field(default_factory=list)
    config_overrides: dict[str, str] = Field(default_factory=dict)
    seed: int = 0
    agent_on_master: bool = False
    deactivate_key: bool = False

    @field_validator("region")
    @classmethod
    def _region(cls, value: str) -> str:
        try:
            return check_region(value)
        except InvalidRegion as e:
            raise ValueError(str(e)) from None

    @field_validator("config_overrides")
    @classmethod
    def _overrides(cls, value: dict[str, str]) -> dict[str, str]:
        for key in value:
            service, _, name = key.partition(".")
            if not service or not name:
                raise ValueError(f"override {key!r} must look like <service>.<key>")
        return value


@dataclass
class SpecValidation:
    """Result of validate_spec: a spec, or every problem found."""

    spec: ClusterSpec | None = None
    errors: list[tuple[str, str]] = field(default_factory=list)     # (field path, message)

    @property
    def ok(self) -> bool:
        return self.spec is not None and not self.errors

    def messages(self) -> list[str]:
        return [f"{path}: {msg}" for path, msg in self.errors]


def export_spec(state: ClusterState, plan: DeploymentPlan | None = None) -> ClusterSpec:
    """Capture a ready cluster as a spec."""
    if state.phase != ClusterPhase.READY:
        raise ClusterNotReady(state.region, state.phase.value)
    return ClusterSpec(
        region=state.region,
        master_instance_type=state.master_instance_type,
        slave_count=state.slave_count,
        slave_instance_type=state.slave_instance_type,
        services=list(plan.services) if plan else [],
        config_overrides=dict(state.config_overrides),
        seed=state.seed,
        agent_on_master=state.agent_on_master,
        deactivate_key=state.deactivate_key,
    )


def _path(loc: tuple[Any, ...]) -> str:
    path = ""
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path or "."


def validate_spec(
    document: dict[str, Any] | str | bytes, catalog: ServiceCatalog | None = None
) -> SpecValidation:
    """Check a document; every violation is reported with its field path."""
    catalog = catalog or default_catalog()
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as e:
            return SpecValidation(errors=[(".", f"not valid UTF-8: {e.reason} at byte {e.start}")])
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            return SpecValidation(errors=[(".", f"not valid JSON: {e.msg}")])
    if not isinstance(document, dict):
        return SpecValidation(errors=[(".", "document must be a JSON object")])

    errors: list[tuple[str, str]] = []
    spec = None
    try:
        spec = ClusterSpec.model_validate(document)
    except ValidationError as e:
        errors.extend((_path(err["loc"]), err["msg"]) for err in e.errors())

    services = document.get("services")
    if isinstance(services, list):
        for i, name in enumerate(services):
            if isinstance(name, str) and name not in catalog:
                errors.append((f".services[{i}]", f"unknown service {name!r}"))

    if errors:
        return SpecValidation(errors=errors)
    return SpecValidation(spec=spec)


def validate_spec_file(path: str | Path) -> SpecValidation:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        return SpecValidation(errors=[(".", f"cannot read {path}: {e.strerror or e}")])
    return validate_spec(raw)


def load_spec(path: str | Path) -> ClusterSpec:
    """Read and validate a spec file; raises InvalidSpec listing every problem."""
    result = validate_spec_file(path)
    if not result.ok:
        raise InvalidSpec(result.messages())
    return result.spec


def save_spec(spec: ClusterSpec, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(spec_to_json(spec), encoding="utf-8")
    logger.info("wrote cluster spec to %s", path)
    return path


def spec_to_json(spec: ClusterSpec) -> str:
    return json.dumps(spec.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def spec_from_options(
    region: str,
    slaves: int = 0,
    instance_type: str = "m3.large",
    master_instance_type: str | None = None,
    services: list[str] | None = None,
    config_overrides: dict[str, str] | None = None,
    seed: int = 0,
    agent_on_master: bool = False,
    deactivate_key: bool = False,
) -> ClusterSpec:
    """Build a spec from CLI-style options, validated like a document."""
    result = validate_spec({
        "version": SPEC_VERSION,
        "region": region,
        "master_instance_type": master_instance_type or instance_type,
        "slave_count": slaves,
        "slave_instance_type": instance_type,
        "services": list(services or []),
        "config_overrides": dict(config_overrides or {}),
        "seed": seed,
        "agent_on_master": agent_on_master,
        "deactivate_key": deactivate_key,
    })
    if not result.ok:
        raise InvalidSpec(result.messages())
    return result.spec
