"""Service catalog management."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import yaml

from ..errors import UnknownService
from .models import ServiceDescriptor

DEFAULT_CATALOG = Path(__file__).parent / "data" / "catalog.yaml"


class ServiceCatalog:
    """Loads and queries service descriptors."""

    def __init__(self, services: list[ServiceDescriptor]):
        self.services: dict[str, ServiceDescriptor] = {}
        for descriptor in services:
            self.services[descriptor.name] = descriptor

    @classmethod
    def from_yaml_file(cls, path: str | Path) -> ServiceCatalog:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        return cls([ServiceDescriptor.model_validate(s) for s in data.get("services", [])])

    def get(self, name: str) -> ServiceDescriptor:
        try:
            return self.services[name]
        except KeyError:
            raise UnknownService(name) from None

    def __contains__(self, name: object) -> bool:
        return name in self.services

    def __len__(self) -> int:
        return len(self.services)


@lru_cache(maxsize=1)
def default_catalog() -> ServiceCatalog:
    return ServiceCatalog.from_yaml_file(DEFAULT_CATALOG)
