"""Abstract IaaS provider interface.

The simulator is the only shipped implementation; a real cloud adapter would
subclass Provider and translate each call to the cloud API.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

from .models import AccessCredentials, Instance, InstanceFilter


class Provider(ABC):
    """Authenticated IaaS operations the provisioning protocol relies on."""

    name: str = "base"

    @abstractmethod
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
        """Launch ``count`` instances and return their ids in launch order."""

    @abstractmethod
    def describe_instances(
        self, creds: AccessCredentials, filter: InstanceFilter
    ) -> list[Instance]:
        """Return matching instance descriptors sorted by launch order."""

    @abstractmethod
    def tag_instance(
        self, creds: AccessCredentials, instance_id: str, key: str, value: str
    ) -> None:
        """Set a tag; an existing key is overwritten."""

    @abstractmethod
    def stop_instance(self, creds: AccessCredentials, instance_id: str) -> None:
        ...

    @abstractmethod
    def start_instance(self, creds: AccessCredentials, instance_id: str) -> None:
        ...

    @abstractmethod
    def terminate_instances(self, creds: AccessCredentials, instance_ids: list[str]) -> None:
        ...

    @abstractmethod
    def modify_user_data(
        self, creds: AccessCredentials, instance_id: str, user_data: str
    ) -> None:
        """Replace the user data of a stopped instance."""

    @abstractmethod
    def deactivate_credentials(self, key_id: str) -> None:
        """Make an access key inactive. Idempotent."""
