"""Exception hierarchy for instacluster.

Every error raised by the library derives from InstaClusterError. The class
name is the error name used in reports and traces; ``exit_code`` is the CLI
exit status it maps to.
"""

from __future__ import annotations


class InstaClusterError(Exception):
    """Base class for all instacluster errors."""

    exit_code: int = 1

    @property
    def name(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        return {"error": self.name, "message": str(self)}


# ---------------------------------------------------------------------------
# provider-sim
# ---------------------------------------------------------------------------


class ProviderError(InstaClusterError):
    pass


class InactiveCredentials(ProviderError):
    def __init__(self, key_id: str):
        super().__init__(f"access key {key_id} is inactive")
        self.key_id = key_id


class InvalidCredentials(ProviderError):
    def __init__(self, key_id: str):
        super().__init__(f"access key {key_id} not recognized or secret mismatch")
        self.key_id = key_id


class InvalidRegion(ProviderError):
    def __init__(self, region: str):
        super().__init__(f"invalid region: {region!r}")
        self.region = region


class UnknownInstance(ProviderError):
    def __init__(self, instance_id: str):
        super().__init__(f"unknown instance: {instance_id}")
        self.instance_id = instance_id


class InvalidTransition(ProviderError):
    def __init__(self, instance_id: str, current: str, requested: str):
        super().__init__(f"instance {instance_id}: cannot go from {current} to {requested}")
        self.instance_id = instance_id
        self.current = current
        self.requested = requested


class UnknownKey(ProviderError):
    def __init__(self, key_id: str):
        super().__init__(f"unknown key: {key_id}")
        self.key_id = key_id


# ---------------------------------------------------------------------------
# host-sim
# ---------------------------------------------------------------------------


class HostError(InstaClusterError):
    pass


class AuthFailed(HostError):
    def __init__(self, host: str, user: str, reason: str):
        super().__init__(f"authentication as {user}@{host} failed: {reason}")
        self.host = host
        self.user = user
        self.reason = reason


class HostUnreachable(HostError):
    def __init__(self, host: str):
        super().__init__(f"host {host} is not running")
        self.host = host


class SessionInvalid(HostError):
    def __init__(self, host: str, user: str):
        super().__init__(f"session {user}@{host} is no longer valid")
        self.host = host
        self.user = user


class UserExists(HostError):
    def __init__(self, host: str, user: str):
        super().__init__(f"user {user} already exists on {host}")
        self.host = host
        self.user = user


class UnknownUser(HostError):
    def __init__(self, host: str, user: str):
        super().__init__(f"no user {user} on {host}")
        self.host = host
        self.user = user


class NotInstalled(HostError):
    def __init__(self, host: str, component: str):
        super().__init__(f"component {component} is not installed on {host}")
        self.host = host
        self.component = component


class DuplicateHostsEntry(HostError):
    def __init__(self, host: str, hostname: str):
        super().__init__(f"hosts file for {host} lists {hostname} twice")
        self.host = host
        self.hostname = hostname


class MalformedUserData(HostError):
    def __init__(self, reason: str):
        super().__init__(f"malformed user data: {reason}")
        self.reason = reason


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------


class BootstrapError(InstaClusterError):
    pass


class ClusterAlreadyExists(BootstrapError):
    def __init__(self, region: str):
        super().__init__(f"a cluster already exists in region {region}")
        self.region = region


class DiscoveryTimeout(BootstrapError):
    def __init__(self, expected: int, found: int, waited: float):
        super().__init__(
            f"found {found} of {expected} expected slaves after {waited:g} simulated seconds"
        )
        self.expected = expected
        self.found = found
        self.waited = waited


class SlaveUnreachable(BootstrapError):
    def __init__(self, failures: dict[str, str]):
        listed = ", ".join(f"{host} ({reason})" for host, reason in sorted(failures.items()))
        super().__init__(f"could not configure: {listed}")
        self.failures = dict(failures)


class DuplicateTagHostname(BootstrapError):
    def __init__(self, hostname: str, instance_ids: list[str]):
        super().__init__(f"hostname {hostname} tagged on {', '.join(instance_ids)}")
        self.hostname = hostname
        self.instance_ids = list(instance_ids)


class MissingIp(BootstrapError):
    def __init__(self, hostname: str):
        super().__init__(f"no private IP known for {hostname}")
        self.hostname = hostname


# ---------------------------------------------------------------------------
# lifecycle
# ---------------------------------------------------------------------------


class LifecycleError(InstaClusterError):
    pass


class BusyCluster(LifecycleError):
    def __init__(self, region: str):
        super().__init__(f"another lifecycle operation is running on the cluster in {region}")
        self.region = region


class NoCluster(LifecycleError):
    def __init__(self, region: str | None):
        where = f"in region {region}" if region else "to operate on"
        super().__init__(f"no cluster {where}")
        self.region = region


class ClusterNotReady(LifecycleError):
    def __init__(self, region: str, phase: str):
        super().__init__(f"cluster in {region} is {phase}, expected ready")
        self.region = region
        self.phase = phase


# ---------------------------------------------------------------------------
# services
# ---------------------------------------------------------------------------


class ServiceError(InstaClusterError):
    pass


class UnknownService(ServiceError):
    def __init__(self, service: str):
        super().__init__(f"unknown service: {service}")
        self.service = service


class UnknownHost(ServiceError):
    def __init__(self, hostname: str):
        super().__init__(f"{hostname} is not part of the cluster")
        self.hostname = hostname


class StaleAgent(ServiceError):
    def __init__(self, hostname: str):
        super().__init__(f"agent on {hostname} is stale")
        self.hostname = hostname


class ServerUnreachable(ServiceError):
    def __init__(self, region: str):
        super().__init__(f"provisioning server of the cluster in {region} is not running")
        self.region = region


class AgentNotRunning(ServiceError):
    def __init__(self, hostname: str):
        super().__init__(f"agent daemon is not running on {hostname}")
        self.hostname = hostname


class PortConflict(ServiceError):
    def __init__(self, port: int, components: list[str]):
        super().__init__(f"port {port} claimed by {', '.join(components)}")
        self.port = port
        self.components = list(components)


# ---------------------------------------------------------------------------
# specfile
# ---------------------------------------------------------------------------


class SpecError(InstaClusterError):
    pass


class InvalidSpec(SpecError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


def _all_error_classes() -> list[type[InstaClusterError]]:
    found: list[type[InstaClusterError]] = []
    pending = [InstaClusterError]
    while pending:
        cls = pending.pop()
        for sub in cls.__subclasses__():
            found.append(sub)
            pending.append(sub)
    return sorted(found, key=lambda c: c.__name__)


USAGE_EXIT_CODE = 2

# Error name -> exit code, as documented in the README.
EXIT_CODES: dict[str, int] = {cls.__name__: cls.exit_code for cls in _all_error_classes()}
