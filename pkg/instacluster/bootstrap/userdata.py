"""User-data wire format.

Line-oriented ``key=value`` text. Blank lines and ``#`` comments are skipped,
unknown keys are ignored, the last occurrence of a key wins.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, ValidationError

from ..errors import MalformedUserData

ROLE_MASTER = "master"
ROLE_SLAVE = "slave"
ROLES = (ROLE_MASTER, ROLE_SLAVE)

# rendering order
KEYS = (
    "role",
    "access_key_id",
    "secret_key",
    "region",
    "deactivate_key",
    "expected_slaves",
    "seed",
    "agent_on_master",
)


def parse_user_data(text: str) -> dict[str, str]:
    """Parse user data into a dict of known keys."""
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedUserData(f"line {lineno} is not key=value")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in KEYS:
            fields[key] = value.strip()
    return fields


def render_user_data(fields: dict[str, str]) -> str:
    return "".join(f"{k}={fields[k]}\n" for k in KEYS if k in fields)


def role_of(fields: dict[str, str]) -> str:
    role = fields.get("role")
    if role is None:
        raise MalformedUserData("role missing")
    if role not in ROLES:
        raise MalformedUserData(f"unknown role {role!r}")
    return role


def _flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in {"true", "1", "yes"}:
        return True
    if lowered in {"false", "0", "no", ""}:
        return False
    raise MalformedUserData(f"not a boolean: {value!r}")


class MasterConfig(BaseModel):
    """Boot parameters of the master instance."""

    access_key_id: str
    secret_key: str
    region: str
    deactivate_key_after_discovery: bool = False
    expected_slave_count: int = Field(default=0, ge=0)
    seed: int = 0
    agent_on_master: bool = False

    @classmethod
    def from_user_data(cls, fields: dict[str, str]) -> MasterConfig:
        for required in ("access_key_id", "secret_key", "region"):
            if not fields.get(required):
                raise MalformedUserData(f"{required} missing")
        try:
            return cls(
                access_key_id=fields["access_key_id"],
                secret_key=fields["secret_key"],
                region=fields["region"],
                deactivate_key_after_discovery=_flag(fields.get("deactivate_key", "false")),
                expected_slave_count=int(fields.get("expected_slaves", "0")),
                seed=int(fields.get("seed", "0")),
                agent_on_master=_flag(fields.get("agent_on_master", "false")),
            )
        except (ValueError, ValidationError) as e:
            raise MalformedUserData(str(e).splitlines()[0]) from e

    def to_user_data(self) -> str:
        return render_user_data({
            "role": ROLE_MASTER,
            "access_key_id": self.access_key_id,
            "secret_key": self.secret_key,
            "region": self.region,
            "deactivate_key": str(self.deactivate_key_after_discovery).lower(),
            "expected_slaves": str(self.expected_slave_count),
            "seed": str(self.seed),
            "agent_on_master": str(self.agent_on_master).lower(),
        })


def slave_user_data(access_key_id: str) -> str:
    return render_user_data({"role": ROLE_SLAVE, "access_key_id": access_key_id})
