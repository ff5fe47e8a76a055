"""Cluster key pairs.

Keys are opaque tokens: the private half is derived from (seed, generation)
and the public half from the private half, so a host can check a presented
private key against its authorized public keys without real cryptography.
"""

from __future__ import annotations

import hashlib

from pydantic import BaseModel, Field

PUBLIC_PREFIX = "ssh-sim "
PRIVATE_PREFIX = "sim-private-"


class KeyPair(BaseModel):
    """A cluster credential generation."""

    public: str
    private: str
    generation: int = Field(ge=1)


def public_key_for(private: str) -> str:
    """Derive the public half of a private key token."""
    digest = hashlib.sha256(f"public:{private}".encode()).hexdigest()
    return PUBLIC_PREFIX + digest


def generate_keypair(seed: int, generation: int) -> KeyPair:
    """Deterministic key pair for a cluster seed and generation."""
    if generation < 1:
        raise ValueError("generation must be >= 1")
    private = PRIVATE_PREFIX + hashlib.sha256(
        f"instacluster:{seed}:{generation}".encode()
    ).hexdigest()
    return KeyPair(public=public_key_for(private), private=private, generation=generation)
