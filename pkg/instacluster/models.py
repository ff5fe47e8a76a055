"""Shared pydantic helpers."""

from __future__ import annotations

from typing import Annotated

from pydantic import PlainSerializer

# A set of strings that always serializes in sorted order, so dumped state
# does not depend on hash randomization.
SortedSet = Annotated[
    set[str],
    PlainSerializer(lambda values: sorted(values), return_type=list[str]),
]
