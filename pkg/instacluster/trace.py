"""Deterministic event trace.

Events are stamped with simulated time and a sequence number only, so two
runs with the same inputs produce byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable


@dataclass
class TraceEvent:
    """A single recorded step."""

    seq: int
    time: float
    kind: str                   # "provider.launch", "host.auth", "bootstrap.phase", ...
    data: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "time": round(self.time, 6),
            "kind": self.kind,
            "data": self.data,
        }


class TraceRecorder:
    """Collects TraceEvents; time comes from the injected clock function."""

    def __init__(self, now: Callable[[], float] = lambda: 0.0):
        self._now = now
        self.events: list[TraceEvent] = []

    def record(self, kind: str, **data: Any) -> TraceEvent:
        event = TraceEvent(seq=len(self.events), time=self._now(), kind=kind, data=data)
        self.events.append(event)
        return event

    def filter(self, prefix: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind.startswith(prefix)]

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(e.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
            for e in self.events
        )

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        return path

    def __len__(self) -> int:
        return len(self.events)
