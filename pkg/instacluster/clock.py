"""Simulated clock with a deterministic event queue.

Time only moves when someone calls ``advance``/``settle``. Events scheduled
for the same instant fire in scheduling order.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from typing import Callable

from pydantic import BaseModel

logger = logging.getLogger(__name__)


class ClockState(BaseModel):
    """Persisted part of the clock."""

    now: float = 0.0


class SimClock:
    """Discrete-event clock shared by every simulated component."""

    def __init__(self, state: ClockState | None = None):
        self.state = state or ClockState()
        self._queue: list[tuple[float, int, str, Callable[[], None]]] = []
        self._seq = itertools.count()

    @property
    def now(self) -> float:
        return self.state.now

    @property
    def pending(self) -> int:
        return len(self._queue)

    def schedule(self, delay: float, label: str, action: Callable[[], None]) -> None:
        """Run ``action`` once the clock reaches now + delay."""
        at = self.state.now + max(0.0, delay)
        heapq.heappush(self._queue, (at, next(self._seq), label, action))
        logger.debug("scheduled %s at t=%.3f", label, at)

    def advance(self, seconds: float) -> float:
        """Move time forward, firing due events in order. Returns the new time."""
        target = self.state.now + max(0.0, seconds)
        while self._queue and self._queue[0][0] <= target:
            at, _, label, action = heapq.heappop(self._queue)
            self.state.now = max(self.state.now, at)
            logger.debug("firing %s at t=%.3f", label, self.state.now)
            action()
            # an event may itself have advanced the clock past target
            target = max(target, self.state.now)
        self.state.now = target
        return self.state.now

    def settle(self) -> float:
        """Fire every queued event."""
        while self._queue:
            self.advance(self._queue[0][0] - self.state.now)
        return self.state.now
