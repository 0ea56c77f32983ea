"""Discrete-event loop on a virtual millisecond clock.

Everything in the in-process topology (ticks, link deliveries, timeouts) is
an event here, ordered by (time, insertion sequence), which is what makes
whole-stack runs bit-reproducible.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Callable


class _Event:
    __slots__ = ("time", "seq", "fn", "cancelled")

    def __init__(self, time: int, seq: int, fn: Callable[[], None]):
        self.time = time
        self.seq = seq
        self.fn = fn
        self.cancelled = False

    def __lt__(self, other: "_Event") -> bool:
        return (self.time, self.seq) < (other.time, other.seq)


class EventLoop:
    def __init__(self):
        self._now = 0
        self._heap: list[_Event] = []
        self._seq = itertools.count()
        self.processed = 0

    def now_ms(self) -> int:
        return self._now

    def schedule_at(self, time_ms: int, fn: Callable[[], None]) -> _Event:
        event = _Event(max(time_ms, self._now), next(self._seq), fn)
        heapq.heappush(self._heap, event)
        return event

    def schedule(self, delay_ms: int, fn: Callable[[], None]) -> _Event:
        return self.schedule_at(self._now + max(0, delay_ms), fn)

    @staticmethod
    def cancel(event: _Event):
        event.cancelled = True

    def run_until(self, time_ms: int):
        """Process every event with time <= time_ms, then park the clock there."""
        while self._heap and self._heap[0].time <= time_ms:
            event = heapq.heappop(self._heap)
            if event.cancelled:
                continue
            self._now = event.time
            self.processed += 1
            event.fn()
        self._now = max(self._now, time_ms)

    def drain_current(self):
        """Process everything already due at the current instant."""
        self.run_until(self._now)
