"""In-memory unidirectional byte links with injectable faults.

Module code on either end is identical to the distributed topology; only this
layer knows about delays, drops and severs. Delivery is FIFO even while the
delay changes (a later send never overtakes an earlier one), matching what a
TCP stream would do.
"""

from __future__ import annotations

import random
from typing import Callable

from .clock import EventLoop


class Link:
    def __init__(self, loop: EventLoop, name: str, seed: int = 0):
        self.loop = loop
        self.name = name
        self.deliver: Callable[[bytes], None] | None = None
        self.delay_ms = 0
        self.drop_probability = 0.0
        self.sever_windows: list[tuple[int, int]] = []  # [start_ms, end_ms)
        self.rng = random.Random(f"{seed}:{name}")
        self._last_delivery = 0
        self._in_flight = 0
        self.sent = 0
        self.dropped = 0

    def connect(self, deliver: Callable[[bytes], None]):
        self.deliver = deliver

    # -- fault injection --------------------------------------------------------

    def set_delay(self, ms: int):
        self.delay_ms = max(0, ms)

    def set_drop(self, probability: float):
        if not 0.0 <= probability <= 1.0:
            raise ValueError("probability must be in [0,1]")
        self.drop_probability = probability

    def sever(self, from_ms: int, duration_ms: int):
        self.sever_windows.append((from_ms, from_ms + duration_ms))

    def _severed(self, t: int) -> bool:
        return any(start <= t < end for start, end in self.sever_windows)

    # -- transfer -----------------------------------------------------------------

    def send(self, data: bytes):
        now = self.loop.now_ms()
        self.sent += 1
        if self._severed(now):
            self.dropped += 1
            return
        if self.drop_probability and self.rng.random() < self.drop_probability:
            self.dropped += 1
            return
        at = max(now + self.delay_ms, self._last_delivery)
        self._last_delivery = at
        self._in_flight += 1
        self.loop.schedule_at(at, lambda: self._arrive(data))

    def _arrive(self, data: bytes):
        self._in_flight -= 1
        if self._severed(self.loop.now_ms()):
            self.dropped += 1
            return
        if self.deliver is not None:
            self.deliver(data)

    def queue_depth(self) -> int:
        return self._in_flight
