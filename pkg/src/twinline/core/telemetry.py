"""Telemetry application and synchronization metrics."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

from .model import ThingEvent, ThingRegistry

LATENCY_BUCKETS_MS = (10, 25, 50, 100, 250, 500, 1000, 2000, 5000)


@dataclass
class Histogram:
    buckets: tuple[int, ...] = LATENCY_BUCKETS_MS
    counts: list[int] = field(default_factory=list)
    total: int = 0
    sum: int = 0

    def __post_init__(self):
        if not self.counts:
            self.counts = [0] * (len(self.buckets) + 1)

    def observe(self, value_ms: int):
        i = 0
        while i < len(self.buckets) and value_ms > self.buckets[i]:
            i += 1
        self.counts[i] += 1
        self.total += 1
        self.sum += value_ms

    def to_dict(self) -> dict:
        out = {"total": self.total, "sum_ms": self.sum, "buckets": {}}
        for i, edge in enumerate(self.buckets):
            out["buckets"][f"le_{edge}"] = self.counts[i]
        out["buckets"]["inf"] = self.counts[-1]
        return out


@dataclass
class SyncMetrics:
    telemetry_latency: Histogram = field(default_factory=Histogram)
    mission_rtt: Histogram = field(default_factory=Histogram)
    divergence_mm: deque = field(default_factory=lambda: deque(maxlen=4096))
    divergence_max_mm: int = 0
    counters: Counter = field(default_factory=Counter)

    def observe_divergence(self, rfid: str, error_mm: int):
        self.divergence_mm.append((rfid, error_mm))
        if error_mm > self.divergence_max_mm:
            self.divergence_max_mm = error_mm

    def to_dict(self) -> dict:
        return {
            "telemetry_latency": self.telemetry_latency.to_dict(),
            "mission_rtt": self.mission_rtt.to_dict(),
            "divergence_max_mm": self.divergence_max_mm,
            "divergence_samples": len(self.divergence_mm),
            "counters": dict(self.counters),
        }


def apply_telemetry(
    registry: ThingRegistry,
    control: dict[str, str],
    assignments,
    now_ms: int,
    metrics: SyncMetrics,
) -> list[ThingEvent]:
    """Apply one PUBLISH batch to the bound things.

    Unknown tags are counted and dropped, never fatal. Events fire exactly
    once per value edge; re-published identical values fire nothing.
    """
    source_ts = int(control.get("ts", "0") or 0)
    fired: list[ThingEvent] = []
    known = 0
    for tag, _vtype, value in assignments:
        targets = registry.lookup_tag(tag)
        if not targets:
            metrics.counters["unknown_tags"] += 1
            continue
        known += 1
        for thing, prop in targets:
            fired.extend(thing.apply_bound_update(prop, value, source_ts))
    if known:
        metrics.counters["applied_tags"] += known
        metrics.telemetry_latency.observe(max(0, now_ms - source_ts))
    metrics.counters["publish_batches"] += 1
    return fired
