"""Run traces: what happened, replayable byte-for-byte.

Two artifacts per run: ``events.trace`` (the OME sensor-event trace,
``tick,point,value`` lines) and ``run.trace`` (NDJSON of everything else,
virtual-time stamped, keys sorted). Virtual time makes both deterministic, so
replay verification is plain byte comparison.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field


def _encode_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    return str(value)


@dataclass
class TraceRecorder:
    include_types: set[str] | None = None  # None: everything
    ome_events: list[tuple[int, str, str]] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)

    def ome(self, tick: int, point: str, value):
        self.ome_events.append((tick, point, _encode_value(value)))

    def record(self, record: dict):
        if self.include_types is not None and record.get("type") not in self.include_types:
            return
        self.records.append(record)

    # -- serialization -----------------------------------------------------------

    def events_lines(self) -> list[str]:
        return [f"{t},{p},{v}" for t, p, v in self.ome_events]

    def run_lines(self) -> list[str]:
        return [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in self.records]

    def write(self, out_dir: str, header: dict):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "events.trace"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.events_lines()))
            fh.write("\n")
        with open(os.path.join(out_dir, "run.trace"), "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"type": "header", **header}, sort_keys=True,
                                separators=(",", ":")))
            fh.write("\n")
            for line in self.run_lines():
                fh.write(line)
                fh.write("\n")


@dataclass
class TraceVerdict:
    status: str  # "identical" | "divergent" | "incomplete"
    detail: str = ""
    line: int | None = None
    tick: int | None = None

    @property
    def ok(self) -> bool:
        return self.status == "identical"


def compare_traces(recorded: list[str], fresh: list[str]) -> TraceVerdict:
    for i, (a, b) in enumerate(zip(recorded, fresh)):
        if a != b:
            tick = None
            try:
                tick = json.loads(a).get("tick")
            except (json.JSONDecodeError, AttributeError):
                parts = a.split(",", 1)
                if parts and parts[0].isdigit():
                    tick = int(parts[0])
            return TraceVerdict(
                "divergent", f"first divergence at line {i + 1}", line=i + 1, tick=tick
            )
    if len(recorded) < len(fresh):
        return TraceVerdict(
            "incomplete",
            f"recorded trace ends at line {len(recorded)}, fresh has {len(fresh)}",
            line=len(recorded),
        )
    if len(recorded) > len(fresh):
        return TraceVerdict(
            "divergent",
            f"recorded trace has {len(recorded) - len(fresh)} extra lines",
            line=len(fresh) + 1,
        )
    return TraceVerdict("identical")
