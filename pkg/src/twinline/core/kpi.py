"""KPI accumulation over the published flow-ledger counters.

The twin keeps a sparse series per ledger tag (value at each publish tick);
a report over a window is exactly the difference of the series values at the
window's endpoints, which keeps window additivity exact in integer units.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from .. import tagnames


@dataclass
class KpiReport:
    from_tick: int
    to_tick: int
    energy_uj: dict[str, int]
    material_in: dict[int, int]
    material_out: dict[int, int]
    waste: dict[int, int]

    def to_dict(self) -> dict:
        return {
            "window": {"from": self.from_tick, "to": self.to_tick},
            "energy_uj": dict(sorted(self.energy_uj.items())),
            "material_in": {str(k): v for k, v in sorted(self.material_in.items())},
            "material_out": {str(k): v for k, v in sorted(self.material_out.items())},
            "waste": {str(k): v for k, v in sorted(self.waste.items())},
        }

    def serialize(self) -> str:
        """The documented record format: one 'name value' line per counter."""
        lines = [f"window {self.from_tick} {self.to_tick}"]
        for dev, v in sorted(self.energy_uj.items()):
            lines.append(f"energy_uj.{dev} {v}")
        for k, v in sorted(self.material_in.items()):
            lines.append(f"material_in.{k} {v}")
        for k, v in sorted(self.material_out.items()):
            lines.append(f"material_out.{k} {v}")
        for k, v in sorted(self.waste.items()):
            lines.append(f"waste.{k} {v}")
        return "\n".join(lines) + "\n"


class KpiStore:
    def __init__(self):
        self.series: dict[str, tuple[list[int], list[int]]] = {}

    def record(self, tag: str, tick: int, value: int):
        ticks, values = self.series.setdefault(tag, ([], []))
        if ticks and ticks[-1] == tick:
            values[-1] = value
            return
        ticks.append(tick)
        values.append(value)

    def value_at(self, tag: str, tick: int) -> int:
        if tag not in self.series:
            return 0
        ticks, values = self.series[tag]
        i = bisect.bisect_right(ticks, tick)
        return values[i - 1] if i else 0

    def delta(self, tag: str, from_tick: int, to_tick: int) -> int:
        return self.value_at(tag, to_tick) - self.value_at(tag, from_tick)

    def report(self, from_tick: int, to_tick: int, stations: int) -> KpiReport:
        energy = {}
        prefix = "DT/" + tagnames.energy("")
        for tag in self.series:
            if tag.startswith(prefix):
                energy[tag[len(prefix):]] = self.delta(tag, from_tick, to_tick)
        material_in, material_out, waste = {}, {}, {}
        for k in range(1, stations + 1):
            m = self.delta("DT/" + tagnames.material(k), from_tick, to_tick)
            w = self.delta("DT/" + tagnames.waste(k), from_tick, to_tick)
            material_in[k] = m
            waste[k] = w
            material_out[k] = m - w
        return KpiReport(from_tick, to_tick, energy, material_in, material_out, waste)
