"""Ring layout of the line, derived once from the config.

The conveyor is a closed loop measured in integer millimeters:

    [infeed/queue segment] [station 1] ... [station N] [AMR/buffer segment]

The queue stop sits at the end of the infeed segment; each docking stop sits
at the end of its station segment, with the RFID reader and the at-stop pallet
sensor at the stop position and the approach sensor a fixed distance upstream.
The pass-through segment carries a dwell point mid-segment where every pallet
holds for the configured AMR/buffer handling time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..config import FactoryConfig


@dataclass
class Geometry:
    config: FactoryConfig
    segment_starts: list[int] = field(init=False)
    ring_length: int = field(init=False)
    queue_stop_pos: int = field(init=False)
    dock_stop_pos: dict[int, int] = field(init=False)     # station -> ring mm
    approach_pos: dict[int, int] = field(init=False)
    dwell_pos: int = field(init=False)
    # kernel stop table: queue stop first, then docks in station order
    stop_positions: list[int] = field(init=False)

    def __post_init__(self):
        cfg = self.config
        starts, acc = [], 0
        for length in cfg.segment_lengths:
            starts.append(acc)
            acc += length
        self.segment_starts = starts
        self.ring_length = acc
        self.queue_stop_pos = starts[0] + cfg.segment_lengths[0]
        self.dock_stop_pos = {
            k: starts[k] + cfg.segment_lengths[k]
            for k in range(1, cfg.station_count + 1)
        }
        self.approach_pos = {
            k: (pos - cfg.approach_offset) % self.ring_length
            for k, pos in self.dock_stop_pos.items()
        }
        amr_index = cfg.station_count + 1
        self.dwell_pos = starts[amr_index] + cfg.segment_lengths[amr_index] // 2
        self.stop_positions = [self.queue_stop_pos % self.ring_length] + [
            self.dock_stop_pos[k] % self.ring_length
            for k in range(1, cfg.station_count + 1)
        ]

    def stop_index_for_station(self, station: int) -> int:
        return station  # 0 is the queue stop

    def locate(self, ring_pos: int) -> tuple[int, int]:
        """Map a ring position (pallet head) to (segment_index, offset)."""
        pos = ring_pos % self.ring_length
        for i in range(len(self.segment_starts) - 1, -1, -1):
            if pos >= self.segment_starts[i]:
                return i, pos - self.segment_starts[i]
        return 0, pos

    def covers(self, head: int, point: int) -> bool:
        """True if a pallet with the given head occupies the ring point."""
        tail = (head - self.config.pallet_length) % self.ring_length
        return (point - tail) % self.ring_length <= self.config.pallet_length

    def start_positions(self) -> list[int]:
        """Deterministic, evenly spaced pallet head start offsets."""
        n = self.config.pallet_count
        if n == 0:
            return []
        spacing = self.ring_length // n
        return [(self.config.pallet_length + i * spacing) % self.ring_length for i in range(n)]
