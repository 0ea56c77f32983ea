"""World state of the simulated line."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from ..config import FactoryConfig
from .geometry import Geometry


class PalletState(enum.Enum):
    MOVING = "Moving"
    BLOCKED_AT_DOCK = "BlockedAtDock"
    IN_ELEVATOR = "InElevator"
    AT_STATION = "AtStation"
    QUEUE_HELD = "QueueHeld"


class ElevatorPosition(enum.Enum):
    DOWN = "Down"
    MOVING = "Moving"
    UP = "Up"


@dataclass
class Pallet:
    rfid: str
    ring_pos: int                       # head position, mm on the ring
    state: PalletState = PalletState.MOVING
    hold_ticks: int = 0                 # dwell remaining at the AMR point
    station: int | None = None          # set while blocked/elevated at a dock

    def segment_offset(self, geo: Geometry) -> tuple[int, int]:
        return geo.locate(self.ring_pos)


@dataclass
class DockingStation:
    station_id: int
    stop_engaged: bool = True
    elevator_cmd_up: bool = False
    elevator_position: ElevatorPosition = ElevatorPosition.DOWN
    elevator_ticks_remaining: int = 0
    elevator_pallet: int | None = None  # pallet index riding the elevator


@dataclass
class QueueStop:
    engaged: bool = True
    capacity: int = 1


@dataclass
class FlowLedger:
    """Accumulated process flows; all entries monotonically nondecreasing."""

    energy_uj: dict[str, int] = field(default_factory=dict)
    material_units: dict[int, int] = field(default_factory=dict)
    waste_units: dict[int, int] = field(default_factory=dict)

    def copy(self) -> "FlowLedger":
        return FlowLedger(
            dict(self.energy_uj), dict(self.material_units), dict(self.waste_units)
        )

    def total_energy_uj(self) -> int:
        return sum(self.energy_uj.values())


@dataclass
class SensorEvent:
    tick: int
    point_name: str
    new_value: bool | int | str


@dataclass
class FactoryState:
    config: FactoryConfig
    geometry: Geometry
    pallets: list[Pallet]
    stations: dict[int, DockingStation]
    queue_stop: QueueStop
    ledger: FlowLedger
    sensors: dict[str, bool | str]      # last computed sensor values
    tick_index: int = 0

    def clone(self) -> "FactoryState":
        return FactoryState(
            config=self.config,
            geometry=self.geometry,
            pallets=[replace(p) for p in self.pallets],
            stations={k: replace(s) for k, s in self.stations.items()},
            queue_stop=replace(self.queue_stop),
            ledger=self.ledger.copy(),
            sensors=dict(self.sensors),
            tick_index=self.tick_index,
        )
