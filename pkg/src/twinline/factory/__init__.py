from .geometry import Geometry
from .state import (
    DockingStation,
    FactoryState,
    FlowLedger,
    Pallet,
    PalletState,
    QueueStop,
    SensorEvent,
)
from .sim import (
    NotAnActuator,
    UnknownPoint,
    UnknownReader,
    actuate,
    build_factory,
    rfid_read,
    snapshot_ledger,
    tick,
)

__all__ = [
    "Geometry",
    "FactoryState",
    "FlowLedger",
    "Pallet",
    "PalletState",
    "DockingStation",
    "QueueStop",
    "SensorEvent",
    "build_factory",
    "tick",
    "actuate",
    "rfid_read",
    "snapshot_ledger",
    "UnknownPoint",
    "NotAnActuator",
    "UnknownReader",
]
