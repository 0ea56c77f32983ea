"""The tag naming convention shared bit-exactly by every layer.

Per station k (1-based):
  sensors   ST<k>.PALLET_A  ST<k>.PALLET_B  ST<k>.ELEV_A  ST<k>.ELEV_B  (BOOL)
            ST<k>.RFID                                                  (STRING)
  actuators ST<k>.STOP      ST<k>.ELEV_CMD                              (BOOL)

System points:
  SYS.QUEUE_SENSOR (BOOL sensor)   SYS.QUEUE_STOP (BOOL actuator)
  SYS.OPERATOR_MAT_<k> (BOOL)      safety-mat input per station

Device-layer extras (not part of the 7-per-station convention):
  SYS.MISSION_REQ (STRING, writable request point)
  SYS.MISSION_ST<k> (STRING "id:state" per station)
  SYS.CONF_* (static configuration), SYS.ENERGY_*/SYS.MAT_*/SYS.WASTE_* (ledger)
"""

from __future__ import annotations


def pallet_a(k: int) -> str:
    return f"ST{k}.PALLET_A"


def pallet_b(k: int) -> str:
    return f"ST{k}.PALLET_B"


def elev_a(k: int) -> str:
    return f"ST{k}.ELEV_A"


def elev_b(k: int) -> str:
    return f"ST{k}.ELEV_B"


def rfid(k: int) -> str:
    return f"ST{k}.RFID"


def stop(k: int) -> str:
    return f"ST{k}.STOP"


def elev_cmd(k: int) -> str:
    return f"ST{k}.ELEV_CMD"


def mission_status(k: int) -> str:
    return f"SYS.MISSION_ST{k}"


def operator_mat(k: int) -> str:
    return f"SYS.OPERATOR_MAT_{k}"


QUEUE_SENSOR = "SYS.QUEUE_SENSOR"
QUEUE_STOP = "SYS.QUEUE_STOP"
MISSION_REQ = "SYS.MISSION_REQ"

CONF_STATIONS = "SYS.CONF_STATIONS"
CONF_SPEED = "SYS.CONF_SPEED"
CONF_TICK_MS = "SYS.CONF_TICK_MS"
CONF_PALLET_LEN = "SYS.CONF_PALLET_LEN"
CONF_PALLET_COUNT = "SYS.CONF_PALLET_COUNT"
CONF_SEGMENTS = "SYS.CONF_SEGMENTS"
CONF_DWELL_TICKS = "SYS.CONF_DWELL_TICKS"


def energy(device: str) -> str:
    return f"SYS.ENERGY_{device}"


def material(k: int) -> str:
    return f"SYS.MAT_{k}"


def waste(k: int) -> str:
    return f"SYS.WASTE_{k}"


def station_of(tag: str) -> int | None:
    """Station number of an ST<k>.* tag or SYS.OPERATOR_MAT_<k>, else None."""
    if tag.startswith("ST"):
        head = tag.split(".", 1)[0]
        digits = head[2:]
        if digits.isdigit():
            return int(digits)
    if tag.startswith("SYS.OPERATOR_MAT_"):
        digits = tag[len("SYS.OPERATOR_MAT_"):]
        if digits.isdigit():
            return int(digits)
    return None


def station_sensor_names(k: int) -> list[str]:
    return [pallet_a(k), pallet_b(k), elev_a(k), elev_b(k), rfid(k)]


def station_actuator_names(k: int) -> list[str]:
    return [stop(k), elev_cmd(k)]


def station_names(k: int) -> list[str]:
    """The 7 convention points of one station."""
    return station_sensor_names(k) + station_actuator_names(k)
