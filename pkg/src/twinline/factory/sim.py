"""Factory operations: build, tick, actuate, RFID read, ledger snapshot.

One tick, in order: release pallets whose stop disengaged, step the elevators,
advance pallet motion (kernel), account material/waste for completed passes,
accumulate energy, recompute sensors and emit change events sorted by point
name. Identical input state always yields identical output; there is no
randomness anywhere in this module.
"""

from __future__ import annotations

from .. import tagnames
from ..config import FactoryConfig
from . import kernel
from .geometry import Geometry
from .state import (
    DockingStation,
    ElevatorPosition,
    FactoryState,
    FlowLedger,
    Pallet,
    PalletState,
    QueueStop,
    SensorEvent,
)

ON_CONVEYOR = (PalletState.MOVING, PalletState.BLOCKED_AT_DOCK, PalletState.QUEUE_HELD)


class UnknownPoint(KeyError):
    pass


class NotAnActuator(ValueError):
    pass


class UnknownReader(KeyError):
    pass


def device_names(config: FactoryConfig) -> list[str]:
    names = [f"CONV{i}" for i in range(len(config.segment_lengths))]
    names += [f"STOP{k}" for k in range(1, config.station_count + 1)]
    names.append("QSTOP")
    names += [f"ELEV{k}" for k in range(1, config.station_count + 1)]
    return names


def build_factory(config: FactoryConfig) -> FactoryState:
    config.validate()
    geo = Geometry(config)
    pallets = [
        Pallet(rfid=f"P-{i + 1:03d}", ring_pos=pos)
        for i, pos in enumerate(geo.start_positions())
    ]
    stations = {k: DockingStation(station_id=k) for k in range(1, config.station_count + 1)}
    ledger = FlowLedger(
        energy_uj={d: 0 for d in device_names(config)},
        material_units={k: 0 for k in stations},
        waste_units={k: 0 for k in stations},
    )
    state = FactoryState(
        config=config,
        geometry=geo,
        pallets=pallets,
        stations=stations,
        queue_stop=QueueStop(),
        ledger=ledger,
        sensors={},
    )
    state.sensors = _compute_sensors(state)
    return state


def tick(state: FactoryState) -> tuple[FactoryState, list[SensorEvent]]:
    _release(state)
    _step_elevators(state)
    moves = _advance_motion(state)
    _account_passes(state, moves)
    _account_energy(state)

    new_sensors = _compute_sensors(state)
    events = [
        SensorEvent(state.tick_index, name, new_sensors[name])
        for name in sorted(new_sensors)
        if new_sensors[name] != state.sensors.get(name)
    ]
    state.sensors = new_sensors
    state.tick_index += 1
    return state, events


def actuate(state: FactoryState, point_name: str, value) -> FactoryState:
    k = tagnames.station_of(point_name)
    if point_name == tagnames.QUEUE_STOP:
        state.queue_stop.engaged = bool(value)
        return state
    if k is not None and k in state.stations:
        suffix = point_name.split(".", 1)[1] if "." in point_name else ""
        if suffix == "STOP":
            state.stations[k].stop_engaged = bool(value)
            return state
        if suffix == "ELEV_CMD":
            state.stations[k].elevator_cmd_up = bool(value)
            return state
        if suffix in ("PALLET_A", "PALLET_B", "ELEV_A", "ELEV_B", "RFID"):
            raise NotAnActuator(point_name)
    if point_name in state.sensors or point_name == tagnames.QUEUE_SENSOR:
        raise NotAnActuator(point_name)
    raise UnknownPoint(point_name)


def rfid_read(state: FactoryState, reader_id: str) -> str | None:
    if not reader_id.startswith("R-"):
        raise UnknownReader(reader_id)
    try:
        k = int(reader_id[2:])
    except ValueError:
        raise UnknownReader(reader_id) from None
    if k not in state.stations:
        raise UnknownReader(reader_id)
    value = state.sensors.get(tagnames.rfid(k), "")
    return value or None


def snapshot_ledger(state: FactoryState) -> FlowLedger:
    return state.ledger.copy()


# --- tick phases -----------------------------------------------------------


def _release(state: FactoryState) -> None:
    geo = state.geometry
    for p in state.pallets:
        if p.state is PalletState.BLOCKED_AT_DOCK:
            st = state.stations[p.station]
            if st.elevator_position is not ElevatorPosition.DOWN:
                continue  # the platform is away: the lane is broken here
            at_approach = p.ring_pos == geo.approach_pos[p.station] % geo.ring_length
            if at_approach or (not st.stop_engaged and st.elevator_pallet is None):
                p.state = PalletState.MOVING
                p.station = None
        elif p.state is PalletState.QUEUE_HELD and not state.queue_stop.engaged:
            p.state = PalletState.MOVING


def _dock_position_free(state: FactoryState, k: int, exclude: int | None) -> bool:
    pos = state.geometry.dock_stop_pos[k] % state.geometry.ring_length
    for i, p in enumerate(state.pallets):
        if i == exclude or p.state not in ON_CONVEYOR:
            continue
        if state.geometry.covers(p.ring_pos, pos):
            return False
    return True


def _step_elevators(state: FactoryState) -> None:
    cfg = state.config
    for k in sorted(state.stations):
        st = state.stations[k]
        if st.elevator_position is ElevatorPosition.MOVING:
            st.elevator_ticks_remaining -= 1
            if st.elevator_ticks_remaining <= 0:
                arrived_up = st.elevator_cmd_up
                st.elevator_position = (
                    ElevatorPosition.UP if arrived_up else ElevatorPosition.DOWN
                )
                if st.elevator_pallet is not None:
                    pallet = state.pallets[st.elevator_pallet]
                    if arrived_up:
                        pallet.state = PalletState.AT_STATION
                    else:
                        pallet.state = PalletState.BLOCKED_AT_DOCK
                        st.elevator_pallet = None
        elif st.elevator_position is ElevatorPosition.DOWN and st.elevator_cmd_up:
            st.elevator_position = ElevatorPosition.MOVING
            st.elevator_ticks_remaining = cfg.elevator_travel_ticks
            dock = state.geometry.dock_stop_pos[k] % state.geometry.ring_length
            for i, p in enumerate(state.pallets):
                # only the pallet standing on the platform rides it, not one
                # held at the upstream approach point
                if (
                    p.state is PalletState.BLOCKED_AT_DOCK
                    and p.station == k
                    and p.ring_pos == dock
                ):
                    p.state = PalletState.IN_ELEVATOR
                    st.elevator_pallet = i
                    break
        elif st.elevator_position is ElevatorPosition.UP and not st.elevator_cmd_up:
            # the platform needs the dock spot; wait until no pallet covers it
            if _dock_position_free(state, k, st.elevator_pallet):
                st.elevator_position = ElevatorPosition.MOVING
                st.elevator_ticks_remaining = cfg.elevator_travel_ticks


def _advance_motion(state: FactoryState) -> dict[int, tuple[int, int]]:
    """Run the kernel over conveyor-level pallets.

    Returns ``{pallet_index: (old_head, unwrapped_advance)}`` for pallets that
    moved, which pass accounting consumes.
    """
    cfg = state.config
    geo = state.geometry
    idx = [i for i, p in enumerate(state.pallets) if p.state in ON_CONVEYOR]
    if not idx:
        return {}
    pos = [state.pallets[i].ring_pos for i in idx]
    movable = [1 if state.pallets[i].state is PalletState.MOVING else 0 for i in idx]
    hold = [state.pallets[i].hold_ticks for i in idx]
    # a raised platform breaks the lane: the dock holds arrivals at the
    # upstream approach point so the footprint stays clear for the descent
    stop_positions = [geo.queue_stop_pos % geo.ring_length]
    engaged = [1 if state.queue_stop.engaged else 0]
    for k in range(1, cfg.station_count + 1):
        st = state.stations[k]
        if st.elevator_position is ElevatorPosition.DOWN:
            stop_positions.append(geo.dock_stop_pos[k] % geo.ring_length)
            engaged.append(1 if st.stop_engaged else 0)
        else:
            stop_positions.append(geo.approach_pos[k] % geo.ring_length)
            engaged.append(1)
    new_pos, blocked = kernel.advance(
        pos,
        movable,
        hold,
        cfg.step_mm,
        stop_positions,
        engaged,
        geo.dwell_pos,
        cfg.amr_dwell_ticks,
        cfg.pallet_length,
        cfg.min_gap,
        geo.ring_length,
    )
    moves: dict[int, tuple[int, int]] = {}
    for j, i in enumerate(idx):
        p = state.pallets[i]
        advance = new_pos[j] - pos[j]
        if advance > 0:
            moves[i] = (pos[j], advance)
            p.ring_pos = new_pos[j] % geo.ring_length
        p.hold_ticks = hold[j]
        if blocked[j] == 0:
            p.state = PalletState.QUEUE_HELD
        elif blocked[j] > 0:
            p.state = PalletState.BLOCKED_AT_DOCK
            p.station = blocked[j]
    return moves


def _account_passes(state: FactoryState, moves: dict[int, tuple[int, int]]) -> None:
    cfg = state.config
    geo = state.geometry
    ring = geo.ring_length
    for old_head, moved in moves.values():
        old_tail = (old_head - cfg.pallet_length) % ring
        for k, dock in geo.dock_stop_pos.items():
            delta = (dock % ring - old_tail) % ring
            if delta < moved:
                state.ledger.material_units[k] += cfg.material_per_pass
                state.ledger.waste_units[k] += cfg.waste_per_pass


def _account_energy(state: FactoryState) -> None:
    cfg = state.config
    em = cfg.energy
    geo = state.geometry
    tick_ms = cfg.tick_duration
    seg_moving = set()
    for p in state.pallets:
        if p.state is PalletState.MOVING:
            seg_moving.add(geo.locate(p.ring_pos)[0])
    add = state.ledger.energy_uj
    for i in range(len(cfg.segment_lengths)):
        w = em.conveyor_active_w if i in seg_moving else em.conveyor_idle_w
        add[f"CONV{i}"] += w * tick_ms * 1000
    for k, st in state.stations.items():
        w = em.stop_idle_w if st.stop_engaged else em.stop_active_w
        add[f"STOP{k}"] += w * tick_ms * 1000
        w = (
            em.elevator_active_w
            if st.elevator_position is ElevatorPosition.MOVING
            else em.elevator_idle_w
        )
        add[f"ELEV{k}"] += w * tick_ms * 1000
    w = em.stop_idle_w if state.queue_stop.engaged else em.stop_active_w
    add["QSTOP"] += w * tick_ms * 1000


def _compute_sensors(state: FactoryState) -> dict[str, bool | str]:
    geo = state.geometry
    cfg = state.config
    ring = geo.ring_length
    heads = [
        (p.ring_pos, p.rfid)
        for p in state.pallets
        if p.state in ON_CONVEYOR
    ]

    def covered(point: int) -> bool:
        point %= ring
        return any(geo.covers(h, point) for h, _ in heads)

    def rfid_at(point: int) -> str:
        point %= ring
        for h, r in heads:
            if geo.covers(h, point):
                return r
        return ""

    out: dict[str, bool | str] = {}
    for k in range(1, cfg.station_count + 1):
        st = state.stations[k]
        dock = geo.dock_stop_pos[k]
        out[tagnames.pallet_a(k)] = covered(dock)
        out[tagnames.pallet_b(k)] = covered(geo.approach_pos[k])
        out[tagnames.elev_a(k)] = st.elevator_position is ElevatorPosition.DOWN
        out[tagnames.elev_b(k)] = st.elevator_position is ElevatorPosition.UP
        out[tagnames.rfid(k)] = rfid_at(dock)
    out[tagnames.QUEUE_SENSOR] = covered(geo.queue_stop_pos)
    return out


def actuator_names(config: FactoryConfig) -> list[str]:
    names = []
    for k in range(1, config.station_count + 1):
        names += [tagnames.stop(k), tagnames.elev_cmd(k)]
    names.append(tagnames.QUEUE_STOP)
    return names


def actuator_values(state: FactoryState) -> dict[str, bool]:
    out = {}
    for k, st in state.stations.items():
        out[tagnames.stop(k)] = st.stop_engaged
        out[tagnames.elev_cmd(k)] = st.elevator_cmd_up
    out[tagnames.QUEUE_STOP] = state.queue_stop.engaged
    return out
