"""Soft-PLC: scan determinism, mission FSM, interlock, scan purity."""

import itertools

import pytest

from twinline import tagnames
from twinline.config import FactoryConfig
from twinline.factory import PalletState, actuate, build_factory, tick
from twinline.plc import (
    MissionKind,
    Origin,
    Plc,
    PlcMissionState,
    RejectReason,
    UnknownMission,
    UnknownStation,
)
from twinline.plc.plc import LogicState, scan_cycle


class Rig:
    """Factory wired to a PLC the way the stack wires them: sensors in after
    the tick, actuator image out before the next tick."""

    def __init__(self, **cfg_kw):
        self.config = FactoryConfig(**cfg_kw)
        self.state = build_factory(self.config)
        self.plc = Plc(self.config)
        self.plc.ingest_sensors(self.state.sensors, 0)

    def step(self, n=1):
        for _ in range(n):
            self.state, events = tick(self.state)
            self.plc.ingest_sensors(self.state.sensors, self.state.tick_index)
            self.plc.ingest_ledger(self.state.ledger, self.state.tick_index)
            log = self.plc.scan(self.state.tick_index)
            for point in sorted(log.outputs):
                self.state = actuate(self.state, point, log.outputs[point])
        return log

    def block_pallet_at(self, station, pallet_index=0):
        dock = self.state.geometry.dock_stop_pos[station]
        p = self.state.pallets[pallet_index]
        p.ring_pos = (dock - 2 * self.config.step_mm) % self.state.geometry.ring_length
        p.state = PalletState.MOVING
        self.step(4)
        assert self.state.pallets[pallet_index].state is PalletState.BLOCKED_AT_DOCK
        return self.state.pallets[pallet_index]


def test_default_hold_no_mission():
    rig = Rig(pallet_count=1)
    rig.block_pallet_at(1)
    for _ in range(20):
        log = rig.step()
        assert log.outputs[tagnames.stop(1)] is True
    assert rig.state.pallets[0].state is PalletState.BLOCKED_AT_DOCK


def test_pass_window_exact():
    rig = Rig(pallet_count=1)
    rig.block_pallet_at(3)
    out = rig.plc.submit_mission(MissionKind.pass_docking(3), Origin.HMI)
    assert out.accepted
    window = 0
    for _ in range(200):
        log = rig.step()
        if log.outputs[tagnames.stop(3)] is False:
            window += 1
        elif window:
            break
    expected = rig.config.pallet_length // rig.config.step_mm + 1
    assert window == expected
    assert rig.plc.mission_status(out.mission_id) is PlcMissionState.COMPLETED


def test_scan_cycle_is_deterministic():
    logic = LogicState(station_count=6)
    inputs = {tagnames.pallet_a(1): True, tagnames.QUEUE_SENSOR: True}
    a = scan_cycle(inputs, logic, [], {}, 5)
    b = scan_cycle(inputs, logic, [], {}, 5)
    assert a[0] == b[0]
    assert a[1] == b[1]


def test_submit_matrix():
    for origin, pallet, mat, busy in itertools.product(
        (Origin.HMI, Origin.PLATFORM, Origin.TWIN),
        (True, False),
        (True, False),
        (True, False),
    ):
        rig = Rig(pallet_count=1)
        if pallet:
            rig.block_pallet_at(2)
        if mat:
            rig.plc.set_interlock(2, True)
        if busy and pallet and not (mat and origin is not Origin.HMI):
            first = rig.plc.submit_mission(MissionKind.pass_docking(2), origin)
            assert first.accepted
        elif busy:
            continue  # busy requires an accepted prior mission
        out = rig.plc.submit_mission(MissionKind.pass_docking(2), origin)
        should_accept = pallet and not busy and not (mat and origin.remote)
        assert out.accepted == should_accept, (origin, pallet, mat, busy)
        if not should_accept:
            allowed = set()
            if busy:
                allowed.add(RejectReason.STATION_BUSY)
            if not pallet:
                allowed.add(RejectReason.NO_PALLET)
            if mat and origin.remote:
                allowed.add(RejectReason.INTERLOCK_ENGAGED)
            assert out.reason in allowed


def test_submit_examples():
    rig = Rig(pallet_count=1)
    rig.block_pallet_at(2)
    out = rig.plc.submit_mission(MissionKind.pass_docking(2), Origin.PLATFORM)
    assert out.accepted  # pallet blocked, idle, no operator

    rig2 = Rig(pallet_count=1)
    rig2.block_pallet_at(2)
    rig2.plc.set_interlock(2, True)
    out = rig2.plc.submit_mission(MissionKind.pass_docking(2), Origin.TWIN)
    assert not out.accepted and out.reason is RejectReason.INTERLOCK_ENGAGED

    rig3 = Rig(pallet_count=1)
    rig3.block_pallet_at(2)
    rig3.plc.submit_mission(MissionKind.pass_docking(2), Origin.HMI)
    out = rig3.plc.submit_mission(MissionKind.pass_docking(2), Origin.HMI)
    assert not out.accepted and out.reason is RejectReason.STATION_BUSY

    out = rig3.plc.submit_mission(MissionKind.pass_docking(99), Origin.HMI)
    assert not out.accepted and out.reason is RejectReason.UNKNOWN_STATION


def test_mission_status_lifecycle():
    rig = Rig(pallet_count=1)
    rig.block_pallet_at(2)
    out = rig.plc.submit_mission(MissionKind.pass_docking(2), Origin.HMI)
    assert rig.plc.mission_status(out.mission_id) is PlcMissionState.VALIDATED
    seen = [PlcMissionState.VALIDATED]
    for _ in range(200):
        rig.step()
        s = rig.plc.mission_status(out.mission_id)
        if s is not seen[-1]:
            seen.append(s)
        if s is PlcMissionState.COMPLETED:
            break
    assert seen == [
        PlcMissionState.VALIDATED,
        PlcMissionState.EXECUTING,
        PlcMissionState.COMPLETED,
    ]
    with pytest.raises(UnknownMission):
        rig.plc.mission_status(0)


def test_interlock_fails_remote_mission_within_one_scan():
    rig = Rig(pallet_count=1)
    rig.block_pallet_at(4)
    out = rig.plc.submit_mission(MissionKind.pass_docking(4), Origin.TWIN)
    rig.step(2)
    assert rig.plc.mission_status(out.mission_id) is PlcMissionState.EXECUTING
    rig.plc.set_interlock(4, True)
    log = rig.step()
    assert rig.plc.mission_status(out.mission_id) is PlcMissionState.FAILED
    assert rig.plc.mission_record(out.mission_id).fail_reason == "InterlockEngaged"
    assert log.outputs[tagnames.stop(4)] is True

    rig.plc.set_interlock(4, False)
    rig.step(2)
    if rig.state.pallets[0].state is PalletState.BLOCKED_AT_DOCK:
        out2 = rig.plc.submit_mission(MissionKind.pass_docking(4), Origin.TWIN)
        assert out2.accepted

    with pytest.raises(UnknownStation):
        rig.plc.set_interlock(99, True)


def test_interlock_spares_local_hmi_mission():
    rig = Rig(pallet_count=1)
    rig.block_pallet_at(4)
    out = rig.plc.submit_mission(MissionKind.pass_docking(4), Origin.HMI)
    rig.step(2)
    rig.plc.set_interlock(4, True)
    rig.step()
    assert rig.plc.mission_status(out.mission_id) is PlcMissionState.EXECUTING


def test_elevator_mission_round_trip():
    rig = Rig(pallet_count=1)
    pallet = rig.block_pallet_at(2)
    up = rig.plc.submit_mission(MissionKind.elevator(2, up=True), Origin.HMI)
    assert up.accepted
    for _ in range(20):
        rig.step()
        if rig.plc.mission_status(up.mission_id) is PlcMissionState.COMPLETED:
            break
    assert rig.plc.mission_status(up.mission_id) is PlcMissionState.COMPLETED
    assert pallet.state is PalletState.AT_STATION
    assert rig.state.sensors[tagnames.elev_b(2)] is True

    down = rig.plc.submit_mission(MissionKind.elevator(2, up=False), Origin.HMI)
    assert down.accepted
    for _ in range(20):
        rig.step()
        if rig.plc.mission_status(down.mission_id) is PlcMissionState.COMPLETED:
            break
    assert rig.plc.mission_status(down.mission_id) is PlcMissionState.COMPLETED
    assert pallet.state is PalletState.BLOCKED_AT_DOCK


def test_scan_purity_replay():
    rig = Rig(pallet_count=2)
    rig.block_pallet_at(1)
    rig.plc.submit_mission(MissionKind.pass_docking(1), Origin.HMI)
    # capture the logic state right after submission, before any scan uses it
    chain_logic = rig.plc.logic.copy()
    rig.plc.enqueue_write(tagnames.stop(5), False, remote=True, label="test")
    logs = [rig.step() for _ in range(60)]

    replay = chain_logic
    prev_out: dict = {}
    start = len(rig.plc.scan_logs) - len(logs)
    if start > 0:
        prev_out = dict(rig.plc.scan_logs[start - 1].outputs)
    for log in logs:
        out, replay, _ = scan_cycle(log.inputs, replay, log.commands, prev_out, log.tick)
        assert out == log.outputs
        prev_out = out


def test_stale_inputs_poison_dependent_outputs():
    from twinline.plc.tags import Quality

    rig = Rig(pallet_count=0)
    rig.step()
    assert rig.plc.table.get(tagnames.stop(2)).quality is Quality.GOOD
    rig.plc.table.mark_stale(tagnames.pallet_a(2))
    log = rig.plc.scan(rig.state.tick_index)
    assert log.output_quality[tagnames.stop(2)] is Quality.STALE
    assert rig.plc.table.get(tagnames.stop(2)).quality is Quality.STALE
    # unrelated stations stay good
    assert log.output_quality[tagnames.stop(3)] is Quality.GOOD


def test_forward_only_fsm_in_transition_log():
    rig = Rig(pallet_count=2)
    rig.block_pallet_at(1)
    rig.plc.submit_mission(MissionKind.pass_docking(1), Origin.HMI)
    rig.step(60)
    per_mission: dict[int, list] = {}
    for _, mid, _, state, _ in rig.plc.transition_log:
        per_mission.setdefault(mid, []).append(state)
    legal = [
        [PlcMissionState.VALIDATED],
        [PlcMissionState.VALIDATED, PlcMissionState.EXECUTING],
        [PlcMissionState.VALIDATED, PlcMissionState.EXECUTING, PlcMissionState.COMPLETED],
        [PlcMissionState.VALIDATED, PlcMissionState.EXECUTING, PlcMissionState.FAILED],
        [PlcMissionState.VALIDATED, PlcMissionState.FAILED],
    ]
    for seq in per_mission.values():
        assert seq in legal
