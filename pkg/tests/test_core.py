"""Twin core units: thing model, telemetry, estimator arithmetic, KPIs."""

import pytest

from twinline.config import FactoryConfig
from twinline.core import (
    DuplicateThingId,
    KpiStore,
    PalletEstimator,
    SyncMetrics,
    ThingRegistry,
    ThingShape,
    ThingTemplate,
    UnboundTag,
    UnknownTemplate,
    apply_telemetry,
)
from twinline.core.model import EventDecl, PropertyDecl
from twinline.plc.tags import TagType


def station_template():
    shape = ThingShape(
        "dock",
        properties=[
            PropertyDecl("PALLET_A", TagType.BOOL),
            PropertyDecl("RFID", TagType.STRING),
        ],
        events=[
            EventDecl("PalletArrived", "PALLET_A", "rising"),
            EventDecl("PalletDeparted", "PALLET_A", "falling"),
        ],
    )
    return ThingTemplate("station", [shape])


class TestThingModel:
    def test_two_things_same_declarations_independent_values(self):
        reg = ThingRegistry(known_tags={"DT/ST1.PALLET_A", "DT/ST2.PALLET_A"})
        reg.register_template(station_template())
        t1 = reg.instantiate("station", "ST1", {"PALLET_A": "DT/ST1.PALLET_A"})
        t2 = reg.instantiate("station", "ST2", {"PALLET_A": "DT/ST2.PALLET_A"})
        assert t1.declarations.keys() == t2.declarations.keys()
        t1.apply_bound_update("PALLET_A", True, 5)
        assert t1.properties["PALLET_A"].value is True
        assert t2.properties["PALLET_A"].value is False

    def test_colliding_shape_properties_rejected_at_registration(self):
        a = ThingShape("a", [PropertyDecl("X", TagType.BOOL)])
        b = ThingShape("b", [PropertyDecl("X", TagType.BOOL)])
        reg = ThingRegistry()
        with pytest.raises(ValueError, match="collides"):
            reg.register_template(ThingTemplate("bad", [a, b]))

    def test_binding_to_unmapped_tag(self):
        reg = ThingRegistry(known_tags={"DT/ST1.PALLET_A"})
        reg.register_template(station_template())
        with pytest.raises(UnboundTag):
            reg.instantiate("station", "S", {"PALLET_A": "DT/NOPE"})

    def test_unknown_template_and_duplicate_id(self):
        reg = ThingRegistry()
        reg.register_template(station_template())
        with pytest.raises(UnknownTemplate):
            reg.instantiate("nope", "X", {})
        reg.instantiate("station", "X", {})
        with pytest.raises(DuplicateThingId):
            reg.instantiate("station", "X", {})


class TestApplyTelemetry:
    def make(self):
        reg = ThingRegistry(known_tags={"DT/ST2.PALLET_A"})
        reg.register_template(station_template())
        reg.instantiate("station", "ST2", {"PALLET_A": "DT/ST2.PALLET_A"})
        return reg, SyncMetrics()

    def test_rising_edge_fires_event(self):
        reg, metrics = self.make()
        fired = apply_telemetry(
            reg, {"ts": "100"}, [("DT/ST2.PALLET_A", TagType.BOOL, True)], 120, metrics
        )
        assert [e.name for e in fired] == ["PalletArrived"]
        assert fired[0].thing_id == "ST2"
        assert metrics.telemetry_latency.total == 1
        assert metrics.telemetry_latency.sum == 20

    def test_identical_value_no_event(self):
        reg, metrics = self.make()
        apply_telemetry(reg, {"ts": "100"}, [("DT/ST2.PALLET_A", TagType.BOOL, True)], 120, metrics)
        fired = apply_telemetry(
            reg, {"ts": "150"}, [("DT/ST2.PALLET_A", TagType.BOOL, True)], 170, metrics
        )
        assert fired == []

    def test_partial_apply_counts_unknown(self):
        reg, metrics = self.make()
        fired = apply_telemetry(
            reg,
            {"ts": "100"},
            [
                ("DT/NOPE", TagType.BOOL, True),
                ("DT/ST2.PALLET_A", TagType.BOOL, True),
            ],
            130,
            metrics,
        )
        assert [e.name for e in fired] == ["PalletArrived"]
        assert metrics.counters["unknown_tags"] == 1
        assert metrics.counters["applied_tags"] == 1


class TestEstimator:
    def make(self):
        cfg = FactoryConfig(pallet_count=1)
        return PalletEstimator(cfg), cfg

    def test_dead_reckon_past_checkpoint(self):
        est, cfg = self.make()
        dock1 = est.geometry.dock_stop_pos[1]
        # stop 1 released, pallet checkpointed at the reader at t=1000
        est.on_stop_state(1, False, source_ts=1000, receipt_ts=1000)
        est.on_rfid(1, "P-001", source_ts=1000, receipt_ts=1000)
        (e,) = est.estimate(1500)  # 500 ms at 100 mm/s -> 50 mm past the reader
        assert e.ring_pos == (dock1 + 50) % est.geometry.ring_length
        assert e.basis == "DeadReckoned"

    def test_blocked_pallet_pinned_regardless_of_elapsed(self):
        est, cfg = self.make()
        dock2 = est.geometry.dock_stop_pos[2] % est.geometry.ring_length
        est.on_rfid(2, "P-001", source_ts=1000, receipt_ts=1000)
        (e,) = est.estimate(60000)  # stop believed engaged: stays clamped
        assert e.ring_pos == dock2
        assert e.basis == "RfidCheckpoint"

    def test_staleness_zero_at_checkpoint(self):
        est, cfg = self.make()
        est.on_rfid(3, "P-001", source_ts=2000, receipt_ts=2040)
        (e,) = est.estimate(2040)
        assert e.staleness_ms == 0
        assert e.basis == "RfidCheckpoint"

    def test_never_seen_pallet_unbounded_staleness(self):
        est, cfg = self.make()
        (e,) = est.estimate(5000)
        assert e.staleness_ms is None
        assert e.basis == "DeadReckoned"

    def test_departure_reanchors_at_tail_clear(self):
        est, cfg = self.make()
        dock1 = est.geometry.dock_stop_pos[1]
        est.on_stop_state(1, False, source_ts=0, receipt_ts=0)
        est.on_rfid(1, "P-001", source_ts=1000, receipt_ts=1000)
        est.on_rfid(1, "", source_ts=3000, receipt_ts=3000)
        (e,) = est.estimate(3000)
        assert e.ring_pos == (dock1 + cfg.pallet_length) % est.geometry.ring_length


class TestKpi:
    def test_empty_window_zero(self):
        store = KpiStore()
        report = store.report(10, 10, stations=2)
        assert all(v == 0 for v in report.material_in.values())

    def test_adjacent_windows_sum_to_span(self):
        store = KpiStore()
        tag = "DT/SYS.MAT_1"
        for tick, value in [(0, 0), (5, 3), (10, 7), (15, 12)]:
            store.record(tag, tick, value)
        a = store.delta(tag, 0, 5)
        b = store.delta(tag, 5, 15)
        assert a + b == store.delta(tag, 0, 15)

    def test_value_at_between_points(self):
        store = KpiStore()
        store.record("x", 5, 10)
        store.record("x", 9, 30)
        assert store.value_at("x", 4) == 0
        assert store.value_at("x", 5) == 10
        assert store.value_at("x", 7) == 10
        assert store.value_at("x", 9) == 30
        assert store.value_at("x", 100) == 30

    def test_report_serializes_in_documented_format(self):
        store = KpiStore()
        store.record("DT/SYS.ENERGY_CONV0", 0, 0)
        store.record("DT/SYS.ENERGY_CONV0", 10, 5000)
        store.record("DT/SYS.MAT_1", 10, 2)
        report = store.report(0, 10, stations=1)
        text = report.serialize()
        assert "window 0 10" in text
        assert "energy_uj.CONV0 5000" in text
        assert "material_in.1 2" in text
