"""Latency-compensated pallet position estimation.

A pallet is dead-reckoned from its last anchor using the *source* timestamp
of that knowledge, so a constant telemetry delay does not accumulate into
position error. The reckoned path replays the line behavior the twin knows
from configuration (conveyor speed, the dwell point on the pass-through
segment) and clamps at whichever stops the twin currently believes are
engaged.

Anchors are refreshed from telemetry:

- an RFID value appearing puts that pallet exactly at the reader;
- an RFID value clearing puts it one pallet length past the reader;
- any stop releasing re-anchors whichever pallets were estimated to be
  waiting exactly there (this covers the identity-less queue stop, and makes
  time spent blocked not count as travel).

Anchors carry a ``departing`` flag so a stop that re-engages behind a pallet
is not applied retroactively to its own departure.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..config import FactoryConfig
from ..factory.geometry import Geometry


@dataclass
class PalletEstimate:
    rfid: str
    segment_index: int
    offset: int
    ring_pos: int
    basis: str  # "RfidCheckpoint" | "DeadReckoned"
    staleness_ms: int | None  # None: never checkpointed (unbounded)

    def to_dict(self) -> dict:
        return {
            "rfid": self.rfid,
            "segment": self.segment_index,
            "offset": self.offset,
            "ring_pos": self.ring_pos,
            "basis": self.basis,
            "staleness_ms": self.staleness_ms,
        }


@dataclass
class _Anchor:
    ring_pos: int
    source_ts: int
    receipt_ts: int
    departing: bool = False  # ignore a stop sitting exactly at the anchor


class PalletEstimator:
    def __init__(self, config: FactoryConfig):
        self.config = config
        self.geometry = Geometry(config)
        self.speed = config.conveyor_speed
        # roster follows the documented deterministic placement rule
        self.anchors: dict[str, _Anchor | None] = {
            f"P-{i + 1:03d}": None for i in range(config.pallet_count)
        }
        self.start_pos: dict[str, int] = {
            f"P-{i + 1:03d}": pos
            for i, pos in enumerate(self.geometry.start_positions())
        }
        # believed stop states: engaged by default (the line's safe default)
        self.stop_engaged: dict[int, bool] = {
            i: True for i in range(len(self.geometry.stop_positions))
        }
        self.rfid_at_reader: dict[int, str] = {}

    # -- telemetry hooks -------------------------------------------------------

    def on_stop_state(self, stop_index: int, engaged: bool, source_ts: int = 0,
                      receipt_ts: int = 0):
        if stop_index not in self.stop_engaged:
            return
        releasing = self.stop_engaged[stop_index] and not engaged
        if releasing:
            # whoever was estimated to be waiting at this stop starts moving
            # now; match within one step quantum, since anchors can sit one
            # tick off the stop grid
            ring = self.geometry.ring_length
            stop_pos = self.geometry.stop_positions[stop_index]
            step = self.config.step_mm
            for rfid in self.anchors:
                pos, _ = self._reckon(rfid, source_ts)
                if min((pos - stop_pos) % ring, (stop_pos - pos) % ring) <= step:
                    self.anchors[rfid] = _Anchor(
                        stop_pos, source_ts, receipt_ts, departing=True
                    )
        self.stop_engaged[stop_index] = engaged

    def on_rfid(self, station: int, value: str, source_ts: int, receipt_ts: int):
        previous = self.rfid_at_reader.get(station, "")
        self.rfid_at_reader[station] = value
        pos = self.geometry.dock_stop_pos[station] % self.geometry.ring_length
        if value and value in self.anchors:
            self.anchors[value] = _Anchor(pos, source_ts, receipt_ts)
        elif not value and previous in self.anchors:
            departed = (pos + self.config.pallet_length) % self.geometry.ring_length
            self.anchors[previous] = _Anchor(
                departed, source_ts, receipt_ts, departing=True
            )

    # -- estimation ---------------------------------------------------------------

    def _walk(self, base_pos: int, elapsed_ms: int, departing: bool) -> int:
        """Advance base_pos along the ring for elapsed_ms, honoring believed
        stops and the dwell point. Integer math throughout."""
        geo = self.geometry
        ring = geo.ring_length
        cfg = self.config
        pos = base_pos % ring
        budget_ms = max(0, elapsed_ms)
        dwell_cost_ms = cfg.amr_dwell_ticks * cfg.tick_duration
        skip_here = departing
        for _ in range(8 * (len(geo.stop_positions) + 2)):
            if budget_ms <= 0:
                break
            if not skip_here and any(
                self.stop_engaged[i] and sp == pos
                for i, sp in enumerate(geo.stop_positions)
            ):
                return pos
            skip_here = False
            d_stop = None
            for i, sp in enumerate(geo.stop_positions):
                if not self.stop_engaged[i]:
                    continue
                d = (sp - pos) % ring or ring
                if d_stop is None or d < d_stop:
                    d_stop = d
            d_dwell = (geo.dwell_pos % ring - pos) % ring or ring
            reach = self.speed * budget_ms // 1000
            next_event = d_dwell if d_stop is None else min(d_stop, d_dwell)
            if reach < next_event:
                return (pos + reach) % ring
            budget_ms -= next_event * 1000 // self.speed
            pos = (pos + next_event) % ring
            if d_stop is not None and next_event == d_stop:
                return pos  # clamped at a believed-engaged stop
            budget_ms -= dwell_cost_ms  # paused at the dwell point
        return pos

    def _reckon(self, rfid: str, now_ms: int) -> tuple[int, int | None]:
        anchor = self.anchors[rfid]
        if anchor is None:
            return self._walk(self.start_pos[rfid], now_ms, False), None
        staleness = max(0, now_ms - anchor.receipt_ts)
        return (
            self._walk(anchor.ring_pos, now_ms - anchor.source_ts, anchor.departing),
            staleness,
        )

    def estimate(self, now_ms: int) -> list[PalletEstimate]:
        out = []
        for rfid in sorted(self.anchors):
            pos, staleness = self._reckon(rfid, now_ms)
            anchor = self.anchors[rfid]
            pinned = (
                anchor is not None
                and pos == anchor.ring_pos
                and not anchor.departing
                and any(
                    v == rfid
                    and self.geometry.dock_stop_pos[k] % self.geometry.ring_length
                    == anchor.ring_pos
                    for k, v in self.rfid_at_reader.items()
                )
            )
            seg, off = self.geometry.locate(pos)
            out.append(
                PalletEstimate(
                    rfid=rfid,
                    segment_index=seg,
                    offset=off,
                    ring_pos=pos,
                    basis="RfidCheckpoint" if pinned else "DeadReckoned",
                    staleness_ms=staleness,
                )
            )
        return out


def divergence(estimates: list[PalletEstimate], ground_truth) -> dict[str, int]:
    """Per-pallet ring distance between estimate and the in-process oracle.

    Harness use only: production code never sees ground truth.
    """
    ring = ground_truth.geometry.ring_length
    truth = {p.rfid: p.ring_pos for p in ground_truth.pallets}
    errors = {}
    for est in estimates:
        if est.rfid not in truth:
            continue
        a, b = est.ring_pos % ring, truth[est.rfid] % ring
        errors[est.rfid] = min((a - b) % ring, (b - a) % ring)
    return errors
