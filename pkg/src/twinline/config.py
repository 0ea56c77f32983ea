"""Factory configuration and the plain-text ``key = value`` config format.

The same file format (UTF-8, LF, ``#`` comments, one ``key = value`` pair per
line) is reused by the gateway config. Repeated keys are allowed where the
consumer says so (e.g. gateway ``allow`` lines); the generic parser returns
every pair in file order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace


class InvalidConfig(ValueError):
    """Configuration violates one or more invariants; names listed."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid config: " + "; ".join(violations))


def parse_kv_lines(text: str) -> list[tuple[str, str]]:
    """Parse ``key = value`` lines; '#' starts a comment, blanks ignored."""
    pairs = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def load_kv_file(path: str) -> list[tuple[str, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_lines(fh.read())


@dataclass
class EnergyModel:
    """Per-device power draw in whole watts (idle vs. active)."""

    conveyor_idle_w: int = 5
    conveyor_active_w: int = 25
    stop_idle_w: int = 1
    stop_active_w: int = 8       # a stop draws when its solenoid holds it retracted
    elevator_idle_w: int = 2
    elevator_active_w: int = 40


@dataclass
class FactoryConfig:
    station_count: int = 6
    # one entry per conveyor segment: infeed/queue segment, one segment per
    # station, then the AMR/buffer pass-through segment (station_count + 2)
    segment_lengths: list[int] = field(default_factory=list)
    conveyor_speed: int = 100        # mm per simulated second
    tick_duration: int = 50          # simulated ms per tick
    pallet_count: int = 3
    pallet_length: int = 200         # mm
    min_gap: int = 50                # accumulation gap between pallets, mm
    approach_offset: int = 300       # PALLET_B sensor distance upstream of the stop, mm
    amr_dwell_ticks: int = 10        # hold time on the pass-through segment
    elevator_travel_ticks: int = 3
    material_per_pass: int = 1       # parts consumed per pallet pass at a station
    waste_per_pass: int = 0          # scrap per pallet pass
    energy: EnergyModel = field(default_factory=EnergyModel)
    rng_seed: int = 42

    def __post_init__(self):
        if not self.segment_lengths:
            self.segment_lengths = default_segment_lengths(self.station_count)

    @property
    def step_mm(self) -> int:
        """Pallet advance per tick; config is rejected unless this is whole mm."""
        return (self.conveyor_speed * self.tick_duration) // 1000

    @property
    def ring_length(self) -> int:
        return sum(self.segment_lengths)

    def violations(self) -> list[str]:
        bad = []
        if self.station_count < 1:
            bad.append("station_count must be >= 1")
        if self.tick_duration <= 0:
            bad.append("tick_duration must be > 0")
        if self.conveyor_speed <= 0:
            bad.append("conveyor_speed must be > 0")
        if self.pallet_count < 0:
            bad.append("pallet_count must be >= 0")
        if self.pallet_length <= 0:
            bad.append("pallet_length must be > 0")
        if self.min_gap < 0:
            bad.append("min_gap must be >= 0")
        if len(self.segment_lengths) != self.station_count + 2:
            bad.append(
                f"segment_lengths must have station_count + 2 = "
                f"{self.station_count + 2} entries"
            )
        if any(s <= 0 for s in self.segment_lengths):
            bad.append("segment_lengths must all be > 0")
        if self.tick_duration > 0 and self.conveyor_speed > 0:
            if (self.conveyor_speed * self.tick_duration) % 1000 != 0:
                bad.append("conveyor_speed * tick_duration must be whole millimeters")
        if not bad:
            slot = self.pallet_length + self.min_gap
            if self.pallet_count * slot > self.ring_length:
                bad.append("pallets do not fit on the ring at the configured gap")
        return bad

    def validate(self) -> "FactoryConfig":
        bad = self.violations()
        if bad:
            raise InvalidConfig(bad)
        return self

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str]]) -> "FactoryConfig":
        cfg = cls()
        energy = replace(cfg.energy)
        segments: list[int] | None = None
        for key, value in pairs:
            if key.startswith("energy."):
                attr = key[len("energy."):]
                if not hasattr(energy, attr):
                    raise ValueError(f"unknown config key {key!r}")
                setattr(energy, attr, int(value))
            elif key == "segment_lengths":
                segments = [int(v) for v in value.split(",") if v.strip()]
            elif hasattr(cfg, key) and key != "energy":
                setattr(cfg, key, int(value))
            else:
                raise ValueError(f"unknown config key {key!r}")
        cfg.energy = energy
        cfg.segment_lengths = (
            segments if segments is not None
            else default_segment_lengths(cfg.station_count)
        )
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "FactoryConfig":
        return cls.from_pairs(load_kv_file(path))

    def with_overrides(self, pairs: list[tuple[str, str]]) -> "FactoryConfig":
        pairs = list(pairs)
        overridden = {k for k, _ in pairs}
        base = []
        for f in (
            "station_count", "conveyor_speed", "tick_duration", "pallet_count",
            "pallet_length", "min_gap", "approach_offset", "amr_dwell_ticks",
            "elevator_travel_ticks", "material_per_pass", "waste_per_pass",
            "rng_seed",
        ):
            base.append((f, str(getattr(self, f))))
        # a changed station count invalidates an inherited segment list
        if not ("station_count" in overridden and "segment_lengths" not in overridden):
            base.append(
                ("segment_lengths", ",".join(str(s) for s in self.segment_lengths))
            )
        for f in vars(self.energy):
            base.append((f"energy.{f}", str(getattr(self.energy, f))))
        return FactoryConfig.from_pairs(base + pairs)


def default_segment_lengths(station_count: int) -> list[int]:
    # infeed/queue segment, station segments, AMR/buffer pass-through segment
    return [1200] + [1000] * station_count + [1500]
