"""Configuration parsing and override semantics."""

import pytest

from twinline.config import FactoryConfig, InvalidConfig, parse_kv_lines


def test_defaults_are_valid():
    cfg = FactoryConfig().validate()
    assert cfg.station_count == 6
    assert len(cfg.segment_lengths) == 8
    assert cfg.step_mm == 5


def test_kv_parsing_with_comments_and_blanks():
    pairs = parse_kv_lines("a = 1\n# note\n\nb=2  # trailing\n")
    assert pairs == [("a", "1"), ("b", "2")]


def test_kv_parse_error_names_line():
    with pytest.raises(ValueError, match="line 2"):
        parse_kv_lines("a = 1\nnot-a-pair\n")


def test_from_pairs_energy_and_segments():
    cfg = FactoryConfig.from_pairs(
        [
            ("station_count", "2"),
            ("segment_lengths", "500,400,400,600"),
            ("energy.stop_active_w", "12"),
        ]
    ).validate()
    assert cfg.segment_lengths == [500, 400, 400, 600]
    assert cfg.energy.stop_active_w == 12


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown config key"):
        FactoryConfig.from_pairs([("warp_speed", "9")])


def test_override_station_count_regenerates_segments():
    cfg = FactoryConfig().with_overrides([("station_count", "3")]).validate()
    assert cfg.station_count == 3
    assert len(cfg.segment_lengths) == 5


def test_override_keeps_explicit_segments():
    cfg = FactoryConfig().with_overrides(
        [("station_count", "2"), ("segment_lengths", "300,300,300,300")]
    ).validate()
    assert cfg.segment_lengths == [300, 300, 300, 300]


def test_fractional_step_rejected():
    with pytest.raises(InvalidConfig, match="whole millimeters"):
        FactoryConfig(conveyor_speed=33, tick_duration=50).validate()


def test_pallets_must_fit():
    with pytest.raises(InvalidConfig, match="fit"):
        FactoryConfig(pallet_count=100).validate()
