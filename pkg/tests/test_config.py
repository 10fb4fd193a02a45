"""Config contracts: profiles, merging, constraint messages, sweep resolution."""

import pytest

from rispos.config import (build_config, format_sweep_value, parse_config,
                           resolve_sweep)
from rispos.errors import ConfigError, ConstraintError, ParseError


def test_desk_profile_defaults():
    cfg = build_config({}, profile="desk")
    assert cfg.arrays.bs.size == 16 and cfg.arrays.ris.size == 64
    assert cfg.radio.num_subcarriers == 64 and cfg.radio.num_symbols == 32
    assert cfg.scene.num_ris == 2
    assert cfg.scene.clock_bias == pytest.approx(50e-9)
    assert cfg.sweep == "snr_db" and cfg.phase_design == "directed"


def test_paper_profile_scales_up():
    cfg = build_config({}, profile="paper")
    assert cfg.arrays.bs.size == 100 and cfg.arrays.ris.size == 400
    assert cfg.radio.num_symbols == 200


def test_override_merging_and_profile_key():
    cfg = build_config({"profile": "desk",
                        "radio": {"symbols": 48},
                        "experiment": {"trials": 7}})
    assert cfg.radio.num_symbols == 48 and cfg.trials == 7


def test_unknown_key_rejected():
    with pytest.raises(ParseError, match="unknown config key"):
        build_config({"radio": {"bogus": 1}})
    with pytest.raises(ParseError):
        build_config({"nonsense": {}})
    with pytest.raises(ParseError):
        build_config({}, profile="galactic")


def test_constraint_t_ge_n():
    with pytest.raises(ConstraintError, match="T >= N"):
        build_config({"radio": {"symbols": 8}})


def test_constraint_k_gt_paths():
    with pytest.raises(ConstraintError, match="K > Q\\+1"):
        build_config({"radio": {"subcarriers": 3}})


def test_constraint_array_rows():
    with pytest.raises(ConstraintError, match="rows"):
        build_config({"arrays": {"ue": [2, 4]}})


def test_constraint_delay_window():
    # a huge clock bias pushes every delay past K/W
    with pytest.raises(ConstraintError, match="unambiguous"):
        build_config({"scene": {"clock_bias_ns": 10000.0}})
    with pytest.raises(ConstraintError, match="negative"):
        build_config({"scene": {"clock_bias_ns": -10000.0}})


def test_constraints_checked_per_sweep_value():
    with pytest.raises(ConstraintError):
        build_config({"experiment": {"sweep": "clock_bias_ns",
                                     "values": [0.0, 10000.0]}})


def test_parse_errors_are_config_errors():
    assert issubclass(ParseError, ConfigError)
    assert issubclass(ConstraintError, ConfigError)


def test_resolve_sweep_each_variable():
    cfg = build_config({})
    assert resolve_sweep(cfg, 17.0).snr_db == 17.0
    assert resolve_sweep(resolve_sweep(cfg, 0), 0).snr_db == 0.0

    cfg_m = build_config({"experiment": {"sweep": "M", "values": [[4, 4]]}})
    assert resolve_sweep(cfg_m, [6, 6]).arrays.ris.size == 36

    cfg_q = build_config({"experiment": {"sweep": "Q", "values": [1, 2]}})
    assert resolve_sweep(cfg_q, 1).scene.num_ris == 1
    with pytest.raises(ConstraintError):
        resolve_sweep(cfg_q, 5)

    cfg_t = build_config({"experiment": {"sweep": "T", "values": [32]}})
    assert resolve_sweep(cfg_t, 64).radio.num_symbols == 64

    cfg_k = build_config({"experiment": {"sweep": "K_BU", "values": [5.0]}})
    assert resolve_sweep(cfg_k, 5.0).fading.k_bu == 5.0

    cfg_l = build_config({"experiment": {"sweep": "L_BU", "values": [3.0]}})
    assert resolve_sweep(cfg_l, 3.0).fading.exponent_bu == 3.0

    cfg_c = build_config({"experiment": {"sweep": "clock_bias_ns",
                                         "values": [0.0, 100.0]}})
    assert resolve_sweep(cfg_c, 100.0).scene.clock_bias == pytest.approx(100e-9)

    cfg_p = build_config({"experiment": {"sweep": "phase_design",
                                         "values": ["directed", "random"]}})
    assert resolve_sweep(cfg_p, "random").phase_design == "random"
    with pytest.raises(ConstraintError):
        resolve_sweep(cfg_p, "chaotic")


def test_invalid_sweep_and_method_names():
    with pytest.raises(ParseError, match="sweep"):
        build_config({"experiment": {"sweep": "weather"}})
    with pytest.raises(ParseError, match="method"):
        build_config({"experiment": {"methods": ["telepathy"]}})
    with pytest.raises(ParseError, match="phase_design"):
        build_config({"experiment": {"phase_design": "psychic"}})


def test_format_sweep_value():
    assert format_sweep_value(10.0) == "10"
    assert format_sweep_value(2.5) == "2.5"
    assert format_sweep_value([8, 8]) == "8x8"
    assert format_sweep_value("random") == "random"


def test_parse_config_yaml_round_trip(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("experiment:\n  trials: 3\n  seed: 99\n")
    cfg = parse_config(str(path))
    assert cfg.trials == 3 and cfg.seed == 99

    with pytest.raises(ParseError, match="not found"):
        parse_config(str(tmp_path / "missing.yaml"))

    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment: [unclosed\n")
    with pytest.raises(ParseError):
        parse_config(str(bad))

    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert parse_config(str(empty)).trials == 200  # falls back to the profile
