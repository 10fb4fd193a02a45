"""Experiment configuration: YAML parsing, profiles, strict validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass, replace

import numpy as np
import yaml
from scipy.spatial.transform import Rotation

from .channel import ArrayConfig, ArraySet, FadingConfig, RadioConfig
from .errors import ConstraintError, ParseError
from .geometry import Scene, direction_and_angles

SWEEP_VARIABLES = ("snr_db", "M", "Q", "T", "K_BU", "L_BU", "clock_bias_ns",
                   "phase_design")
METHODS = ("proposed-energy", "proposed-delay", "ls-baseline", "exip-oracle")
PHASE_DESIGNS = ("directed", "random")

PROFILES: dict[str, dict] = {
    # Laptop-friendly scale: every acceptance run finishes in minutes.  The
    # subcarrier count is kept at 64 so that the clock-bias sweep range
    # (+-10/W around a 50 ns bias) stays inside the unambiguous delay
    # window K/W for the default geometry.
    "desk": {
        "scene": {
            "ris_positions": [[30.0, -5.0, -2.0], [16.0, 20.0, 31.0]],
            "ue_position": [50.0, 10.0, -20.0],
            "clock_bias_ns": 50.0,
            "rotation_deg": [0.0, 0.0, 0.0],
        },
        "arrays": {"bs": [4, 4], "ue": [4, 4], "ris": [8, 8]},
        "radio": {"carrier_ghz": 30.0, "bandwidth_mhz": 100.0,
                  "subcarriers": 64, "symbols": 32, "power": 1.0},
        "fading": {"k_bu": 10.0, "k_ru": 10.0,
                   "exponent_bu": 4.5, "exponent_ris": 2.0},
        "experiment": {"sweep": "snr_db", "values": [0.0, 10.0, 20.0],
                       "trials": 200, "seed": 20240601, "snr_db": 10.0,
                       "methods": ["proposed-energy", "ls-baseline"],
                       "phase_design": "directed", "jsonl_log": False},
    },
    # Full simulation scale; slow, provided for completeness.
    "paper": {
        "scene": {
            "ris_positions": [[30.0, -5.0, -2.0], [16.0, 20.0, 31.0]],
            "ue_position": [50.0, 10.0, -20.0],
            "clock_bias_ns": 50.0,
            "rotation_deg": [0.0, 0.0, 0.0],
        },
        "arrays": {"bs": [10, 10], "ue": [8, 8], "ris": [20, 20]},
        "radio": {"carrier_ghz": 30.0, "bandwidth_mhz": 100.0,
                  "subcarriers": 64, "symbols": 200, "power": 1.0},
        "fading": {"k_bu": 10.0, "k_ru": 10.0,
                   "exponent_bu": 4.5, "exponent_ris": 2.0},
        "experiment": {"sweep": "snr_db", "values": [0.0, 10.0, 20.0],
                       "trials": 200, "seed": 20240601, "snr_db": 10.0,
                       "methods": ["proposed-energy", "ls-baseline"],
                       "phase_design": "directed", "jsonl_log": False},
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description."""

    scene: Scene
    arrays: ArraySet
    radio: RadioConfig
    fading: FadingConfig
    sweep: str
    values: tuple
    trials: int
    seed: int
    snr_db: float
    methods: tuple
    phase_design: str
    jsonl_log: bool


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ParseError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ParseError(f"{where} must be a mapping")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConstraintError(message)


def _pair(value, name: str) -> tuple[int, int]:
    try:
        r, c = (int(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{name} must be a [rows, cols] pair") from exc
    return r, c


def build_config(raw: dict, profile: str = "desk") -> ExperimentConfig:
    """Merge a raw config dict onto a profile and validate every constraint."""
    if profile not in PROFILES:
        raise ParseError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ParseError("config root must be a mapping")
    profile = raw.pop("profile", profile)
    if profile not in PROFILES:
        raise ParseError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    merged = _merge(PROFILES[profile], raw)

    sc, ar, ra, fa, ex = (merged[k] for k in
                          ("scene", "arrays", "radio", "fading", "experiment"))
    try:
        rot = Rotation.from_euler("zyx", np.asarray(sc["rotation_deg"], dtype=float),
                                  degrees=True).as_matrix()
        scene = Scene(ris_positions=np.asarray(sc["ris_positions"], dtype=float),
                      p_ue=np.asarray(sc["ue_position"], dtype=float),
                      rotation=rot,
                      clock_bias=float(sc["clock_bias_ns"]) * 1e-9)
        arrays = ArraySet(bs=ArrayConfig(*_pair(ar["bs"], "arrays.bs")),
                          ue=ArrayConfig(*_pair(ar["ue"], "arrays.ue")),
                          ris=ArrayConfig(*_pair(ar["ris"], "arrays.ris")))
        radio = RadioConfig(carrier_freq=float(ra["carrier_ghz"]) * 1e9,
                            bandwidth=float(ra["bandwidth_mhz"]) * 1e6,
                            num_subcarriers=int(ra["subcarriers"]),
                            num_symbols=int(ra["symbols"]),
                            power=float(ra["power"]))
        fading = FadingConfig(k_bu=float(fa["k_bu"]), k_ru=float(fa["k_ru"]),
                              exponent_bu=float(fa["exponent_bu"]),
                              exponent_ris=float(fa["exponent_ris"]))
    except (TypeError, ValueError, KeyError) as exc:
        raise ParseError(f"invalid config value: {exc}") from exc

    sweep = str(ex["sweep"])
    if sweep not in SWEEP_VARIABLES:
        raise ParseError(f"sweep must be one of {SWEEP_VARIABLES}, got {sweep!r}")
    methods = tuple(str(m) for m in ex["methods"])
    for m in methods:
        if m not in METHODS:
            raise ParseError(f"unknown method {m!r}; choose from {METHODS}")
    phase_design = str(ex["phase_design"])
    if phase_design not in PHASE_DESIGNS:
        raise ParseError(f"phase_design must be one of {PHASE_DESIGNS}")

    cfg = ExperimentConfig(scene=scene, arrays=arrays, radio=radio, fading=fading,
                           sweep=sweep, values=tuple(ex["values"]),
                           trials=int(ex["trials"]), seed=int(ex["seed"]),
                           snr_db=float(ex["snr_db"]), methods=methods,
                           phase_design=phase_design,
                           jsonl_log=bool(ex["jsonl_log"]))
    validate_config(cfg)
    for value in cfg.values:
        validate_config(resolve_sweep(cfg, value))
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    """Enforce the model's structural inequalities with actionable messages."""
    q = cfg.scene.num_ris
    n, t, k = cfg.arrays.bs.size, cfg.radio.num_symbols, cfg.radio.num_subcarriers
    _require(t >= n, f"T >= N required (pilot slots {t} < BS antennas {n})")
    _require(k > q + 1, f"K > Q+1 required (subcarriers {k} <= paths {q + 1})")
    for name, arr in (("bs", cfg.arrays.bs), ("ue", cfg.arrays.ue)):
        _require(arr.rows > q + 1,
                 f"{name} array rows {arr.rows} must exceed Q+1 = {q + 1}")
        _require(arr.cols > q + 1,
                 f"{name} array cols {arr.cols} must exceed Q+1 = {q + 1}")
    _require(cfg.trials >= 0, "trials must be nonnegative")
    _require(cfg.fading.k_bu >= 0 and cfg.fading.k_ru >= 0,
             "Rician factors must be nonnegative")

    # every path delay must land in the unambiguous window [0, K/W]
    window = cfg.radio.unambiguous_delay
    delays = [direction_and_angles(cfg.scene.p_bs, cfg.scene.p_ue,
                                   cfg.scene.clock_bias).tau]
    for p_r in cfg.scene.ris_positions:
        leg = direction_and_angles(cfg.scene.p_bs, p_r)
        delays.append(leg.tau + direction_and_angles(p_r, cfg.scene.p_ue,
                                                     cfg.scene.clock_bias).tau)
    _require(min(delays) >= 0.0,
             f"smallest path delay {min(delays):.3e} s is negative "
             "(clock bias too negative)")
    _require(max(delays) <= window,
             f"largest path delay {max(delays):.3e} s exceeds the unambiguous "
             f"window K/W = {window:.3e} s")


def resolve_sweep(cfg: ExperimentConfig, value) -> ExperimentConfig:
    """A copy of the config with one sweep value applied to its knob."""
    if cfg.sweep == "snr_db":
        return replace(cfg, snr_db=float(value))
    if cfg.sweep == "M":
        rows, cols = _pair(value, "sweep value for M")
        return replace(cfg, arrays=replace(cfg.arrays, ris=ArrayConfig(rows, cols)))
    if cfg.sweep == "Q":
        q = int(value)
        if not 0 <= q <= cfg.scene.num_ris:
            raise ConstraintError(f"Q={q} outside [0, {cfg.scene.num_ris}]")
        scene = Scene(ris_positions=cfg.scene.ris_positions[:q],
                      p_ue=cfg.scene.p_ue, rotation=cfg.scene.rotation,
                      clock_bias=cfg.scene.clock_bias)
        return replace(cfg, scene=scene)
    if cfg.sweep == "T":
        return replace(cfg, radio=replace(cfg.radio, num_symbols=int(value)))
    if cfg.sweep == "K_BU":
        return replace(cfg, fading=replace(cfg.fading, k_bu=float(value)))
    if cfg.sweep == "L_BU":
        return replace(cfg, fading=replace(cfg.fading, exponent_bu=float(value)))
    if cfg.sweep == "clock_bias_ns":
        scene = Scene(ris_positions=cfg.scene.ris_positions, p_ue=cfg.scene.p_ue,
                      rotation=cfg.scene.rotation,
                      clock_bias=float(value) * 1e-9)
        return replace(cfg, scene=scene)
    if cfg.sweep == "phase_design":
        v = str(value)
        if v not in PHASE_DESIGNS:
            raise ConstraintError(f"phase_design sweep value must be in {PHASE_DESIGNS}")
        return replace(cfg, phase_design=v)
    raise ParseError(f"unhandled sweep variable {cfg.sweep!r}")


def format_sweep_value(value) -> str:
    """Stable CSV rendering of a sweep value (numbers at 9 significant digits)."""
    if isinstance(value, (list, tuple)):
        return "x".join(str(int(v)) for v in value)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return f"{float(value):.9g}" if isinstance(value, float) or \
            not float(value).is_integer() else f"{int(value)}"
    return str(value)


def parse_config(path: str, profile: str = "desk") -> ExperimentConfig:
    """Load, merge and validate a YAML config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ParseError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path}: {exc}") from exc
    return build_config(raw if raw is not None else {}, profile=profile)
