"""Config-file schema: one YAML document with nested sections.

Sections (all optional, defaults below): ``protocol``, ``flyback``, ``load``,
``timing``, ``engine``, ``regulation``.  Unknown sections or keys are
rejected so typos fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from . import flyback as fb_mod
from . import load as load_mod
from .engine import RegulationConfig, SamplePolicy, SimConfig
from .load import LoadModel
from .params import (DEFAULT_INTERPHASE_GAP_S, DEFAULT_RECOVERY_GAP_S, Mode,
                     StimProtocol, Topology)
from .sc_core import SwitchTiming


class ConfigError(ValueError):
    """Malformed or inconsistent config file content."""


_SECTIONS = ("protocol", "flyback", "load", "timing", "engine", "regulation")

_PROTOCOL_KEYS = {
    "topology", "mode", "voltage_code", "target_current_ma", "frequency_hz",
    "phase1_width_s", "interphase_gap_s", "recovery_gap_s", "train_length",
}
_FLYBACK_KEYS = {"preset", "settle_tau_s", "v_out_max_clamp"}
_LOAD_KEYS = {"preset", "kind", "r_s_ohm", "r_p_ohm", "c_dl_f"}
_TIMING_KEYS = {"r_on_ohm", "c_par_f", "gate_delay_on_s", "gate_delay_off_s",
                "pullup_ohm", "pulldown_ohm"}
_ENGINE_KEYS = {"dense_edge_window_s", "bulk_dt_s", "dense_points"}
_REGULATION_KEYS = {"enabled", "target_ma", "gain_codes_per_ma", "adaptive"}


def _require_mapping(obj, what):
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} must be a mapping, got {type(obj).__name__}")
    return obj


def _check_keys(section, allowed, name):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")


def _num(section, key, default, name):
    v = section.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"[{name}] {key} must be a number, got {v!r}")
    return float(v)


def load_config(path: str | Path, preset_override: str | None = None) -> SimConfig:
    """Parse a YAML config file into a SimConfig."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return build_config(_require_mapping(raw, "config root"),
                        preset_override=preset_override)


def build_config(raw: dict, preset_override: str | None = None) -> SimConfig:
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")

    proto_raw = _require_mapping(raw.get("protocol"), "[protocol]")
    _check_keys(proto_raw, _PROTOCOL_KEYS, "protocol")
    try:
        topology = Topology(proto_raw.get("topology", "biphasic"))
        mode = Mode(proto_raw.get("mode", "symmetric"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    code = proto_raw.get("voltage_code", 0)
    if isinstance(code, bool) or not isinstance(code, int):
        raise ConfigError(f"[protocol] voltage_code must be an integer, got {code!r}")
    train = proto_raw.get("train_length", 1)
    if isinstance(train, bool) or not isinstance(train, int):
        raise ConfigError(f"[protocol] train_length must be an integer, got {train!r}")
    protocol = StimProtocol(
        topology=topology,
        mode=mode,
        voltage_code=code,
        target_current_ma=_num(proto_raw, "target_current_ma", None, "protocol"),
        frequency_hz=_num(proto_raw, "frequency_hz", 50.0, "protocol"),
        phase1_width_s=_num(proto_raw, "phase1_width_s", 300e-6, "protocol"),
        interphase_gap_s=_num(proto_raw, "interphase_gap_s", DEFAULT_INTERPHASE_GAP_S, "protocol"),
        recovery_gap_s=_num(proto_raw, "recovery_gap_s", DEFAULT_RECOVERY_GAP_S, "protocol"),
        train_length=train,
    )

    fb_raw = _require_mapping(raw.get("flyback"), "[flyback]")
    _check_keys(fb_raw, _FLYBACK_KEYS, "flyback")
    preset_name = preset_override or fb_raw.get("preset", "paper_120")
    try:
        fb = fb_mod.preset(preset_name, settle_tau=_num(fb_raw, "settle_tau_s", None, "flyback"))
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    clamp = _num(fb_raw, "v_out_max_clamp", None, "flyback")
    if clamp is not None:
        fb = dataclasses.replace(fb, v_out_max_clamp=clamp)

    load_raw = _require_mapping(raw.get("load"), "[load]")
    _check_keys(load_raw, _LOAD_KEYS, "load")
    load_preset = load_raw.get("preset")
    if load_preset is not None and ("kind" in load_raw or "r_s_ohm" in load_raw):
        raise ConfigError("[load] give either a preset or explicit values, not both")
    if load_preset is not None:
        try:
            load = load_mod.preset(load_preset)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    elif load_raw:
        kind = load_raw.get("kind", "resistive")
        r_s = _num(load_raw, "r_s_ohm", None, "load")
        if r_s is None:
            raise ConfigError("[load] r_s_ohm is required for an explicit load")
        try:
            if kind == "resistive":
                load = LoadModel.resistive(r_s)
            elif kind == "randles":
                load = LoadModel.randles(r_s,
                                         _num(load_raw, "r_p_ohm", None, "load"),
                                         _num(load_raw, "c_dl_f", None, "load"))
            else:
                raise ConfigError(f"[load] unknown kind {kind!r}")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[load] {exc}") from exc
    else:
        load_preset = "low_z_user"
        load = load_mod.preset(load_preset)

    timing_raw = _require_mapping(raw.get("timing"), "[timing]")
    _check_keys(timing_raw, _TIMING_KEYS, "timing")
    try:
        timing = SwitchTiming(
            pullup_r=_num(timing_raw, "pullup_ohm", 2.2, "timing"),
            pulldown_r=_num(timing_raw, "pulldown_ohm", 1.0, "timing"),
            gate_delay_on=_num(timing_raw, "gate_delay_on_s", 3e-9, "timing"),
            gate_delay_off=_num(timing_raw, "gate_delay_off_s", 2e-9, "timing"),
            r_on=_num(timing_raw, "r_on_ohm", 1.0, "timing"),
            c_par=_num(timing_raw, "c_par_f", 5.28e-9, "timing"),
        )
    except ValueError as exc:
        raise ConfigError(f"[timing] {exc}") from exc

    engine_raw = _require_mapping(raw.get("engine"), "[engine]")
    _check_keys(engine_raw, _ENGINE_KEYS, "engine")
    policy = None
    if engine_raw:
        window = _num(engine_raw, "dense_edge_window_s", None, "engine")
        bulk = _num(engine_raw, "bulk_dt_s", None, "engine")
        points = engine_raw.get("dense_points", 160)
        if window is not None or bulk is not None or points != 160:
            from .engine import default_sample_policy
            base = default_sample_policy(SimConfig(protocol=protocol, flyback=fb,
                                                   load=load, timing=timing))
            policy = SamplePolicy(
                dense_edge_window=window if window is not None else base.dense_edge_window,
                bulk_dt=bulk if bulk is not None else base.bulk_dt,
                dense_points=int(points),
            )

    reg_raw = _require_mapping(raw.get("regulation"), "[regulation]")
    _check_keys(reg_raw, _REGULATION_KEYS, "regulation")
    enabled = reg_raw.get("enabled", bool(reg_raw) or protocol.target_current_ma is not None)
    if not isinstance(enabled, bool):
        raise ConfigError("[regulation] enabled must be true/false")
    target = _num(reg_raw, "target_ma", None, "regulation")
    if target is None:
        target = protocol.target_current_ma or 0.0
    elif protocol.target_current_ma is None:
        # surface the regulation target to protocol validation (0-20 mA row)
        protocol = protocol.with_(target_current_ma=target)
    adaptive = reg_raw.get("adaptive", True)
    if not isinstance(adaptive, bool):
        raise ConfigError("[regulation] adaptive must be true/false")
    regulation = RegulationConfig(
        enabled=enabled and target > 0,
        target_ma=target,
        gain_codes_per_ma=_num(reg_raw, "gain_codes_per_ma", 2.0, "regulation"),
        adaptive=adaptive,
    )

    return SimConfig(protocol=protocol, flyback=fb, load=load, timing=timing,
                     sample_policy=policy, regulation=regulation,
                     flyback_preset=preset_name, load_preset=load_preset)


def default_config_yaml() -> str:
    """A commented example config matching the built-in defaults."""
    return """\
# Stimulator simulation config
protocol:
  topology: biphasic        # monophasic | biphasic
  mode: symmetric           # symmetric | asym_1_2 | asym_2_1
  voltage_code: -127        # signed IDAC code, -127 (max V) .. +127 (min V)
  frequency_hz: 50.0
  phase1_width_s: 300.0e-6
  interphase_gap_s: 50.0e-6
  recovery_gap_s: 10.0e-6
  train_length: 3
flyback:
  preset: paper_120         # paper_120 (3.5-120 V) | table1_135 (3.5-135 V)
  settle_tau_s: 100.0e-6
load:
  preset: bench_6k          # low_z_user | high_z_user | bench_6k, or explicit kind/r_s_ohm/...
timing:
  r_on_ohm: 1.0
  c_par_f: 5.28e-9
  gate_delay_on_s: 3.0e-9
  gate_delay_off_s: 2.0e-9
regulation:
  enabled: false
  target_ma: 10.0
  gain_codes_per_ma: 2.0
  adaptive: true
"""
