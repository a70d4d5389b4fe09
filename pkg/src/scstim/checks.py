"""Built-in verification scenarios against the device's published envelope.

Each check compares a simulated quantity with its target (voltage mapping
endpoints, step resolution, divider ratios, rise time, frequency fidelity,
charge balance, regulation) and reports a measured value plus pass/fail.
Used by the ``spec-check`` CLI command and the acceptance test suite.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from . import control, flyback
from .engine import (RegulationConfig, SimConfig, edge_tau, measure_rise_time,
                     simulate)
from .load import LoadModel
from .params import Mode, StimProtocol, Topology, validate_protocol
from .sc_core import (RISE_ENVELOPE_C_PAR_MAX, RISE_ENVELOPE_R_ON_MAX,
                      SwitchTiming, divider_split, rise_time_90)


@dataclass
class CheckResult:
    name: str
    target: str
    measured: str
    passed: bool


def _base_config(timing: SwitchTiming, preset: str) -> SimConfig:
    return SimConfig(
        protocol=StimProtocol(voltage_code=-127, frequency_hz=50.0,
                              phase1_width_s=300e-6, train_length=2),
        flyback=flyback.preset(preset),
        load=LoadModel.resistive(1_000.0),
        timing=timing,
        flyback_preset=preset,
        load_preset="low_z_user",
    )


def run_checks(timing: SwitchTiming | None = None,
               preset: str = "paper_120") -> list[CheckResult]:
    timing = timing or SwitchTiming()
    results: list[CheckResult] = []
    fb = flyback.preset(preset)

    v_low = flyback.code_to_voltage(fb, 127)
    v_high = flyback.code_to_voltage(fb, -127)
    expect_low, expect_high = 3.5, (120.0 if preset == "paper_120" else 135.0)
    results.append(CheckResult(
        "voltage endpoints", f"{expect_low:g} V / {expect_high:g} V",
        f"{v_low:.6f} V / {v_high:.6f} V",
        abs(v_low - expect_low) < 1e-6 and abs(v_high - expect_high) < 1e-6))

    step = flyback.step_resolution(fb)
    if preset == "paper_120":
        results.append(CheckResult(
            "step resolution", "0.457 V/step +/- 0.005",
            f"{step:.6f} V/step", abs(step - 0.457) < 0.005))

    volts = [flyback.code_to_voltage(fb, c) for c in range(-127, 128)]
    mono = all(volts[i] >= volts[i + 1] for i in range(len(volts) - 1))
    results.append(CheckResult(
        "code sweep monotone", "v_out non-increasing over 255 codes",
        "monotone" if mono else "NOT monotone", mono))

    ratio_ok = True
    worst = 0.0
    for v_stack in (1.0, 17.3, 60.0, 120.0, 135.0):
        v1a, v2a = divider_split(True, False, v_stack)
        v1b, v2b = divider_split(False, True, v_stack)
        v1s, v2s = divider_split(False, False, v_stack)
        for err in (abs(v2a / v1a - 2.0) / 2.0, abs(v1b / v2b - 2.0) / 2.0,
                    abs(v1s - v2s)):
            worst = max(worst, err)
            ratio_ok = ratio_ok and err < 1e-12
    results.append(CheckResult(
        "divider ratios", "1:2 / 2:1 / 1:1 exact (rel err < 1e-12)",
        f"worst rel err {worst:.2e}", ratio_ok))

    cfg = _base_config(timing, preset)
    w, _ = simulate(cfg)
    rise = measure_rise_time(w)
    predicted = rise_time_90(timing, cfg.load)
    rise_ok = abs(rise - 12.15e-9) <= 0.05 * 12.15e-9 if _is_default(timing) else rise < 20e-9
    target = "12.15 ns +/- 5%" if _is_default(timing) else "under 20 ns"
    results.append(CheckResult(
        "rise time (measured)", target,
        f"{rise * 1e9:.3f} ns (predicted {predicted * 1e9:.3f} ns)", rise_ok))

    env_tau = RISE_ENVELOPE_R_ON_MAX * RISE_ENVELOPE_C_PAR_MAX
    env_rise = math.log(10.0) * env_tau
    results.append(CheckResult(
        "rise-time envelope",
        f"< 20 ns for r_on <= {RISE_ENVELOPE_R_ON_MAX:g} ohm, "
        f"c_par <= {RISE_ENVELOPE_C_PAR_MAX * 1e9:g} nF",
        f"worst case {env_rise * 1e9:.3f} ns", env_rise < 20e-9))

    freq_ok = True
    freq_meas = []
    for f_hz, t1 in ((1.0, 300e-6), (1000.0, 300e-6), (10_000.0, 20e-6)):
        proto = StimProtocol(voltage_code=-127, frequency_hz=f_hz,
                             phase1_width_s=t1, interphase_gap_s=5e-6,
                             recovery_gap_s=5e-6, train_length=2)
        c = dataclasses.replace(cfg, protocol=proto)
        wf, _ = simulate(c)
        period = wf.pulse_starts[1] - wf.pulse_starts[0]
        bulk = t1 / 50.0
        ok = abs(period - 1.0 / f_hz) <= bulk
        freq_ok = freq_ok and ok
        freq_meas.append(f"{f_hz:g} Hz: {period:.6g} s")
    budget_reject = not validate_protocol(
        StimProtocol(mode=Mode.ASYM_1_2, frequency_hz=10_000.0,
                     phase1_width_s=60e-6)).ok
    results.append(CheckResult(
        "frequency fidelity", "period = 1/f within one bulk_dt; 10 kHz budget enforced",
        "; ".join(freq_meas) + ("; budget rejected" if budget_reject else "; budget NOT rejected"),
        freq_ok and budget_reject))

    balance_ok = True
    worst_net = 0.0
    for mode in (Mode.SYMMETRIC, Mode.ASYM_1_2, Mode.ASYM_2_1):
        proto = StimProtocol(mode=mode, voltage_code=-127, frequency_hz=50.0,
                             phase1_width_s=300e-6, train_length=2)
        c = dataclasses.replace(cfg, protocol=proto, load=LoadModel.resistive(6_000.0))
        _, stats = simulate(c)
        worst_net = max(worst_net, stats.worst_net_fraction)
        balance_ok = balance_ok and stats.worst_net_fraction < 1e-3
    results.append(CheckResult(
        "charge balance", "|q1+q2| < 0.1% of q1, all modes",
        f"worst {worst_net:.2e}", balance_ok))

    reg_proto = StimProtocol(voltage_code=0, frequency_hz=50.0,
                             phase1_width_s=300e-6, train_length=30)
    reg_cfg = dataclasses.replace(
        cfg, protocol=reg_proto, load=LoadModel.resistive(5_000.0),
        regulation=RegulationConfig(enabled=True, target_ma=10.0))
    _, rstats = simulate(reg_cfg)
    quant = control.steady_state_error(reg_cfg.flyback, 5_001.0, Mode.SYMMETRIC, 10.0)
    step_ma = flyback.step_resolution(reg_cfg.flyback) / 2.0 / 5_001.0 * 1e3
    final_i = rstats.pulses[-1].peak_i_ma
    reg_ok = (rstats.final_code == -83 and abs(final_i - 10.0) <= step_ma
              and not rstats.compliance_limited)
    results.append(CheckResult(
        "regulation 5k/10mA", "code -83, within one step of 10 mA, <= 30 pulses",
        f"code {rstats.final_code}, i {final_i:.4f} mA (quantization residual {quant:.4f} mA)",
        reg_ok))

    return results


def _is_default(timing: SwitchTiming) -> bool:
    return timing == SwitchTiming()
