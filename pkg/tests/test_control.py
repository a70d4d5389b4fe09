import math

import pytest

from scstim import flyback
from scstim.control import (RegulatorState, UnreachableTargetError,
                            phase1_fraction, regulate_step, steady_state_error)
from scstim.params import Mode

FB = flyback.preset("paper_120")


def plant_current_ma(code: int, r_load: float, r_on: float = 1.0) -> float:
    """Resistive-load peak phase-1 current for a symmetric split."""
    return flyback.code_to_voltage(FB, code) / 2.0 / (r_load + r_on) * 1e3


def run_loop(r_load: float, target_ma: float, pulses: int, **reg_kw) -> list[int]:
    st = RegulatorState(target_ma=target_ma, **reg_kw)
    trace = [st.code]
    for _ in range(pulses):
        st = regulate_step(st, plant_current_ma(st.code, r_load), FB)
        trace.append(st.code)
    return trace


def test_zero_error_leaves_code_unchanged():
    st = RegulatorState(target_ma=10.0, code=-83)
    measured = plant_current_ma(-83, 5_000.0)
    st_adaptive = regulate_step(st, st.target_ma, FB)
    assert st_adaptive.code == -83
    st_int = regulate_step(RegulatorState(target_ma=measured, code=-83, adaptive=False),
                           measured, FB)
    assert st_int.code == -83


def test_5k_10ma_converges_to_code_minus_83():
    trace = run_loop(5_000.0, 10.0, pulses=30)
    assert trace[-1] == -83
    # settled: constant or a +/-1 limit cycle over the tail
    tail = trace[-5:]
    assert max(tail) - min(tail) <= 1
    final_i = plant_current_ma(trace[-1], 5_000.0)
    quant_ma = flyback.step_resolution(FB) / 2.0 / 5_001.0 * 1e3
    assert abs(final_i - 10.0) <= quant_ma


def test_converges_within_30_pulses_across_load_range():
    for r in (500.0, 1_000.0, 2_000.0, 5_000.0, 8_000.0, 12_000.0):
        v_max = flyback.code_to_voltage(FB, -127)
        i_max = v_max / 2.0 / (r + 1.0) * 1e3
        target = min(0.8 * i_max, 15.0)
        trace = run_loop(r, target, pulses=30)
        quant_ma = flyback.step_resolution(FB) / 2.0 / (r + 1.0) * 1e3
        assert abs(plant_current_ma(trace[-1], r) - target) <= quant_ma, f"r={r}"
        tail = trace[-3:]
        assert max(tail) - min(tail) <= 1, f"r={r} still moving: {trace}"


def test_unreachable_target_saturates_at_full_scale():
    # 20 mA into 10 kOhm needs ~400 V, far beyond the 120 V rail
    st = RegulatorState(target_ma=20.0)
    for _ in range(15):
        st = regulate_step(st, plant_current_ma(st.code, 10_000.0), FB)
        assert flyback.code_to_voltage(FB, st.code) <= FB.v_out_max_clamp
    assert st.code == -127
    assert st.saturated


def test_saturation_clears_when_target_becomes_reachable():
    st = RegulatorState(target_ma=20.0)
    for _ in range(10):
        st = regulate_step(st, plant_current_ma(st.code, 10_000.0), FB)
    assert st.saturated
    st = RegulatorState(target_ma=5.0, code=st.code)
    for _ in range(10):
        st = regulate_step(st, plant_current_ma(st.code, 10_000.0), FB)
    assert not st.saturated
    assert abs(plant_current_ma(st.code, 10_000.0) - 5.0) < 0.1


def test_integral_law_moves_toward_target_without_dead_band():
    # 500 ohm: gain 2 codes/mA is near deadbeat; the float accumulator must
    # carry sub-code error instead of rounding it away
    trace = run_loop(500.0, 15.0, pulses=30, adaptive=False)
    quant_ma = flyback.step_resolution(FB) / 2.0 / 501.0 * 1e3
    assert abs(plant_current_ma(trace[-1], 500.0) - 15.0) <= quant_ma
    # code 0 starts above target current: the approach only lowers the
    # voltage, then at most a +/-1 limit cycle remains
    settle = next(i for i, c in enumerate(trace) if abs(c - trace[-1]) <= 1)
    approach = [b - a for a, b in zip(trace[:settle], trace[1:settle + 1])]
    assert approach and all(d > 0 for d in approach)
    tail = trace[settle:]
    assert max(tail) - min(tail) <= 1


def test_integral_antiwindup_freezes_at_rail():
    st = RegulatorState(target_ma=20.0, adaptive=False, gain_codes_per_ma=50.0)
    for _ in range(20):
        st = regulate_step(st, plant_current_ma(st.code, 10_000.0), FB)
    assert st.code == -127
    assert st.saturated
    assert st.acc == -127.0
    # back off the target: recovery starts immediately because acc never wound up
    st = regulate_step(st, 20.0, FB)
    assert st.code > -127 or not st.saturated


def test_step_load_change_recovers_monotonically():
    trace = run_loop(5_000.0, 10.0, pulses=10)
    st = RegulatorState(target_ma=10.0, code=trace[-1])
    codes = [st.code]
    for _ in range(10):
        st = regulate_step(st, plant_current_ma(st.code, 2_000.0), FB)
        codes.append(st.code)
    # new equilibrium needs less voltage: codes move up, monotone, overshoot <= 2
    equilibrium = codes[-1]
    assert abs(plant_current_ma(equilibrium, 2_000.0) - 10.0) <= \
        flyback.step_resolution(FB) / 2.0 / 2_001.0 * 1e3
    diffs = [b - a for a, b in zip(codes, codes[1:]) if b != a]
    assert all(d > 0 for d in diffs)
    assert max(codes) <= equilibrium + 2


def test_regulate_step_rejects_negative_measurement():
    with pytest.raises(ValueError):
        regulate_step(RegulatorState(target_ma=1.0), -1.0, FB)


def test_phase1_fraction():
    assert phase1_fraction(Mode.SYMMETRIC) == 0.5
    assert phase1_fraction(Mode.ASYM_1_2) == pytest.approx(1 / 3)
    assert phase1_fraction(Mode.ASYM_2_1) == pytest.approx(2 / 3)


def test_steady_state_error_bound():
    err = steady_state_error(FB, 5_000.0, Mode.SYMMETRIC, 10.0)
    bound = flyback.step_resolution(FB) / 2.0 / 5_000.0 * 1e3
    assert abs(err) <= bound + 1e-9
    assert abs(err) <= 0.046


def test_zero_target_error_limited_by_voltage_floor():
    # output can't go below 3.5 V, so zero current is unreachable on a finite load
    err = steady_state_error(FB, 5_000.0, Mode.SYMMETRIC, 0.0)
    floor_ma = 0.5 * 3.5 / 5_000.0 * 1e3
    assert err == pytest.approx(-floor_ma, rel=1e-9)
    assert abs(err) <= 3.5 / 2.0 / 5_000.0 * 1e3 + 1e-12


def test_open_load_has_no_current():
    assert steady_state_error(FB, math.inf, Mode.SYMMETRIC, 0.0) == 0.0
    with pytest.raises(UnreachableTargetError):
        steady_state_error(FB, math.inf, Mode.SYMMETRIC, 1.0)


def test_steady_state_error_unreachable():
    with pytest.raises(UnreachableTargetError):
        steady_state_error(FB, 10_000.0, Mode.SYMMETRIC, 20.0)
