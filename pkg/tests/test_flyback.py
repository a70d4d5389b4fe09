import math
import random

import pytest

from scstim import flyback
from scstim.flyback import (calibrate_from_endpoints, code_to_voltage, preset,
                            settle, step_resolution, voltage_to_code)


def paper_model():
    return calibrate_from_endpoints(3.5, 120.0, 200e-6, 1.23)


def test_calibration_solves_divider_pair():
    m = paper_model()
    # independent algebra: subtracting the two endpoint equations isolates r1
    assert m.r1 == pytest.approx((120.0 - 3.5) / (2 * 200e-6), rel=1e-12)
    assert m.r1 == pytest.approx(291_250.0, rel=1e-12)
    assert m.r2 == pytest.approx(5_919.3242, abs=1e-3)


def test_calibration_back_substitution_oracle():
    # the calibrated model must reproduce both endpoints through the full law
    m = paper_model()
    assert abs(code_to_voltage(m, 127) - 3.5) < 1e-9
    assert abs(code_to_voltage(m, -127) - 120.0) < 1e-9


def test_calibration_rejects_degenerate_endpoints():
    with pytest.raises(ValueError):
        calibrate_from_endpoints(100.0, 100.0)
    with pytest.raises(ValueError):
        calibrate_from_endpoints(120.0, 3.5)
    with pytest.raises(ValueError):
        # midpoint below the reference would force r2 <= 0
        calibrate_from_endpoints(0.5, 1.5, 200e-6, 1.23)
    with pytest.raises(ValueError):
        calibrate_from_endpoints(3.5, 120.0, i_fs=0.0)


def test_full_scale_codes_hit_endpoints():
    m = paper_model()
    assert code_to_voltage(m, 127) == pytest.approx(3.5, abs=1e-9)
    assert code_to_voltage(m, -127) == pytest.approx(120.0, abs=1e-9)
    assert code_to_voltage(m, 0) == pytest.approx(61.75, abs=1e-9)


def test_out_of_range_code_rejected():
    m = paper_model()
    with pytest.raises(ValueError):
        code_to_voltage(m, 128)
    with pytest.raises(ValueError):
        code_to_voltage(m, -128)


def test_step_resolution_near_published_value():
    m = paper_model()
    step = step_resolution(m)
    assert step == pytest.approx(m.r1 * m.i_dac_full_scale / 127, rel=1e-12)
    # 254 intervals over 116.5 V; the 0.457 figure used a 255 divisor
    assert abs(step - 0.457) < 0.005


def test_step_resolution_half_volt_for_127v_span():
    # a 127 V endpoint spread gives exactly 127/254 = 0.5 V per code
    m = calibrate_from_endpoints(4.0, 131.0, 200e-6, 1.23)
    assert step_resolution(m) == pytest.approx(0.5, rel=1e-12)


def test_step_scales_linearly_with_r1():
    m = paper_model()
    doubled = flyback.FlybackModel(r1=2 * m.r1, r2=m.r2)
    assert step_resolution(doubled) == pytest.approx(2 * step_resolution(m), rel=1e-12)


def test_mapping_is_affine_and_monotone_decreasing():
    m = paper_model()
    step = step_resolution(m)
    volts = [code_to_voltage(m, c) for c in range(-127, 128)]
    for i in range(len(volts) - 1):
        assert volts[i] >= volts[i + 1]
    rng = random.Random(11)
    for _ in range(200):
        c1, c2 = rng.randint(-127, 127), rng.randint(-127, 127)
        dv = code_to_voltage(m, c1) - code_to_voltage(m, c2)
        assert dv == pytest.approx((c2 - c1) * step, abs=1e-9)


def test_voltage_code_round_trip_within_one_step():
    m = paper_model()
    step = step_resolution(m)
    rng = random.Random(23)
    for _ in range(300):
        v_target = rng.uniform(3.5, 120.0)
        c = voltage_to_code(m, v_target)
        assert abs(code_to_voltage(m, c) - v_target) <= step / 2 + 1e-12


def test_clamp_holds_at_the_ceiling():
    m = calibrate_from_endpoints(3.5, 200.0, v_out_max_clamp=135.0)
    assert code_to_voltage(m, -127) == 135.0


def test_settle_behavior():
    m = paper_model()
    assert settle(m, 0.0, 100.0, 0.0) == 0.0
    one_tau = settle(m, 0.0, 100.0, m.settle_tau)
    assert one_tau == pytest.approx(100.0 * (1 - math.exp(-1)), rel=1e-12)
    ideal = flyback.FlybackModel(r1=m.r1, r2=m.r2, settle_tau=0.0)
    assert settle(ideal, 3.0, 80.0, 1e-9) == 80.0
    with pytest.raises(ValueError):
        settle(m, 0.0, 1.0, -1.0)


def test_presets():
    p120 = preset("paper_120")
    assert code_to_voltage(p120, -127) == pytest.approx(120.0, abs=1e-9)
    p135 = preset("table1_135")
    assert code_to_voltage(p135, -127) == pytest.approx(135.0, abs=1e-9)
    assert code_to_voltage(p135, 127) == pytest.approx(3.5, abs=1e-9)
    with pytest.raises(KeyError):
        preset("nope")
