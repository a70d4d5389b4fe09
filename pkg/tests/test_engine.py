import dataclasses
import math
import random

import numpy as np
import pytest

from scstim import flyback
from scstim.engine import (EdgeNotResolvedError, ProtocolError,
                           RegulationConfig, SamplePolicy, SimConfig,
                           default_sample_policy, edge_tau, measure_rise_time,
                           oracle_simulate, simulate)
from scstim.load import LoadModel
from scstim.params import Mode, StimProtocol, Topology
from scstim.sc_core import SwitchTiming

FB120 = flyback.preset("paper_120")


def make_cfg(mode=Mode.SYMMETRIC, code=-127, f_hz=50.0, t1=300e-6, train=2,
             load=None, timing=None, gap=50e-6, rec=10e-6, topology=Topology.BIPHASIC,
             regulation=None, fb=None):
    proto = StimProtocol(topology=topology, mode=mode, voltage_code=code,
                         frequency_hz=f_hz, phase1_width_s=t1,
                         interphase_gap_s=gap, recovery_gap_s=rec,
                         train_length=train)
    return SimConfig(protocol=proto, flyback=fb or FB120,
                     load=load or LoadModel.resistive(6_000.0),
                     timing=timing or SwitchTiming(),
                     regulation=regulation or RegulationConfig())


def test_symmetric_peak_current_and_charge_balance():
    w, stats = simulate(make_cfg())
    # 60 V phase amplitude into 6 kOhm behind 1 ohm switch resistance
    assert stats.peak_i_ma == pytest.approx(60.0 / 6_001.0 * 1e3, rel=1e-6)
    assert stats.peak_i_ma == pytest.approx(9.998, abs=1e-3)
    assert stats.peak_v_out == pytest.approx(120.0, abs=1e-9)
    assert stats.worst_net_fraction < 1e-3


def phase_amplitude_ma(w, label):
    """Settled current amplitude of a phase: last sample inside the window."""
    idx = [i for i in range(len(w)) if w.phase[i] == label]
    return abs(w.i_load_ma[idx[-1]])


def test_asym_1_2_current_ratio_and_widths():
    w, stats = simulate(make_cfg(mode=Mode.ASYM_1_2, t1=400e-6))
    i1 = phase_amplitude_ma(w, "phase1")
    i2 = phase_amplitude_ma(w, "phase2")
    assert i2 / i1 == pytest.approx(2.0, rel=1e-6)
    closes2 = [t for t, sw, c in w.events if sw == "s2" and c]
    opens2 = [t for t, sw, c in w.events if sw == "s2" and not c]
    width2 = opens2[0] - closes2[0]
    assert width2 == pytest.approx(200e-6, rel=1e-3)
    assert stats.worst_net_fraction < 1e-3


def test_asym_2_1_mirrors_the_split():
    w, _ = simulate(make_cfg(mode=Mode.ASYM_2_1))
    i1 = phase_amplitude_ma(w, "phase1")
    i2 = phase_amplitude_ma(w, "phase2")
    assert i1 / i2 == pytest.approx(2.0, rel=1e-6)
    assert w.k2.any() and not w.k1.any()


def test_empty_train():
    w, stats = simulate(make_cfg(train=0))
    assert len(w) == 0
    assert stats.pulses == []
    assert stats.peak_i_ma == 0.0
    assert stats.rise_time_s is None


def test_monophasic_has_single_phase():
    w, stats = simulate(make_cfg(topology=Topology.MONOPHASIC))
    assert "phase2" not in w.phase
    assert all(not s for s in w.s2)
    assert (w.i_load_ma >= -1e-12).all()


def test_invalid_protocol_propagates():
    with pytest.raises(ProtocolError):
        simulate(make_cfg(f_hz=20_000.0))


def test_no_sample_has_both_switches_closed():
    for mode in (Mode.SYMMETRIC, Mode.ASYM_1_2, Mode.ASYM_2_1):
        w, _ = simulate(make_cfg(mode=mode, gap=0.0))
        assert not (w.s1 & w.s2).any()


def test_open_intervals_carry_no_current_into_resistive_load():
    w, _ = simulate(make_cfg())
    idle = ~w.s1 & ~w.s2
    assert idle.any()
    assert np.all(w.i_load_ma[idle] == 0.0)
    assert np.all(w.v_load[idle] == 0.0)


def test_time_axis_strictly_increasing_and_labels_consistent():
    w, _ = simulate(make_cfg(mode=Mode.ASYM_1_2))
    assert (np.diff(w.t) > 0).all()
    for i in range(len(w)):
        if w.phase[i] == "phase1":
            assert w.s1[i] and not w.s2[i]
        elif w.phase[i] == "phase2":
            assert w.s2[i] and not w.s1[i]
        else:
            assert not w.s1[i] and not w.s2[i]


def test_determinism_bit_identical():
    cfg = make_cfg(mode=Mode.ASYM_2_1, load=LoadModel.randles(2_000.0, 50_000.0, 100e-9))
    w1, s1 = simulate(cfg)
    w2, s2 = simulate(cfg)
    assert np.array_equal(w1.t, w2.t)
    assert np.array_equal(w1.v_load, w2.v_load)
    assert np.array_equal(w1.i_load_ma, w2.i_load_ma)
    assert s1.worst_net_fraction == s2.worst_net_fraction


def test_pulse_starts_follow_frequency():
    for f_hz, t1 in ((1.0, 300e-6), (1_000.0, 100e-6), (10_000.0, 20e-6)):
        cfg = make_cfg(f_hz=f_hz, t1=t1, train=3, gap=5e-6, rec=5e-6)
        w, _ = simulate(cfg)
        policy = default_sample_policy(cfg)
        periods = np.diff(w.pulse_starts)
        assert np.all(np.abs(periods - 1.0 / f_hz) <= policy.bulk_dt)
        for k, t0 in enumerate(w.pulse_starts):
            assert t0 == pytest.approx(k / f_hz, abs=policy.bulk_dt)


def test_stack_voltage_settles_over_early_pulses():
    # at 10 kHz the 100 us settling constant is visible pulse to pulse
    cfg = make_cfg(f_hz=10_000.0, t1=20e-6, gap=5e-6, rec=5e-6, train=8)
    _, stats = simulate(cfg)
    v = [ps.v_stack for ps in stats.pulses]
    assert all(b > a for a, b in zip(v, v[1:]))
    assert v[0] == pytest.approx(120.0 * (1 - math.exp(-1)), rel=1e-9)
    assert v[-1] < 120.0


def test_measured_rise_time_matches_calibration():
    w, stats = simulate(make_cfg(load=LoadModel.resistive(1_000.0)))
    assert stats.rise_time_s == pytest.approx(12.15e-9, rel=0.05)


def test_rise_time_scales_with_c_par():
    base_cfg = make_cfg(load=LoadModel.resistive(1_000.0))
    _, base = simulate(base_cfg)
    halved = make_cfg(load=LoadModel.resistive(1_000.0),
                      timing=SwitchTiming(c_par=5.28e-9 / 2))
    _, half = simulate(halved)
    assert half.rise_time_s == pytest.approx(base.rise_time_s / 2, rel=0.05)


def test_zero_parasitic_gives_step_edge():
    cfg = make_cfg(timing=SwitchTiming(c_par=0.0))
    w, stats = simulate(cfg)
    assert stats.rise_time_s == 0.0


def test_rise_time_needs_resolved_edge():
    w, _ = simulate(make_cfg())
    starved = dataclasses.replace(w)
    starved.events = [e for e in w.events if e[1] != "s1"]
    with pytest.raises(EdgeNotResolvedError):
        measure_rise_time(starved)


def test_sample_policy_invariants_enforced():
    cfg = make_cfg()
    tau = edge_tau(cfg.timing, cfg.load)
    bad_window = dataclasses.replace(cfg, sample_policy=SamplePolicy(
        dense_edge_window=5 * tau, bulk_dt=1e-6))
    with pytest.raises(ValueError):
        simulate(bad_window)
    bad_bulk = dataclasses.replace(cfg, sample_policy=SamplePolicy(
        dense_edge_window=20 * tau, bulk_dt=cfg.protocol.phase1_width_s))
    with pytest.raises(ValueError):
        simulate(bad_bulk)


def test_compliance_limit_reported():
    reg = RegulationConfig(enabled=True, target_ma=20.0)
    cfg = make_cfg(code=0, load=LoadModel.resistive(10_000.0), train=10, regulation=reg)
    _, stats = simulate(cfg)
    assert stats.compliance_limited
    assert stats.final_code == -127
    assert stats.peak_v_out <= FB120.v_out_max_clamp


def test_regulation_code_trace_in_summary():
    reg = RegulationConfig(enabled=True, target_ma=10.0)
    cfg = make_cfg(code=0, load=LoadModel.resistive(5_000.0), train=30, regulation=reg)
    _, stats = simulate(cfg)
    assert stats.code_trace[0] == 0
    assert stats.final_code == -83
    assert abs(stats.pulses[-1].peak_i_ma - 10.0) <= 0.046


# -- oracle equivalence ------------------------------------------------------

def oracle_cfg(rng: random.Random) -> tuple[SimConfig, float]:
    mode = rng.choice((Mode.SYMMETRIC, Mode.ASYM_1_2, Mode.ASYM_2_1))
    if rng.random() < 0.5:
        load = LoadModel.resistive(rng.uniform(500.0, 10_000.0))
    else:
        load = LoadModel.randles(rng.uniform(500.0, 4_000.0),
                                 rng.uniform(5_000.0, 80_000.0),
                                 rng.uniform(20e-9, 300e-9))
    timing = SwitchTiming(r_on=rng.uniform(0.5, 2.0), c_par=rng.uniform(1e-9, 6e-9))
    t1 = rng.uniform(1e-6, 2.5e-6)
    gap = rng.uniform(0.2e-6, 0.6e-6)
    rec = rng.uniform(0.1e-6, 0.4e-6)
    cfg = make_cfg(mode=mode, code=rng.randint(-127, 127), f_hz=10_000.0,
                   t1=t1, gap=gap, rec=rec, train=1, load=load, timing=timing)
    t2 = {Mode.SYMMETRIC: t1, Mode.ASYM_1_2: t1 / 2, Mode.ASYM_2_1: 2 * t1}[mode]
    t_end = t1 + gap + t2 + rec + 0.5e-6
    return cfg, t_end


def oracle_deviation(cfg: SimConfig, t_end: float) -> float:
    tau = edge_tau(cfg.timing, cfg.load)
    dt = tau / 60.0
    wo = oracle_simulate(cfg, dt, t_end=t_end)
    wc, _ = simulate(cfg, sample_times=wo.t)
    assert np.array_equal(wo.t, wc.t)
    v_stack = max(float(np.max(wc.v_out)), 1e-12)
    return float(np.max(np.abs(wo.v_load - wc.v_load))) / v_stack


def test_oracle_matches_closed_form_smoke():
    rng = random.Random(7)
    for _ in range(5):
        cfg, t_end = oracle_cfg(rng)
        assert oracle_deviation(cfg, t_end) < 1e-4


def test_oracle_rejects_coarse_step():
    cfg = make_cfg()
    tau = edge_tau(cfg.timing, cfg.load)
    with pytest.raises(ValueError):
        oracle_simulate(cfg, tau, t_end=1e-3)


def test_zero_volt_stack_is_flat_in_both_paths():
    fb_zero = dataclasses.replace(FB120, v_out_max_clamp=0.0)
    cfg = make_cfg(f_hz=10_000.0, t1=2e-6, gap=0.5e-6, rec=0.5e-6, train=1, fb=fb_zero)
    tau = edge_tau(cfg.timing, cfg.load)
    wo = oracle_simulate(cfg, tau / 60.0, t_end=6e-6)
    wc, _ = simulate(cfg, sample_times=wo.t)
    assert np.all(wo.v_load == 0.0)
    assert np.all(wc.v_load == 0.0)
    assert np.all(wo.i_load_ma == 0.0)


def test_memoryless_interval_agrees_to_machine_precision():
    # no parasitic, resistive load: both paths are algebraic
    cfg = make_cfg(f_hz=10_000.0, t1=2e-6, gap=0.5e-6, rec=0.5e-6, train=1,
                   timing=SwitchTiming(c_par=0.0))
    wo = oracle_simulate(cfg, 1e-8, t_end=6e-6)
    wc, _ = simulate(cfg, sample_times=wo.t)
    assert np.array_equal(wo.v_load, wc.v_load)
    assert np.array_equal(wo.i_load_ma, wc.i_load_ma)
