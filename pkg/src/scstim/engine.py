"""Event-driven transient simulator for the stimulator output stage.

The pulse train is compiled into a timeline of switching events; every
inter-event interval is a (0, 1 or 2)-state linear circuit with a constant
drive, which is solved in closed form (exponentials through the interval's
eigenmodes).  Numeric integration exists only as a test oracle
(:func:`oracle_simulate`).

Circuit per interval: the selected stack tap drives the output node through
the closed switch's r_on; the node carries the parasitic c_par to the return
electrode and the electrode-tissue load hangs across the same pair.  With
both phase switches open the output is isolated: no load current flows, the
parasitic capacitor holds its charge within a pulse, and a Randles load
self-discharges through its own faradaic branch.  Between pulses the stack
is re-topped by the supply and the output node is bled back to rest; only
the tissue double-layer voltage persists across pulse boundaries.

Two time scales coexist (ns edges inside s-scale trains), so sampling is
dense only inside a short window after each closing edge and coarse
elsewhere; long idle stretches get endpoint samples only.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field, replace

import numpy as np

from . import flyback as fb_mod
from .control import RegulatorState, regulate_step
from .flyback import CODE_SPAN, FlybackModel
from .load import LoadKind, LoadModel, dc_resistance
from .params import (Mode, StimProtocol, Topology, phase2_width,
                     validate_protocol)
from .sc_core import ScState, SwitchCommand, SwitchTiming, divider_split, transition

PHASE_IDLE = "idle"
PHASE_1 = "phase1"
PHASE_GAP = "gap"
PHASE_2 = "phase2"
PHASE_RECOVERY = "recovery"


@dataclass(frozen=True)
class SamplePolicy:
    dense_edge_window: float     # dense sampling span after a closing edge, s
    bulk_dt: float               # coarse sampling stride elsewhere, s
    dense_points: int = 160      # samples inside the dense window


@dataclass(frozen=True)
class RegulationConfig:
    enabled: bool = False
    target_ma: float = 0.0
    gain_codes_per_ma: float = 2.0
    adaptive: bool = True


@dataclass(frozen=True)
class SimConfig:
    protocol: StimProtocol
    flyback: FlybackModel
    load: LoadModel
    timing: SwitchTiming = SwitchTiming()
    sample_policy: SamplePolicy | None = None    # None -> derived defaults
    regulation: RegulationConfig = RegulationConfig()
    flyback_preset: str | None = None
    load_preset: str | None = None


@dataclass
class Waveform:
    t: np.ndarray
    v_out: np.ndarray
    v_load: np.ndarray
    i_load_ma: np.ndarray
    phase: list[str]
    s1: np.ndarray
    s2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    events: list[tuple[float, str, bool]] = field(default_factory=list)
    pulse_starts: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class PulseStats:
    index: int
    t_start: float
    code: int
    v_stack: float
    q1_c: float          # phase-1 delivered charge, coulombs
    q2_c: float          # phase-2 delivered charge, coulombs
    net_q_c: float
    peak_i_ma: float


@dataclass
class SummaryStats:
    pulses: list[PulseStats]
    peak_v_out: float = 0.0
    peak_i_ma: float = 0.0
    rise_time_s: float | None = None
    worst_net_fraction: float = 0.0
    code_trace: list[int] = field(default_factory=list)
    final_code: int | None = None
    compliance_limited: bool = False
    regulator: RegulatorState | None = None


class ProtocolError(ValueError):
    """The protocol failed envelope validation."""


class EdgeNotResolvedError(ValueError):
    """The sample grid did not capture the requested edge."""


# ---------------------------------------------------------------------------
# Closed-form interval pieces


def edge_tau(timing: SwitchTiming, load: LoadModel) -> float:
    """Fast time constant of a closing edge: (r_on || r_dc) * c_par."""
    r_dc = dc_resistance(load)
    return timing.r_on * r_dc / (timing.r_on + r_dc) * timing.c_par


class _Piece:
    """One inter-event interval [t0, t1) with its closed-form solution.

    State vector is (v_p, v_c): parasitic-node voltage and Randles
    double-layer voltage.  Unused entries stay constant at their input value.
    """

    __slots__ = ("t0", "t1", "label", "s1", "s2", "k1", "k2", "v_stack",
                 "emf", "r_on", "c_par", "load", "x0", "_kind",
                 "_tau", "_vinf", "_modal", "edge_start", "reset_node_at_end")

    def __init__(self, t0, t1, label, s1, s2, k1, k2, v_stack,
                 emf, r_on, c_par, load: LoadModel, x0, edge_start=False):
        self.t0, self.t1, self.label = t0, t1, label
        self.s1, self.s2, self.k1, self.k2 = s1, s2, k1, k2
        self.v_stack = v_stack
        self.emf, self.r_on, self.c_par = emf, r_on, c_par
        self.load = load
        self.x0 = x0
        self.edge_start = edge_start
        self.reset_node_at_end = False
        self._tau = self._vinf = self._modal = None
        self._classify()

    # kinds: "o_res", "o_ran", "c_res0", "c_res1", "c_ran1", "c_ran2"
    def _classify(self):
        randles = self.load.kind is LoadKind.RANDLES
        if self.emf is None:
            self._kind = "o_ran" if randles else "o_res"
            if randles:
                self._tau = self.load.r_p * self.load.c_dl
            return
        r_s = self.load.r_s
        if not randles:
            if self.c_par == 0.0:
                self._kind = "c_res0"
            else:
                self._kind = "c_res1"
                self._tau = self.c_par * (self.r_on * r_s) / (self.r_on + r_s)
                self._vinf = self.emf * r_s / (self.r_on + r_s)
            return
        r_p, c_dl = self.load.r_p, self.load.c_dl
        if self.c_par == 0.0:
            self._kind = "c_ran1"
            r_ser = self.r_on + r_s
            self._tau = c_dl * (r_ser * r_p) / (r_ser + r_p)
            self._vinf = self.emf * r_p / (r_ser + r_p)
            return
        self._kind = "c_ran2"
        self._modal = _Modal2(*self.ode(), self.x0)

    def ode(self):
        """(A, b) of x' = A x + b for the active states; None when static."""
        r_s = self.load.r_s
        if self._kind == "o_res" or self._kind == "c_res0":
            return None
        if self._kind == "o_ran":
            a = -1.0 / (self.load.r_p * self.load.c_dl)
            return ((a,),), (0.0,)
        if self._kind == "c_res1":
            a = -(1.0 / self.r_on + 1.0 / r_s) / self.c_par
            return ((a,),), (self.emf / (self.r_on * self.c_par),)
        if self._kind == "c_ran1":
            r_ser = self.r_on + r_s
            a = -(1.0 / r_ser + 1.0 / self.load.r_p) / self.load.c_dl
            return ((a,),), (self.emf / (r_ser * self.load.c_dl),)
        g_on, g_s, g_p = 1.0 / self.r_on, 1.0 / r_s, 1.0 / self.load.r_p
        cp, cd = self.c_par, self.load.c_dl
        A = ((-(g_on + g_s) / cp, g_s / cp),
             (g_s / cd, -(g_s + g_p) / cd))
        b = (self.emf * g_on / cp, 0.0)
        return A, b

    @property
    def length(self):
        return self.t1 - self.t0

    def fastest_tau(self):
        if self._kind in ("o_res", "c_res0"):
            return None
        if self._kind == "c_ran2":
            return self._modal.fastest_tau()
        return self._tau

    def state_at(self, dt):
        v_p, v_c = self.x0
        if self._kind in ("o_res", "c_res0"):
            return v_p, v_c
        if self._kind == "o_ran":
            return v_p, v_c * math.exp(-dt / self._tau)
        if self._kind == "c_res1":
            return self._vinf + (v_p - self._vinf) * math.exp(-dt / self._tau), v_c
        if self._kind == "c_ran1":
            return v_p, self._vinf + (v_c - self._vinf) * math.exp(-dt / self._tau)
        return self._modal.state_at(dt)

    def end_state(self):
        v_p, v_c = self.state_at(self.length)
        if self._kind == "c_res0":
            # algebraic node: nothing stored on the (absent) parasitic
            v_p = 0.0
        return v_p, v_c

    def outputs_from_state(self, state):
        """(v_load, i_load in amps) given the state vector."""
        v_p, v_c = state
        r_s = self.load.r_s
        if self._kind == "o_res":
            return 0.0, 0.0
        if self._kind == "o_ran":
            return v_c, 0.0
        if self._kind == "c_res0":
            v_node = self.emf * r_s / (self.r_on + r_s)
            return v_node, v_node / r_s
        if self._kind == "c_res1":
            return v_p, v_p / r_s
        if self._kind == "c_ran1":
            i = (self.emf - v_c) / (self.r_on + r_s)
            return self.emf - i * self.r_on, i
        return v_p, (v_p - v_c) / r_s

    def outputs_at(self, dt):
        return self.outputs_from_state(self.state_at(dt))

    def charge(self, dt=None):
        """Exact integral of the load current over [0, dt], coulombs."""
        if dt is None:
            dt = self.length
        r_s = self.load.r_s
        if self._kind in ("o_res", "o_ran"):
            return 0.0
        if self._kind == "c_res0":
            return self.emf / (self.r_on + r_s) * dt
        if self._kind == "c_res1":
            v_p0 = self.x0[0]
            integral = self._vinf * dt + (v_p0 - self._vinf) * self._tau * (
                1.0 - math.exp(-dt / self._tau))
            return integral / r_s
        if self._kind == "c_ran1":
            v_c0 = self.x0[1]
            int_vc = self._vinf * dt + (v_c0 - self._vinf) * self._tau * (
                1.0 - math.exp(-dt / self._tau))
            return (self.emf * dt - int_vc) / (self.r_on + r_s)
        int_vp, int_vc = self._modal.state_integral(dt)
        return (int_vp - int_vc) / r_s


class _Modal2:
    """Closed-form solution of a 2-state x' = A x + b via real eigenmodes.

    The off-diagonal product of the RC network is positive, so the
    discriminant (a11-a22)^2 + 4*a12*a21 is strictly positive and the
    eigenvalues are always real and distinct.
    """

    __slots__ = ("x_ss", "lam1", "lam2", "u1", "u2", "a1", "a2")

    def __init__(self, A, b, x0):
        (a11, a12), (a21, a22) = A
        det = a11 * a22 - a12 * a21
        self.x_ss = ((-b[0] * a22 + b[1] * a12) / det,
                     (-b[1] * a11 + b[0] * a21) / det)
        tr = a11 + a22
        disc = (a11 - a22) ** 2 + 4.0 * a12 * a21
        sq = math.sqrt(disc)
        self.lam1 = 0.5 * (tr - sq)
        self.lam2 = 0.5 * (tr + sq)
        self.u1 = (a12, self.lam1 - a11)
        self.u2 = (a12, self.lam2 - a11)
        d0 = x0[0] - self.x_ss[0]
        d1 = x0[1] - self.x_ss[1]
        det_m = a12 * (self.lam2 - self.lam1)
        self.a1 = (d0 * (self.lam2 - a11) - a12 * d1) / det_m
        self.a2 = (a12 * d1 - d0 * (self.lam1 - a11)) / det_m

    def fastest_tau(self):
        return 1.0 / abs(self.lam1)

    def state_at(self, dt):
        e1 = self.a1 * math.exp(self.lam1 * dt)
        e2 = self.a2 * math.exp(self.lam2 * dt)
        return (self.x_ss[0] + e1 * self.u1[0] + e2 * self.u2[0],
                self.x_ss[1] + e1 * self.u1[1] + e2 * self.u2[1])

    def state_integral(self, dt):
        g1 = self.a1 * (math.exp(self.lam1 * dt) - 1.0) / self.lam1
        g2 = self.a2 * (math.exp(self.lam2 * dt) - 1.0) / self.lam2
        return (self.x_ss[0] * dt + g1 * self.u1[0] + g2 * self.u2[0],
                self.x_ss[1] * dt + g1 * self.u1[1] + g2 * self.u2[1])


# ---------------------------------------------------------------------------
# Timeline construction


def default_sample_policy(cfg: SimConfig) -> SamplePolicy:
    p = cfg.protocol
    tau = edge_tau(cfg.timing, cfg.load)
    widths = [p.phase1_width_s]
    t2 = phase2_width(p)
    if t2 > 0:
        widths.append(t2)
    return SamplePolicy(dense_edge_window=20.0 * tau, bulk_dt=min(widths) / 50.0)


def _check_policy(policy: SamplePolicy, cfg: SimConfig):
    tau = edge_tau(cfg.timing, cfg.load)
    if tau > 0 and policy.dense_edge_window < 10.0 * tau:
        raise ValueError(
            f"dense_edge_window {policy.dense_edge_window:g} s is under 10x the "
            f"edge time constant {tau:g} s")
    p = cfg.protocol
    limit = p.phase1_width_s / 20.0
    t2 = phase2_width(p)
    if t2 > 0:
        limit = min(limit, t2 / 20.0)
    if policy.bulk_dt > limit:
        raise ValueError(f"bulk_dt {policy.bulk_dt:g} s exceeds phase width / 20 = {limit:g} s")
    if policy.dense_points < 8:
        raise ValueError("dense_points must be at least 8")


@dataclass
class _Timeline:
    pieces: list[_Piece]
    events: list[tuple[float, str, bool]]
    pulse_starts: list[float]
    pulse_stats: list[PulseStats]
    code_trace: list[int]
    regulator: RegulatorState | None
    compliance_limited: bool
    t_end: float


def _initial_state(cfg: SimConfig):
    v_c = cfg.load.v_c if cfg.load.kind is LoadKind.RANDLES else 0.0
    return 0.0, v_c


def _build_timeline(cfg: SimConfig, policy: SamplePolicy) -> _Timeline:
    p = cfg.protocol
    report = validate_protocol(p)
    if not report.ok:
        raise ProtocolError("; ".join(str(v) for v in report.violations))

    timing = cfg.timing
    period = 1.0 / p.frequency_hz
    don, doff = timing.gate_delay_on, timing.gate_delay_off
    biphasic = p.topology is Topology.BIPHASIC
    want_k1 = p.mode is Mode.ASYM_1_2
    want_k2 = p.mode is Mode.ASYM_2_1
    t1w, t2w = p.phase1_width_s, phase2_width(p)
    gap, rec = p.interphase_gap_s, p.recovery_gap_s

    events: list[tuple[float, str, bool]] = []
    pieces: list[_Piece] = []
    pulse_starts: list[float] = []
    stats: list[PulseStats] = []
    code_trace: list[int] = []

    sc = ScState(c_unit=10e-6)
    if want_k1 or want_k2:
        evs, sc = transition(sc, SwitchCommand(False, False, k1=want_k1, k2=want_k2), timing)
        events.extend((0.0 + e.t, e.switch, e.close) for e in evs)

    reg: RegulatorState | None = None
    if cfg.regulation.enabled:
        reg = RegulatorState(
            target_ma=cfg.regulation.target_ma,
            code=p.voltage_code,
            gain_codes_per_ma=cfg.regulation.gain_codes_per_ma,
            adaptive=cfg.regulation.adaptive,
        )
    code = p.voltage_code
    compliance = False

    x = _initial_state(cfg)
    v_stack = 0.0
    t_cursor = 0.0

    def add_piece(t0, t1, label, s1, s2, emf, v_stack_now, edge_start=False):
        nonlocal x
        if t1 <= t0:
            return None
        piece = _Piece(t0, t1, label, s1, s2, sc.k1, sc.k2, v_stack_now,
                       emf, timing.r_on, timing.c_par, cfg.load, x,
                       edge_start=edge_start)
        pieces.append(piece)
        x = piece.end_state()
        return piece

    for k in range(p.train_length):
        t0 = k * period
        code_trace.append(code)
        v_target = fb_mod.code_to_voltage(cfg.flyback, code)
        v_stack = fb_mod.settle(cfg.flyback, v_stack, v_target, period)
        v1, v2 = divider_split(sc.k1, sc.k2, v_stack)
        pulse_starts.append(t0)

        close1 = t0 + don
        open1 = t0 + t1w
        add_piece(t_cursor, close1, PHASE_IDLE, False, False, None, v_stack)
        events.append((close1, "s1", True))
        ph1 = add_piece(close1, open1, PHASE_1, True, False, v1, v_stack, edge_start=True)
        events.append((open1, "s1", False))

        q1 = ph1.charge() if ph1 is not None else 0.0
        q2 = 0.0
        ph2 = None
        if biphasic:
            close2 = max(t0 + t1w + gap + don, open1 + doff + don)
            open2 = t0 + t1w + gap + t2w
            add_piece(open1, close2, PHASE_GAP, False, False, None, v_stack)
            if close2 < open2:
                events.append((close2, "s2", True))
                ph2 = add_piece(close2, open2, PHASE_2, False, True, -v2, v_stack,
                                edge_start=True)
                events.append((open2, "s2", False))
                q2 = ph2.charge()
            rec_start = open2
        else:
            rec_start = open1
        add_piece(rec_start, rec_start + rec, PHASE_RECOVERY, False, False, None, v_stack)
        pulse_end = t0 + period
        add_piece(rec_start + rec, pulse_end, PHASE_IDLE, False, False, None, v_stack)
        t_cursor = pulse_end
        # between pulses the stack is re-topped and the isolated output node
        # is bled back to rest; the tissue state (v_c) is the only memory
        # that crosses a pulse boundary
        if pieces:
            pieces[-1].reset_node_at_end = True
        x = (0.0, x[1])

        peak_i = _pulse_peak_current(ph1, ph2, policy)
        stats.append(PulseStats(index=k, t_start=t0, code=code, v_stack=v_stack,
                                q1_c=q1, q2_c=q2, net_q_c=q1 + q2, peak_i_ma=peak_i))

        if reg is not None:
            sensed = _phase1_peak_current(ph1, policy)
            reg = regulate_step(reg, sensed, cfg.flyback)
            code = reg.code
            if reg.saturated and reg.code == -CODE_SPAN:
                compliance = True

    return _Timeline(pieces=pieces, events=events, pulse_starts=pulse_starts,
                     pulse_stats=stats, code_trace=code_trace, regulator=reg,
                     compliance_limited=compliance, t_end=t_cursor)


def _piece_offsets(piece: _Piece, policy: SamplePolicy) -> list[float]:
    """Sample offsets inside one piece: dense after a closing edge, bulk after."""
    L = piece.length
    offsets = [0.0]
    last = 0.0
    if piece.edge_start and policy.dense_edge_window > 0:
        w = min(policy.dense_edge_window, L)
        n = policy.dense_points
        offsets.extend(w * j / n for j in range(1, n + 1))
        last = w
    stride = policy.bulk_dt
    if piece.label == PHASE_IDLE:
        stride = max(stride, L / 8.0)
    t = (math.floor(last / stride) + 1) * stride
    while t < L:
        offsets.append(t)
        t += stride
    # one sample just shy of the boundary keeps plateaus crisp in plots
    pre = L - min(1e-9, L * 1e-3)
    if pre > offsets[-1]:
        offsets.append(pre)
    return offsets


def _phase1_peak_current(ph1: _Piece | None, policy: SamplePolicy) -> float:
    if ph1 is None:
        return 0.0
    peak = 0.0
    for dt in _piece_offsets(ph1, policy):
        _, i = ph1.outputs_at(dt)
        peak = max(peak, abs(i))
    _, i_end = ph1.outputs_at(ph1.length)
    return max(peak, abs(i_end)) * 1e3


def _pulse_peak_current(ph1, ph2, policy) -> float:
    peak = _phase1_peak_current(ph1, policy)
    if ph2 is not None:
        peak = max(peak, _phase1_peak_current(ph2, policy))
    return peak


# ---------------------------------------------------------------------------
# Public operations


def simulate(cfg: SimConfig, sample_times=None) -> tuple[Waveform, SummaryStats]:
    """Run the pulse train and return its sampled waveform and summary.

    With ``sample_times`` the waveform is evaluated exactly at the given
    instants (used by the oracle-equivalence tests); summary statistics are
    always computed from the closed-form solution itself, not from samples.
    """
    policy = cfg.sample_policy or default_sample_policy(cfg)
    _check_policy(policy, cfg)
    tl = _build_timeline(cfg, policy)

    if not tl.pieces:
        w = Waveform(t=np.empty(0), v_out=np.empty(0), v_load=np.empty(0),
                     i_load_ma=np.empty(0), phase=[],
                     s1=np.empty(0, bool), s2=np.empty(0, bool),
                     k1=np.empty(0, bool), k2=np.empty(0, bool),
                     events=tl.events, pulse_starts=np.array(tl.pulse_starts))
        return w, _summarize(w, tl)

    ts, vo, vl, il, ph, s1v, s2v, k1v, k2v = [], [], [], [], [], [], [], [], []

    def emit(piece, t_abs, dt):
        v_load, i_a = piece.outputs_at(dt)
        ts.append(t_abs)
        vo.append(piece.v_stack)
        vl.append(v_load)
        il.append(i_a * 1e3)
        ph.append(piece.label)
        s1v.append(piece.s1)
        s2v.append(piece.s2)
        k1v.append(piece.k1)
        k2v.append(piece.k2)

    if sample_times is None:
        for piece in tl.pieces:
            for off in _piece_offsets(piece, policy):
                t_abs = piece.t0 + off
                if ts and t_abs <= ts[-1]:
                    continue
                emit(piece, t_abs, off)
        # close the record at the end of the train
        last = tl.pieces[-1]
        if not ts or tl.t_end > ts[-1]:
            emit(last, tl.t_end, last.length)
    else:
        starts = [pc.t0 for pc in tl.pieces]
        for t_abs in sample_times:
            if t_abs < starts[0] or t_abs > tl.t_end:
                continue
            idx = bisect_right(starts, t_abs) - 1
            piece = tl.pieces[idx]
            emit(piece, t_abs, t_abs - piece.t0)

    w = Waveform(t=np.array(ts), v_out=np.array(vo), v_load=np.array(vl),
                 i_load_ma=np.array(il), phase=ph,
                 s1=np.array(s1v, bool), s2=np.array(s2v, bool),
                 k1=np.array(k1v, bool), k2=np.array(k2v, bool),
                 events=tl.events, pulse_starts=np.array(tl.pulse_starts))
    return w, _summarize(w, tl)


def _summarize(w: Waveform, tl: _Timeline) -> SummaryStats:
    stats = SummaryStats(pulses=tl.pulse_stats, code_trace=tl.code_trace,
                         final_code=tl.code_trace[-1] if tl.code_trace else None,
                         compliance_limited=tl.compliance_limited,
                         regulator=tl.regulator)
    if tl.pulse_stats:
        stats.peak_v_out = max(ps.v_stack for ps in tl.pulse_stats)
        stats.peak_i_ma = max(ps.peak_i_ma for ps in tl.pulse_stats)
        fractions = [abs(ps.net_q_c) / abs(ps.q1_c)
                     for ps in tl.pulse_stats if ps.q1_c != 0.0]
        stats.worst_net_fraction = max(fractions) if fractions else 0.0
    try:
        stats.rise_time_s = measure_rise_time(w)
    except EdgeNotResolvedError:
        stats.rise_time_s = None
    return stats


def measure_rise_time(w: Waveform) -> float:
    """0-90% rise time of the first phase-1 edge, linearly interpolated.

    Measured from the closing event (where the edge starts moving) to the
    crossing of 90% of the settled in-phase voltage.
    """
    closes = [t for t, sw, close in w.events if sw == "s1" and close]
    opens = [t for t, sw, close in w.events if sw == "s1" and not close]
    if not closes or len(w) == 0:
        raise EdgeNotResolvedError("waveform has no phase-1 edge")
    # events are logged at both command and completion; the edge begins at
    # the latest close record not after the first open
    t_open = min(opens) if opens else w.t[-1]
    t_edge = max(t for t in closes if t <= t_open)
    lo = bisect_left(list(w.t), t_edge)
    hi = bisect_left(list(w.t), t_open)
    if hi - lo < 2:
        raise EdgeNotResolvedError("edge not resolved: fewer than two samples in the edge window")
    seg_t = w.t[lo:hi]
    seg_v = w.v_load[lo:hi]
    baseline = w.v_load[lo - 1] if lo > 0 else 0.0
    settled = seg_v[-1]
    swing = settled - baseline
    if swing == 0.0:
        return 0.0
    threshold = baseline + 0.9 * swing
    above = np.nonzero((seg_v - threshold) * math.copysign(1.0, swing) >= 0.0)[0]
    if len(above) == 0:
        raise EdgeNotResolvedError("edge not resolved: 90% level never crossed in window")
    i = int(above[0])
    if i == 0:
        return 0.0
    v0, v1 = seg_v[i - 1], seg_v[i]
    t_cross = seg_t[i - 1] + (threshold - v0) / (v1 - v0) * (seg_t[i] - seg_t[i - 1])
    return float(t_cross - t_edge)


def oracle_simulate(cfg: SimConfig, dt: float, t_end: float | None = None) -> Waveform:
    """Fixed-step trapezoidal integration of the same switched circuit.

    Test-only reference path: shares the event schedule with the closed-form
    engine but propagates its own state numerically.  ``dt`` must be at most
    a fiftieth of the fastest time constant present; ``t_end`` optionally
    truncates the run (long idle tails are pointless to step through).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    policy = cfg.sample_policy or default_sample_policy(cfg)
    _check_policy(policy, cfg)
    tl = _build_timeline(cfg, policy)
    taus = [tau for pc in tl.pieces if (tau := pc.fastest_tau()) is not None]
    if taus and dt > min(taus) / 50.0:
        raise ValueError(
            f"dt {dt:g} s too coarse: fastest time constant {min(taus):g} s needs dt <= tau/50")

    stop = tl.t_end if t_end is None else min(t_end, tl.t_end)
    ts, vo, vl, il, ph, s1v, s2v, k1v, k2v = [], [], [], [], [], [], [], [], []
    x = list(_initial_state(cfg))

    def emit(piece, t_abs, state):
        v_load, i_a = piece.outputs_from_state(tuple(state))
        ts.append(t_abs)
        vo.append(piece.v_stack)
        vl.append(v_load)
        il.append(i_a * 1e3)
        ph.append(piece.label)
        s1v.append(piece.s1)
        s2v.append(piece.s2)
        k1v.append(piece.k1)
        k2v.append(piece.k2)

    # Samples are right-continuous: each piece emits its own start instant and
    # interior step points, never its end boundary, so jumps at events carry
    # the post-event value exactly like the closed-form path.
    last_piece = None
    for piece in tl.pieces:
        if piece.t0 >= stop:
            break
        seg_end = min(piece.t1, stop)
        length = seg_end - piece.t0
        if length <= 0:
            continue
        last_piece = piece
        emit(piece, piece.t0, x)
        guard = seg_end - dt * 1e-6
        ode = piece.ode()
        if ode is None:
            if piece._kind == "c_res0" and piece.t1 <= stop:
                x[0] = 0.0
            if piece.reset_node_at_end and piece.t1 <= stop:
                x[0] = 0.0
            continue
        A, b = ode
        one_state = len(b) == 1
        # map the piece's state slot: v_p for node dynamics, v_c otherwise
        slot = 0 if piece._kind in ("c_res1",) else 1
        n_full, rem = divmod(length, dt)
        if one_state:
            a = A[0][0]
            beta = b[0]
            y = x[slot]
            den = 1.0 - 0.5 * dt * a
            num = 1.0 + 0.5 * dt * a
            t_abs = piece.t0
            for _ in range(int(n_full)):
                y = (num * y + dt * beta) / den
                t_abs += dt
                x[slot] = y
                if t_abs < guard:
                    emit(piece, t_abs, x)
            if rem > dt * 1e-9:
                x[slot] = ((1.0 + 0.5 * rem * a) * y + rem * beta) / (1.0 - 0.5 * rem * a)
        else:
            (a11, a12), (a21, a22) = A
            b0, b1 = b

            def step(x0, x1, h):
                r0 = x0 + 0.5 * h * (a11 * x0 + a12 * x1 + b0) + 0.5 * h * b0
                r1 = x1 + 0.5 * h * (a21 * x0 + a22 * x1 + b1) + 0.5 * h * b1
                m11 = 1.0 - 0.5 * h * a11
                m12 = -0.5 * h * a12
                m21 = -0.5 * h * a21
                m22 = 1.0 - 0.5 * h * a22
                det = m11 * m22 - m12 * m21
                return (m22 * r0 - m12 * r1) / det, (m11 * r1 - m21 * r0) / det

            t_abs = piece.t0
            for _ in range(int(n_full)):
                x[0], x[1] = step(x[0], x[1], dt)
                t_abs += dt
                if t_abs < guard:
                    emit(piece, t_abs, x)
            if rem > dt * 1e-9:
                x[0], x[1] = step(x[0], x[1], rem)
        if piece.reset_node_at_end and piece.t1 <= stop:
            x[0] = 0.0
    if last_piece is not None:
        emit(last_piece, stop, x)

    return Waveform(t=np.array(ts), v_out=np.array(vo), v_load=np.array(vl),
                    i_load_ma=np.array(il), phase=ph,
                    s1=np.array(s1v, bool), s2=np.array(s2v, bool),
                    k1=np.array(k1v, bool), k2=np.array(k2v, bool),
                    events=tl.events, pulse_starts=np.array(tl.pulse_starts))
