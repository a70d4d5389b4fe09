"""Switched-capacitor output stage: divider relays, phase switches, timing.

Four equal capacitors form the stack.  Two of them are always in circuit;
relays K1/K2 bridge the extras to move the tap, giving per-phase splits of
1:1 (both off), 1:2 (K1 on, tap drops to a third of the stack) or 2:1 (K2
on).  S1 applies +V1 to the load, S2 applies -V2; break-before-make is
enforced on every transition, and relay changes are only legal while both
phase switches are open.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .load import LoadModel, dc_resistance

GATE_DELAY_ON_DEFAULT = 3e-9    # close latency, seconds
GATE_DELAY_OFF_DEFAULT = 2e-9   # open latency, seconds
GATE_DELAY_MAX = 20e-9
R_ON_DEFAULT = 1.0              # closed-switch resistance, ohms
C_PAR_DEFAULT = 5.28e-9         # output-node parasitic capacitance, farads
C_UNIT_DEFAULT = 10e-6          # stack capacitor value, farads

# Parasitic envelope within which the 90% rise time stays under 20 ns
# (ln(10) * 1.5 ohm * 5.75 nF = 19.86 ns; the load only shortens the edge).
RISE_ENVELOPE_R_ON_MAX = 1.5
RISE_ENVELOPE_C_PAR_MAX = 5.75e-9


class ShootThroughError(ValueError):
    """A command or state would close S1 and S2 at the same time."""


class ModeConflictError(ValueError):
    """A command or state would engage relays K1 and K2 together."""


@dataclass(frozen=True)
class SwitchTiming:
    pullup_r: float = 2.2                       # gate-driver pull-up, ohms
    pulldown_r: float = 1.0                     # gate-driver pull-down, ohms
    gate_delay_on: float = GATE_DELAY_ON_DEFAULT
    gate_delay_off: float = GATE_DELAY_OFF_DEFAULT
    r_on: float = R_ON_DEFAULT                  # closed-switch resistance, ohms
    c_par: float = C_PAR_DEFAULT                # output-node parasitic, farads

    def __post_init__(self):
        if self.pullup_r <= 0 or self.pulldown_r <= 0:
            raise ValueError("gate-driver resistances must be positive")
        if self.gate_delay_on <= 0 or self.gate_delay_off <= 0:
            raise ValueError("gate delays must be positive")
        if self.gate_delay_on >= GATE_DELAY_MAX or self.gate_delay_off >= GATE_DELAY_MAX:
            raise ValueError(f"gate delays must stay under {GATE_DELAY_MAX:g} s")
        if self.r_on <= 0:
            raise ValueError("r_on must be positive")
        if self.c_par < 0:
            raise ValueError("c_par must be >= 0")


@dataclass(frozen=True)
class ScState:
    s1: bool = False
    s2: bool = False
    k1: bool = False
    k2: bool = False
    c_unit: float = C_UNIT_DEFAULT
    v_stack: float = 0.0

    def __post_init__(self):
        if self.s1 and self.s2:
            raise ShootThroughError("S1 and S2 must never conduct together")
        if self.k1 and self.k2:
            raise ModeConflictError("K1 and K2 are mutually exclusive")
        if self.v_stack < 0:
            raise ValueError("v_stack must be >= 0")
        if self.c_unit <= 0:
            raise ValueError("c_unit must be positive")

    @property
    def v_tap(self) -> float:
        """Divider midpoint voltage (the lower-arm share V2)."""
        return divider_split(self.k1, self.k2, self.v_stack)[1]


@dataclass(frozen=True)
class SwitchCommand:
    """Target switch/relay configuration; None leaves a relay unchanged."""

    s1: bool = False
    s2: bool = False
    k1: bool | None = None
    k2: bool | None = None


@dataclass(frozen=True)
class SwitchEvent:
    t: float            # seconds after the command
    switch: str         # "s1" | "s2" | "k1" | "k2"
    close: bool         # True = closes/engages at t, False = opens
    tau_edge: float | None = None   # RC constant the closing edge drives


def divider_split(k1: bool, k2: bool, v_stack: float) -> tuple[float, float]:
    """Per-phase voltages (v1, v2) for the relay configuration.

    v2 is derived as an exact binary multiple of v1 (or vice versa) so the
    1:2 / 2:1 ratios hold to the last bit.
    """
    if k1 and k2:
        raise ModeConflictError("mode conflict: relays K1 and K2 both engaged")
    if v_stack < 0:
        raise ValueError("v_stack must be >= 0")
    if k1:
        v1 = v_stack / 3.0
        return v1, 2.0 * v1
    if k2:
        v2 = v_stack / 3.0
        return 2.0 * v2, v2
    half = v_stack / 2.0
    return half, half


def phase_source(state: ScState, timing: SwitchTiming) -> tuple[float, float] | None:
    """Thevenin source (emf, series resistance) the load sees, or None when idle.

    Phase-1 current is the positive direction: S1 applies +v1, S2 applies -v2.
    """
    v1, v2 = divider_split(state.k1, state.k2, state.v_stack)
    if state.s1:
        return v1, timing.r_on
    if state.s2:
        return -v2, timing.r_on
    return None


def transition(state: ScState, command: SwitchCommand, timing: SwitchTiming) -> tuple[list[SwitchEvent], ScState]:
    """Timed events realizing a command, break-before-make enforced.

    Opens are stamped at the command instant; a close lands gate_delay_on
    later, pushed out by gate_delay_off first whenever a phase switch had to
    open, so close - open >= gate_delay_off + gate_delay_on.  Relay changes
    require both phase switches open before and after the command.
    """
    if command.s1 and command.s2:
        raise ShootThroughError("command would close both S1 and S2")
    k1 = state.k1 if command.k1 is None else command.k1
    k2 = state.k2 if command.k2 is None else command.k2
    if k1 and k2:
        raise ModeConflictError("command would engage both K1 and K2")
    relay_change = (k1 != state.k1) or (k2 != state.k2)
    if relay_change and (state.s1 or state.s2 or command.s1 or command.s2):
        raise ValueError("relay switching is only permitted while S1 and S2 are open")

    events: list[SwitchEvent] = []
    opened = False
    for name, was, wanted in (("s1", state.s1, command.s1), ("s2", state.s2, command.s2)):
        if was and not wanted:
            events.append(SwitchEvent(0.0, name, close=False))
            opened = True
    for name, was, wanted in (("k1", state.k1, k1), ("k2", state.k2, k2)):
        if was != wanted:
            events.append(SwitchEvent(0.0, name, close=wanted))
    t_close = timing.gate_delay_off + timing.gate_delay_on if opened else timing.gate_delay_on
    for name, was, wanted in (("s1", state.s1, command.s1), ("s2", state.s2, command.s2)):
        if wanted and not was:
            events.append(SwitchEvent(t_close, name, close=True, tau_edge=timing.r_on * timing.c_par))
    events.sort(key=lambda e: e.t)
    new_state = replace(state, s1=command.s1, s2=command.s2, k1=k1, k2=k2)
    return events, new_state


def rise_time_90(timing: SwitchTiming, load: LoadModel) -> float:
    """Predicted 0-90% rise time of a closing edge: ln(10) * (r_on || r_dc) * c_par."""
    r_dc = dc_resistance(load)
    r_th = timing.r_on * r_dc / (timing.r_on + r_dc)
    return math.log(10.0) * r_th * timing.c_par
