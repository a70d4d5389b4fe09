"""Electrode-tissue loads: pure resistive and series-R + parallel-RC (Randles).

The Randles state variable is the double-layer capacitor voltage v_c; it is
the physical memory that makes charge balance observable across phases and
pulses.  Updates are closed-form single-exponential steps, so composing many
small steps equals one large step exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace


class LoadKind(enum.Enum):
    RESISTIVE = "resistive"
    RANDLES = "randles"


@dataclass(frozen=True)
class LoadModel:
    kind: LoadKind
    r_s: float                 # series / access resistance, ohms
    r_p: float | None = None   # parallel faradaic resistance (randles), ohms
    c_dl: float | None = None  # double-layer capacitance (randles), farads
    v_c: float = 0.0           # capacitor state, volts

    def __post_init__(self):
        if not self.r_s > 0:
            raise ValueError(f"r_s must be positive, got {self.r_s}")
        if self.kind is LoadKind.RANDLES:
            if self.r_p is None or not self.r_p > 0:
                raise ValueError(f"randles load needs r_p > 0, got {self.r_p}")
            if self.c_dl is None or not self.c_dl > 0:
                raise ValueError(f"randles load needs c_dl > 0, got {self.c_dl}")
        else:
            if self.r_p is not None or self.c_dl is not None:
                raise ValueError("resistive load must not carry r_p/c_dl")

    @staticmethod
    def resistive(r_s: float) -> "LoadModel":
        return LoadModel(LoadKind.RESISTIVE, r_s)

    @staticmethod
    def randles(r_s: float, r_p: float, c_dl: float, v_c: float = 0.0) -> "LoadModel":
        return LoadModel(LoadKind.RANDLES, r_s, r_p, c_dl, v_c)

    def with_state(self, v_c: float) -> "LoadModel":
        return replace(self, v_c=v_c)


def dc_resistance(m: LoadModel) -> float:
    """Steady-state resistance: r_s, or r_s + r_p for randles."""
    if m.kind is LoadKind.RANDLES:
        return m.r_s + m.r_p
    return m.r_s


def current_response(m: LoadModel, v_applied: float, r_source: float, dt: float) -> tuple[float, LoadModel]:
    """Load current after holding v_applied (behind r_source) for dt seconds.

    Returns (i_load in mA, updated load).  The randles capacitor is advanced
    with the exact exponential solution of the constant-input RC equation and
    the current is evaluated from the updated state.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    r_ser = r_source + m.r_s
    if m.kind is LoadKind.RESISTIVE:
        return v_applied / r_ser * 1e3, m
    # v_c relaxes toward the divider value with tau = c_dl * (r_ser || r_p)
    v_inf = v_applied * m.r_p / (r_ser + m.r_p)
    tau = m.c_dl * (r_ser * m.r_p) / (r_ser + m.r_p)
    v_c = v_inf + (m.v_c - v_inf) * math.exp(-dt / tau)
    i = (v_applied - v_c) / r_ser
    return i * 1e3, m.with_state(v_c)


def stored_energy(m: LoadModel) -> float:
    """Energy held in the double-layer capacitor, joules (0 for resistive)."""
    if m.kind is LoadKind.RANDLES:
        return 0.5 * m.c_dl * m.v_c * m.v_c
    return 0.0


# Named loads selectable from config files.  Values represent a low- and a
# high-impedance user; the rise-time calibration uses the 1 kOhm resistive one.
def _presets() -> dict[str, LoadModel]:
    return {
        "low_z_user": LoadModel.resistive(1_000.0),
        "high_z_user": LoadModel.randles(2_000.0, 50_000.0, 100e-9),
        "bench_6k": LoadModel.resistive(6_000.0),
    }


PRESET_NAMES = ("low_z_user", "high_z_user", "bench_6k")


def preset(name: str) -> LoadModel:
    try:
        return _presets()[name]
    except KeyError:
        raise KeyError(f"unknown load preset {name!r}; choose from {PRESET_NAMES}") from None
