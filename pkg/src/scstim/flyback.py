"""Behavioral model of the flyback power stage with IDAC-modulated feedback.

The converter holds its feedback node at a fixed reference by adjusting the
output; a current DAC sources or sinks current into the divider tap, shifting
the regulated output linearly with the signed code:

    V(code) = v_ref * (1 + r1/r2) - r1 * i_dac,   i_dac = code * i_fs / 127

Positive codes source current into the node and lower the output; negative
codes sink and raise it.  The model is calibrated from its two full-scale
endpoints and optionally settles toward a new setpoint with a first-order
response.  Switching-cycle magnetics are intentionally not modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

V_REF_DEFAULT = 1.23          # feedback reference, volts
IDAC_FULL_SCALE_A = 200e-6    # full-scale source/sink current, amps
CODE_SPAN = 127               # |code| at full scale (255 usable codes)
V_CLAMP_DEFAULT = 135.0       # absolute output ceiling, volts
SETTLE_TAU_DEFAULT = 100e-6   # first-order settling time constant, seconds


@dataclass(frozen=True)
class FlybackModel:
    r1: float                                 # high-side feedback resistor, ohms
    r2: float                                 # low-side feedback resistor, ohms
    v_ref: float = V_REF_DEFAULT              # feedback reference, volts
    i_dac_full_scale: float = IDAC_FULL_SCALE_A
    v_out_max_clamp: float = V_CLAMP_DEFAULT
    settle_tau: float = SETTLE_TAU_DEFAULT    # 0 means ideal (instant) source
    v_in: float = 12.0                        # informational only
    turns_ratio: float = 5.0                  # informational only

    def __post_init__(self):
        if self.r1 <= 0 or self.r2 <= 0:
            raise ValueError(f"feedback resistors must be positive (r1={self.r1}, r2={self.r2})")
        if self.v_ref <= 0:
            raise ValueError("v_ref must be positive")
        if self.i_dac_full_scale <= 0:
            raise ValueError("i_dac_full_scale must be positive")
        if self.settle_tau < 0:
            raise ValueError("settle_tau must be >= 0")

    @property
    def v_midpoint(self) -> float:
        """Output at code 0 (no IDAC current): v_ref * (1 + r1/r2)."""
        return self.v_ref * (1.0 + self.r1 / self.r2)


def check_code(code: int) -> int:
    if not -CODE_SPAN <= code <= CODE_SPAN:
        raise ValueError(f"IDAC code {code} outside [-{CODE_SPAN}, {CODE_SPAN}]")
    return int(code)


def calibrate_from_endpoints(
    v_low: float,
    v_high: float,
    i_fs: float = IDAC_FULL_SCALE_A,
    v_ref: float = V_REF_DEFAULT,
    **kw,
) -> FlybackModel:
    """Solve the divider pair (r1, r2) from the two full-scale endpoints.

    V(+i_fs) = v_low and V(-i_fs) = v_high give
        r1 = (v_high - v_low) / (2 * i_fs)
        r2 = v_ref * r1 / ((v_high + v_low)/2 - v_ref)
    Endpoints that would force a non-positive resistor are rejected.
    """
    if i_fs <= 0:
        raise ValueError("i_fs must be positive")
    if v_high <= v_low:
        raise ValueError(f"inconsistent endpoints: v_high={v_high} must exceed v_low={v_low}")
    v_mid = (v_high + v_low) / 2.0
    if v_mid <= v_ref:
        raise ValueError(
            f"inconsistent endpoints: midpoint {v_mid} V does not exceed the "
            f"{v_ref} V reference (would force r2 <= 0)")
    r1 = (v_high - v_low) / (2.0 * i_fs)
    r2 = v_ref * r1 / (v_mid - v_ref)
    return FlybackModel(r1=r1, r2=r2, v_ref=v_ref, i_dac_full_scale=i_fs, **kw)


def code_to_voltage(m: FlybackModel, code: int) -> float:
    """Regulated output for a signed IDAC code, clamped to [0, v_out_max_clamp]."""
    c = check_code(code)
    i_dac = c * m.i_dac_full_scale / CODE_SPAN
    v = m.v_midpoint - m.r1 * i_dac
    return min(max(v, 0.0), m.v_out_max_clamp)


def voltage_to_code(m: FlybackModel, v_target: float) -> int:
    """Nearest code whose output approximates v_target; clamps at full scale."""
    step = step_resolution(m)
    c = round((m.v_midpoint - v_target) / step)
    return max(-CODE_SPAN, min(CODE_SPAN, c))


def step_resolution(m: FlybackModel) -> float:
    """Output change per unit code step: r1 * i_fs / 127 volts."""
    return m.r1 * m.i_dac_full_scale / CODE_SPAN


def settle(m: FlybackModel, v_now: float, v_target: float, dt: float) -> float:
    """First-order approach of the output toward v_target over dt seconds."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if m.settle_tau == 0.0:
        return v_target
    return v_target + (v_now - v_target) * math.exp(-dt / m.settle_tau)


# Named calibrations selectable from config files.  "paper_120" reproduces
# the 3.5-120 V worked range; "table1_135" covers the full 135 V envelope.
def _presets() -> dict[str, FlybackModel]:
    return {
        "paper_120": calibrate_from_endpoints(3.5, 120.0),
        "table1_135": calibrate_from_endpoints(3.5, 135.0),
    }


PRESET_NAMES = ("paper_120", "table1_135")


def preset(name: str, settle_tau: float | None = None) -> FlybackModel:
    try:
        model = _presets()[name]
    except KeyError:
        raise KeyError(f"unknown flyback preset {name!r}; choose from {PRESET_NAMES}") from None
    if settle_tau is not None:
        model = replace(model, settle_tau=settle_tau)
    return model
