"""Per-pulse current regulation: adjust the IDAC code to hold a target current.

The microcontroller samples the peak phase-1 current after each pulse and
picks the next code.  Two update laws are provided:

* adaptive (default): rescale the applied voltage by target/measured and
  quantize - for a resistive load this lands on the best code in one step,
  so any reachable target settles within a few pulses regardless of load.
* integral: the classic accumulate-and-round law with gain_codes_per_ma.
  The integrator is kept in float so quantization cannot open a dead band;
  anti-windup freezes it while the code is pinned at a rail.

Lowering the code raises the output voltage, hence the minus sign in the
integral update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import flyback
from .flyback import CODE_SPAN, FlybackModel
from .params import Mode

GAIN_DEFAULT = 2.0        # codes per mA of error (integral law)
ERROR_HISTORY_LEN = 8
_I_MIN_MA = 1e-6          # below this the measurement carries no load information


class UnreachableTargetError(ValueError):
    """The target current needs more voltage than the supply can produce."""


@dataclass(frozen=True)
class RegulatorState:
    target_ma: float
    code: int = 0
    gain_codes_per_ma: float = GAIN_DEFAULT
    adaptive: bool = True
    acc: float | None = None          # float integrator behind the quantized code
    error_history: tuple[float, ...] = ()
    saturated: bool = False

    def __post_init__(self):
        if self.target_ma < 0:
            raise ValueError("target_ma must be >= 0")
        flyback.check_code(self.code)
        if self.acc is None:
            object.__setattr__(self, "acc", float(self.code))


def phase1_fraction(mode: Mode) -> float:
    """Share of the stack voltage applied during phase 1."""
    if mode is Mode.ASYM_1_2:
        return 1.0 / 3.0
    if mode is Mode.ASYM_2_1:
        return 2.0 / 3.0
    return 0.5


def regulate_step(st: RegulatorState, i_measured_ma: float, fb: FlybackModel) -> RegulatorState:
    """One regulation step from a sensed peak phase-1 current."""
    if i_measured_ma < 0:
        raise ValueError("i_measured_ma must be >= 0")
    err = st.target_ma - i_measured_ma

    if st.adaptive and i_measured_ma > _I_MIN_MA:
        v_now = flyback.code_to_voltage(fb, st.code)
        v_want = v_now * (st.target_ma / i_measured_ma)
        raw = (fb.v_midpoint - v_want) / flyback.step_resolution(fb)
        code = max(-CODE_SPAN, min(CODE_SPAN, round(raw)))
        acc = float(code)
    else:
        # Integral law; anti-windup: stop integrating while pinned outward.
        pinned_low = st.code <= -CODE_SPAN and err > 0
        pinned_high = st.code >= CODE_SPAN and err < 0
        if pinned_low or pinned_high:
            acc = float(st.code)
        else:
            acc = st.acc - st.gain_codes_per_ma * err
        code = max(-CODE_SPAN, min(CODE_SPAN, round(acc)))
        raw = acc

    saturated = (code <= -CODE_SPAN and (err > 0 or raw < -CODE_SPAN)) or \
                (code >= CODE_SPAN and (err < 0 or raw > CODE_SPAN))
    history = (st.error_history + (err,))[-ERROR_HISTORY_LEN:]
    return replace(st, code=code, acc=acc, error_history=history, saturated=saturated)


def steady_state_error(fb: FlybackModel, r_dc: float, mode: Mode, target_ma: float) -> float:
    """Residual current error (mA) of the best quantized code for a DC load.

    Bounded by half a code step scaled by the phase fraction over r_dc.
    Raises UnreachableTargetError when even full-scale voltage falls short.
    """
    if r_dc <= 0:
        raise ValueError("r_dc must be positive")
    if target_ma < 0:
        raise ValueError("target_ma must be >= 0")
    frac = phase1_fraction(mode)
    if math.isinf(r_dc):
        if target_ma > 0:
            raise UnreachableTargetError("no current flows into an open load")
        return 0.0

    def i_ma(code):
        return frac * flyback.code_to_voltage(fb, code) / r_dc * 1e3

    if target_ma > i_ma(-CODE_SPAN):
        raise UnreachableTargetError(
            f"target {target_ma:g} mA needs more than the full-scale "
            f"{flyback.code_to_voltage(fb, -CODE_SPAN):g} V output into {r_dc:g} ohm")
    v_needed = target_ma * 1e-3 * r_dc / frac
    c0 = flyback.voltage_to_code(fb, v_needed)
    best = min(
        (c for c in (c0 - 1, c0, c0 + 1) if -CODE_SPAN <= c <= CODE_SPAN),
        key=lambda c: abs(target_ma - i_ma(c)),
    )
    return target_ma - i_ma(best)
