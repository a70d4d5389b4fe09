"""Stimulation protocol parameters, envelope validation and per-phase planning.

A protocol describes one fixed-parameter pulse train: topology (monophasic or
biphasic), the amplitude-split mode, the IDAC amplitude code, frequency and
per-phase timing.  Validation checks the device envelope (0-135 V, 0-20 mA,
1 Hz-10 kHz) and the period budget; planning turns a protocol plus a rail
voltage into per-phase amplitudes and widths that are charge balanced by
construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

# Device envelope limits
FREQ_MIN_HZ = 1.0
FREQ_MAX_HZ = 10_000.0
VOLTAGE_MAX_V = 135.0
CURRENT_MAX_MA = 20.0
CODE_MIN = -127
CODE_MAX = 127

# Fig-style gaps are shown but never quantified; defaults are overridable.
DEFAULT_INTERPHASE_GAP_S = 50e-6
DEFAULT_RECOVERY_GAP_S = 10e-6


class Topology(enum.Enum):
    MONOPHASIC = "monophasic"
    BIPHASIC = "biphasic"


class Mode(enum.Enum):
    """Amplitude split of the capacitor stack across the two phases."""

    SYMMETRIC = "symmetric"    # V1:V2 = 1:1, widths 1:1
    ASYM_1_2 = "asym_1_2"      # V1:V2 = 1:2, widths 2:1
    ASYM_2_1 = "asym_2_1"      # V1:V2 = 2:1, widths 1:2


@dataclass(frozen=True)
class StimProtocol:
    topology: Topology = Topology.BIPHASIC
    mode: Mode = Mode.SYMMETRIC
    voltage_code: int = 0               # IDAC code, -127..+127
    target_current_ma: float | None = None   # enables regulation when set
    frequency_hz: float = 50.0
    phase1_width_s: float = 300e-6
    interphase_gap_s: float = DEFAULT_INTERPHASE_GAP_S
    recovery_gap_s: float = DEFAULT_RECOVERY_GAP_S
    train_length: int = 1

    def with_(self, **kw) -> "StimProtocol":
        return replace(self, **kw)


@dataclass(frozen=True)
class Violation:
    field: str          # offending protocol field (or "period budget")
    limit: str          # human-readable limit that was exceeded
    envelope_row: str   # device-envelope row the limit derives from
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message} [{self.envelope_row}: {self.limit}]"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class PhasePlan:
    """Per-phase targets: magnitudes across the load and conduction widths.

    For biphasic plans v1*t1 == v2*t2 holds exactly: the amplitudes are
    derived as v/3 and 2*(v/3) (or v/2 twice) so the products are the same
    representable real number.
    """

    v1: float           # phase-1 magnitude, volts
    v2: float           # phase-2 magnitude, volts (0 for monophasic)
    t1: float           # phase-1 width, seconds
    t2: float           # phase-2 width, seconds (0 for monophasic)
    polarity: tuple[int, int] = (1, -1)


def phase2_width(p: StimProtocol) -> float:
    """Phase-2 width derived from the mode's 2:1 / 1:2 width rule."""
    if p.topology is Topology.MONOPHASIC:
        return 0.0
    if p.mode is Mode.ASYM_1_2:
        return p.phase1_width_s / 2.0
    if p.mode is Mode.ASYM_2_1:
        return 2.0 * p.phase1_width_s
    return p.phase1_width_s


def period_budget(p: StimProtocol) -> float:
    """Total time one pulse needs: both phases plus both gaps."""
    budget = p.phase1_width_s + phase2_width(p) + p.recovery_gap_s
    if p.topology is Topology.BIPHASIC:
        budget += p.interphase_gap_s
    return budget


def validate_protocol(p: StimProtocol) -> ValidationReport:
    """Check a protocol against the device envelope.

    Violations are data, not exceptions: each names the offending field, the
    limit and the envelope row it derives from.  Monophasic protocols are
    flagged charge-imbalanced as a warning, not rejected.
    """
    rep = ValidationReport()

    def bad(field_name, limit, row, message):
        rep.violations.append(Violation(field_name, limit, row, message))

    if not (FREQ_MIN_HZ <= p.frequency_hz <= FREQ_MAX_HZ):
        bad("frequency_hz", f"{FREQ_MIN_HZ:g}-{FREQ_MAX_HZ:g} Hz", "pulse frequency",
            f"{p.frequency_hz:g} Hz outside {FREQ_MIN_HZ:g}-{FREQ_MAX_HZ:g} Hz")
    if not (CODE_MIN <= p.voltage_code <= CODE_MAX):
        bad("voltage_code", f"{CODE_MIN}..{CODE_MAX}", "output voltage",
            f"code {p.voltage_code} outside {CODE_MIN}..{CODE_MAX} "
            f"(7-bit, mapped to 0-{VOLTAGE_MAX_V:g} V)")
    if p.target_current_ma is not None and not (0.0 <= p.target_current_ma <= CURRENT_MAX_MA):
        bad("target_current_ma", f"0-{CURRENT_MAX_MA:g} mA", "output current",
            f"{p.target_current_ma:g} mA outside 0-{CURRENT_MAX_MA:g} mA")
    if p.phase1_width_s <= 0.0:
        bad("phase1_width_s", "> 0", "pulse width", "phase-1 width must be positive")
    if p.interphase_gap_s < 0.0:
        bad("interphase_gap_s", ">= 0", "pulse width", "interphase gap must be >= 0")
    if p.recovery_gap_s < 0.0:
        bad("recovery_gap_s", ">= 0", "pulse width", "recovery gap must be >= 0")
    if p.train_length < 0:
        bad("train_length", ">= 0", "topology", "train length must be >= 0")
    if p.mode is not Mode.SYMMETRIC and p.topology is not Topology.BIPHASIC:
        bad("mode", "symmetric", "topology",
            f"{p.mode.value} requires biphasic topology (asymmetry is defined on two phases)")

    # Period budget uses the derived phase-2 width; only meaningful when the
    # individual timing fields are themselves sane.
    if p.phase1_width_s > 0 and p.interphase_gap_s >= 0 and p.recovery_gap_s >= 0 \
            and FREQ_MIN_HZ <= p.frequency_hz <= FREQ_MAX_HZ:
        budget = period_budget(p)
        period = 1.0 / p.frequency_hz
        if budget > period:
            bad("period budget", f"<= 1/f = {period:.6g} s", "pulse frequency",
                f"phases + gaps take {budget:.6g} s but the period at "
                f"{p.frequency_hz:g} Hz is {period:.6g} s")

    if p.topology is Topology.MONOPHASIC:
        rep.warnings.append("monophasic pulses are charge-imbalanced")
    return rep


def plan_phases(p: StimProtocol, v_out: float) -> PhasePlan:
    """Split the full stack voltage v_out into per-phase targets.

    symmetric -> v1 = v2 = v_out/2, equal widths; asym_1_2 -> amplitudes
    1:2 with widths 2:1; asym_2_1 the mirror image; monophasic -> phase 2
    absent.  Biphasic plans satisfy v1*t1 == v2*t2 exactly.
    """
    if not v_out > 0.0:
        raise ValueError(f"v_out must be positive, got {v_out!r}")
    t1 = p.phase1_width_s
    if p.topology is Topology.MONOPHASIC:
        return PhasePlan(v1=v_out / 2.0, v2=0.0, t1=t1, t2=0.0, polarity=(1, 0))
    if p.mode is Mode.ASYM_1_2:
        v1 = v_out / 3.0
        return PhasePlan(v1=v1, v2=2.0 * v1, t1=t1, t2=t1 / 2.0)
    if p.mode is Mode.ASYM_2_1:
        v2 = v_out / 3.0
        return PhasePlan(v1=2.0 * v2, v2=v2, t1=t1, t2=2.0 * t1)
    half = v_out / 2.0
    return PhasePlan(v1=half, v2=half, t1=t1, t2=t1)
