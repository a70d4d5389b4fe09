"""scstim: desk-scale digital twin of a switched-capacitor HV FES stimulator.

Models the flyback power stage with IDAC-modulated feedback, the
switched-capacitor output stage with relay-configurable pulse modes,
electrode-tissue loads and the per-pulse current-regulation loop, and
simulates pulse trains with an event-driven closed-form transient engine.
"""

__version__ = "0.1.0"

from .control import RegulatorState, UnreachableTargetError, regulate_step, steady_state_error
from .engine import (EdgeNotResolvedError, ProtocolError, RegulationConfig,
                     SamplePolicy, SimConfig, SummaryStats, Waveform,
                     measure_rise_time, oracle_simulate, simulate)
from .flyback import (FlybackModel, calibrate_from_endpoints, code_to_voltage,
                      settle, step_resolution, voltage_to_code)
from .load import LoadKind, LoadModel, current_response, dc_resistance
from .params import (Mode, PhasePlan, StimProtocol, Topology, ValidationReport,
                     plan_phases, validate_protocol)
from .sc_core import (ModeConflictError, ScState, ShootThroughError,
                      SwitchCommand, SwitchEvent, SwitchTiming, divider_split,
                      phase_source, rise_time_90, transition)

__all__ = [
    "__version__",
    "EdgeNotResolvedError", "FlybackModel", "LoadKind", "LoadModel", "Mode",
    "ModeConflictError", "PhasePlan", "ProtocolError", "RegulationConfig",
    "RegulatorState", "SamplePolicy", "ScState", "ShootThroughError",
    "SimConfig", "StimProtocol", "SummaryStats", "SwitchCommand", "SwitchEvent",
    "SwitchTiming", "Topology", "UnreachableTargetError", "ValidationReport",
    "Waveform", "calibrate_from_endpoints", "code_to_voltage",
    "current_response", "dc_resistance", "divider_split", "measure_rise_time",
    "oracle_simulate", "phase_source", "plan_phases", "regulate_step",
    "rise_time_90", "settle", "simulate", "step_resolution",
    "steady_state_error", "validate_protocol", "voltage_to_code",
]
