"""Forward model: source pulses, grid discretization and the FDTD solver.

The hot time-stepping loop lives in a compiled extension
(:mod:`gprinv.fdtd._kernel`) with a numpy fallback selected at import; see
:func:`backend_name`.
"""

from ._backend import BACKEND_NAME
from .model import (
    FAMILIES,
    GridSpec,
    SourcePulse,
    discretize,
    load_pulse,
    pulse_from_dict,
    pulse_to_dict,
    pulse_value,
    save_pulse,
    simulate,
    simulate_stack,
)


def backend_name() -> str:
    """Which kernel is running: 'compiled' or 'python'."""
    return BACKEND_NAME


__all__ = [
    "FAMILIES",
    "GridSpec",
    "SourcePulse",
    "backend_name",
    "discretize",
    "load_pulse",
    "pulse_from_dict",
    "pulse_to_dict",
    "pulse_value",
    "save_pulse",
    "simulate",
    "simulate_stack",
]
