"""gprinv: sub-surface property estimation from GPR A-scans.

A 1-D FDTD forward model is matched to a measured waveform by
Gaussian-process surrogate optimization (point estimates) or ensemble MCMC
(full posteriors), with petrophysical conversion of permittivities to
volumetric water content.
"""

__version__ = "0.1.0"

from .ascan import AScan, align, envelope, read_ascan_csv, resample, window, write_ascan_csv
from .scene import (
    HalfSpace,
    Layer,
    LayerStack,
    ParameterEntry,
    ParameterSpace,
    ParameterVector,
    build_scene,
    load_scene,
    two_way_time,
    validate_stack,
)

__all__ = [
    "AScan",
    "HalfSpace",
    "Layer",
    "LayerStack",
    "ParameterEntry",
    "ParameterSpace",
    "ParameterVector",
    "__version__",
    "align",
    "build_scene",
    "envelope",
    "load_scene",
    "read_ascan_csv",
    "resample",
    "two_way_time",
    "validate_stack",
    "window",
    "write_ascan_csv",
]
