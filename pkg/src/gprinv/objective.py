"""Misfit and probability machinery connecting traces to the samplers.

relative_error is the percent waveform misfit used by the deterministic
optimizer; log_likelihood assumes independent Gaussian measurement error
with constant sigma; log_posterior adds a bounded uniform prior (constant
inside the box, -inf outside) and maps forward-model failures to -inf so
samplers reject rather than crash.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ascan import AScan, align, envelope, shift_samples, window
from .errors import InstabilityError
from .scene import ParameterSpace, parameter_values

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseModel:
    """Constant standard deviation of the measurement error."""

    sigma_noise: float

    def __post_init__(self):
        if not self.sigma_noise > 0:
            raise ValueError(f"sigma_noise must be positive, got {self.sigma_noise}")

    @classmethod
    def from_reference(cls, y: AScan, cfg: "ComparisonConfig | None" = None,
                       fraction: float = 0.02) -> "NoiseModel":
        """Default noise scale: a fraction of the windowed peak envelope amplitude."""
        trace = y
        if cfg is not None and cfg.window is not None:
            trace = window(trace, *cfg.window)
        peak = float(envelope(trace).samples.max())
        if peak <= 0:
            raise ValueError("reference trace has zero envelope; cannot scale noise")
        return cls(fraction * peak)


@dataclass(frozen=True)
class ComparisonConfig:
    """How two traces are made comparable before the misfit.

    domain: compare raw samples or amplitude envelopes; window: optional
    absolute [t_start, t_end] restriction; alignment: register the first
    dominant envelope peaks ('peak') or trust the time axes ('none').
    """

    domain: str = "raw"
    window: tuple[float, float] | None = None
    alignment: str = "peak"

    def __post_init__(self):
        if self.domain not in ("raw", "envelope"):
            raise ValueError(f"domain must be 'raw' or 'envelope', got {self.domain!r}")
        if self.alignment not in ("none", "peak"):
            raise ValueError(f"alignment must be 'none' or 'peak', got {self.alignment!r}")
        if self.window is not None:
            t0, t1 = self.window
            if not t0 < t1:
                raise ValueError(f"invalid window {self.window}")


def _prepare(y: AScan, y_sim: AScan, cfg: ComparisonConfig) -> tuple[np.ndarray, np.ndarray]:
    """Align, window and (optionally) envelope a pair of traces."""
    if not np.isclose(y.dt, y_sim.dt, rtol=1e-9):
        raise ValueError("traces must share dt (resample first)")
    if cfg.alignment == "peak":
        shift = align(y, y_sim).shift
        y_sim = shift_samples(y_sim, -shift)
    if cfg.window is not None:
        y = window(y, *cfg.window)
        y_sim = window(y_sim, *cfg.window)
    if len(y) != len(y_sim):
        raise ValueError(
            f"length mismatch after preparation: {len(y)} vs {len(y_sim)}"
        )
    if cfg.domain == "envelope":
        return envelope(y).samples, envelope(y_sim).samples
    return y.samples, y_sim.samples


def relative_error(y: AScan, y_sim: AScan, cfg: ComparisonConfig | None = None) -> float:
    """Percent relative waveform error sqrt(sum((y - y_sim)^2) / sum(y^2)) * 100."""
    cfg = cfg or ComparisonConfig()
    a, b = _prepare(y, y_sim, cfg)
    denom = float(np.sum(a**2))
    if denom == 0.0:
        raise ValueError("reference trace is all zero over the window")
    return float(np.sqrt(np.sum((a - b) ** 2) / denom) * 100.0)


def log_likelihood(y: AScan, y_sim: AScan, noise: NoiseModel,
                   cfg: ComparisonConfig | None = None) -> float:
    """Gaussian log-likelihood of the data given the simulated trace."""
    cfg = cfg or ComparisonConfig()
    a, b = _prepare(y, y_sim, cfg)
    resid = (b - a) / noise.sigma_noise
    n = a.size
    return float(-0.5 * np.sum(resid**2) - n * math.log(math.sqrt(2.0 * math.pi) * noise.sigma_noise))


def log_posterior(
    theta,
    y: AScan,
    forward: Callable[[np.ndarray], AScan],
    space: ParameterSpace,
    noise: NoiseModel,
    cfg: ComparisonConfig | None = None,
) -> float:
    """Unnormalized log posterior under a bounded uniform prior.

    Out-of-bounds parameters and forward-model failures return -inf, so
    samplers treat them as rejected proposals.
    """
    values = parameter_values(theta)
    if not space.in_bounds(values):
        return -math.inf
    try:
        y_sim = forward(values)
    except InstabilityError as exc:
        log.warning("forward model failed at theta=%s: %s", values, exc)
        return -math.inf
    return log_likelihood(y, y_sim, noise, cfg)
