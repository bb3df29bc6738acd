"""Independent frequency-domain forward model for validating the FDTD solver.

Synthesizes the received trace of a layered lossy stack from the recursive
normal-incidence reflection coefficient (complex permittivity
eps0*eps_r - j*sigma/omega per medium), plus closed-form helpers for the
interface reflection coefficient and the plane-wave attenuation constant.
Everything here is derived analytically, sharing no code path with the
time-stepping kernel.
"""

from __future__ import annotations

import math

import numpy as np

from .ascan import AScan
from .constants import C_LIGHT, EPS_0, MU_0
from .fdtd import GridSpec, SourcePulse, pulse_value
from .scene import HalfSpace, LayerStack, validate_stack


def fresnel(eps_a: float, eps_b: float) -> float:
    """Normal-incidence reflection coefficient between two lossless media."""
    if eps_a < 1 or eps_b < 1:
        raise ValueError("relative permittivities must be >= 1")
    ra, rb = math.sqrt(eps_a), math.sqrt(eps_b)
    return (ra - rb) / (ra + rb)


def attenuation_constant(eps_r: float, sigma: float, f: float) -> float:
    """Plane-wave attenuation constant (Np/m) for a low-loss conductive medium.

    Evaluates the exact expression
    alpha = omega*sqrt(mu*eps/2)*sqrt(sqrt(1+(sigma/(omega*eps))^2) - 1);
    guarded to loss tangents below 0.3 where the low-loss interpretation
    (and the round-trip decay checks built on it) hold.
    """
    if eps_r < 1 or sigma < 0 or f <= 0:
        raise ValueError("need eps_r >= 1, sigma >= 0, f > 0")
    if sigma == 0.0:
        return 0.0
    omega = 2.0 * math.pi * f
    eps = EPS_0 * eps_r
    tan_loss = sigma / (omega * eps)
    if tan_loss >= 0.3:
        raise ValueError(
            f"loss tangent {tan_loss:.3f} >= 0.3: outside the low-loss guard; "
            "evaluate the exact complex propagation constant instead"
        )
    return omega * math.sqrt(MU_0 * eps / 2.0) * math.sqrt(math.sqrt(1.0 + tan_loss**2) - 1.0)


def _reflection_spectrum(stack: LayerStack, freqs: np.ndarray) -> np.ndarray:
    """Recursive reflection coefficient at the top of the first interface.

    freqs must be strictly positive. Media use the e^{+j omega t}
    convention, so the principal square root puts the propagation constant
    in the fourth quadrant and exp(-j*k*d) decays for lossy layers.
    """
    omega = 2.0 * math.pi * freqs
    def medium(eps_r: float, sigma: float):
        eps_c = EPS_0 * eps_r - 1j * sigma / omega
        k = omega * np.sqrt(MU_0 * eps_c)
        eta = np.sqrt(MU_0 / eps_c)
        return k, eta

    etas = [np.full_like(omega, math.sqrt(MU_0 / EPS_0))]  # air on top
    ks = [omega / C_LIGHT]
    for layer in stack.layers:
        k, eta = medium(layer.eps_r, layer.sigma)
        ks.append(k)
        etas.append(eta)

    if isinstance(stack.termination, HalfSpace):
        _, eta_sub = medium(stack.termination.eps_r, stack.termination.sigma)
        gamma = (eta_sub - etas[-1]) / (eta_sub + etas[-1])
    else:
        gamma = np.full_like(omega, -1.0, dtype=complex)  # perfect conductor

    # Walk upward: propagate through each layer, then cross its top interface.
    for i in range(len(stack.layers), 0, -1):
        phase = np.exp(-2j * ks[i] * stack.layers[i - 1].thickness)
        gamma = gamma * phase
        r = (etas[i] - etas[i - 1]) / (etas[i] + etas[i - 1])
        gamma = (r + gamma) / (1.0 + r * gamma)
    return gamma


def reflectivity_response(stack: LayerStack, pulse: SourcePulse, dt: float, n: int) -> AScan:
    """Received trace synthesized in the frequency domain.

    The spectrum of the source pulse is multiplied by
    1 + Gamma(omega) * exp(-2j k0 air_gap) — the direct arrival plus the
    stack reflection delayed by the round trip of the air gap (measured
    from the receiver) — and transformed back to time. The zero-frequency
    bin uses the lowest positive bin's Gamma as its limit.
    """
    problems = validate_stack(stack)
    if problems:
        raise ValueError("invalid stack: " + "; ".join(problems))
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"n must be a power of two, got {n}")
    if dt <= 0 or dt > 1.0 / (16.0 * pulse.f_c):
        raise ValueError(
            f"dt={dt:g} too coarse: need >= 8 samples per period at 2*f_c"
        )
    t = dt * np.arange(n)
    spectrum = np.fft.rfft(pulse_value(pulse, t))
    freqs = np.fft.rfftfreq(n, dt)

    gamma = np.empty(freqs.size, dtype=complex)
    gamma[1:] = _reflection_spectrum(stack, freqs[1:])
    gamma[0] = gamma[1]
    phase_gap = np.exp(-2j * (2.0 * math.pi * freqs / C_LIGHT) * stack.air_gap)

    received = np.fft.irfft(spectrum * (1.0 + gamma * phase_gap), n=n)
    return AScan(dt, 0.0, received, label="oracle")


def grid_matched_response(grid: GridSpec, pulse: SourcePulse) -> AScan:
    """Oracle trace on an FDTD grid's snapped geometry and time axis.

    Shifts the pulse by the grid's source-to-receiver delay so the result
    is sample-aligned with :func:`gprinv.fdtd.simulate`, and crops to the
    simulated record length.
    """
    shifted = SourcePulse(
        pulse.family, pulse.f_c, pulse.amplitude, pulse.delay + grid.src_rx_delay
    )
    n = 1
    while n < 2 * grid.n_steps:
        n *= 2
    full = reflectivity_response(grid.snapped, shifted, grid.dt, n)
    return AScan(grid.dt, 0.0, full.samples[: grid.n_steps], label="oracle")
