"""Petrophysical conversions between permittivity, travel time and moisture.

The permittivity/moisture link is the standard empirical cubic for soils
(volumetric water content as a polynomial in relative permittivity), used
in both directions; the travel-time relation converts a round-trip delay
through a known thickness into permittivity.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constants import C_LIGHT

# VWC = A0 + A1*eps + A2*eps^2 + A3*eps^3, valid for mineral soils.
_A0, _A1, _A2, _A3 = -0.053, 0.0292, -5.5e-4, 4.3e-6

# The cubic is non-monotonic and unphysical far outside its calibration
# range; conversions are guarded to this span.
EPS_VALID = (1.5, 40.0)


@dataclass(frozen=True)
class MoistureValue:
    """Volumetric water content with its provenance.

    ``clamped`` flags values that fell outside [0, 1] before clamping
    (out-of-model warning).
    """

    vwc: float
    source: str
    clamped: bool = False

    def __post_init__(self):
        if not 0.0 <= self.vwc <= 1.0:
            raise ValueError(f"vwc must lie in [0, 1], got {self.vwc}")


def _poly(eps_r: float) -> float:
    return _A0 + _A1 * eps_r + _A2 * eps_r**2 + _A3 * eps_r**3


def topp_vwc(eps_r: float) -> MoistureValue:
    """Volumetric water content from soil relative permittivity.

    Raises outside the validity range EPS_VALID; clamps (and flags) the
    rare polynomial excursions outside [0, 1].
    """
    if not EPS_VALID[0] <= eps_r <= EPS_VALID[1]:
        raise ValueError(
            f"eps_r={eps_r:g} outside the permittivity-to-moisture validity "
            f"range [{EPS_VALID[0]}, {EPS_VALID[1]}]"
        )
    v = _poly(eps_r)
    clamped = not 0.0 <= v <= 1.0
    return MoistureValue(min(max(v, 0.0), 1.0), source="topp", clamped=clamped)


def topp_permittivity(vwc: float) -> float:
    """Invert the moisture cubic by bisection on the validity range.

    The cubic is strictly increasing on EPS_VALID, so the root is unique;
    bisection runs to |delta eps| < 1e-9.
    """
    lo, hi = EPS_VALID
    v_lo, v_hi = _poly(lo), _poly(hi)
    if not v_lo <= vwc <= v_hi:
        raise ValueError(
            f"vwc={vwc:g} outside the attainable range [{v_lo:.4f}, {v_hi:.4f}]"
        )
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if _poly(mid) < vwc:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def traveltime_permittivity(delta_t: float, d: float) -> float:
    """Relative permittivity from a round-trip delay through thickness d."""
    if not delta_t > 0:
        raise ValueError(f"delta_t must be positive, got {delta_t}")
    if not d > 0:
        raise ValueError(f"d must be positive, got {d}")
    return (C_LIGHT * delta_t / (2.0 * d)) ** 2


def gravimetric_vwc(mwc: float, bulk_density: float) -> MoistureValue:
    """Volumetric water content from mass water content and bulk density (g/cm^3).

    Water density is taken as 1 g/cm^3.
    """
    if mwc < 0:
        raise ValueError(f"mass water content must be >= 0, got {mwc}")
    if not bulk_density > 0:
        raise ValueError(f"bulk density must be positive, got {bulk_density}")
    v = mwc * bulk_density / 1.0
    clamped = v > 1.0
    return MoistureValue(min(v, 1.0), source="gravimetric", clamped=clamped)
