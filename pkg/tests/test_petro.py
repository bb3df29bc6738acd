"""Permittivity/moisture/travel-time conversions."""

import numpy as np
import pytest

from gprinv.petro import (
    EPS_VALID,
    gravimetric_vwc,
    topp_permittivity,
    topp_vwc,
    traveltime_permittivity,
)
from gprinv.scene import PEC, Layer, LayerStack, two_way_time


def poly(eps):
    # Independent evaluation of the moisture cubic for the frozen values below.
    return -0.053 + 0.0292 * eps - 5.5e-4 * eps**2 + 4.3e-6 * eps**3


class TestToppVwc:
    def test_value_at_10_2(self):
        # poly(10.2) = 0.192181...
        assert topp_vwc(10.2).vwc == pytest.approx(0.1922, abs=1e-4)
        assert topp_vwc(10.2).vwc == pytest.approx(poly(10.2), abs=1e-12)

    def test_value_at_5_47(self):
        # poly(5.47) = 0.090962...
        assert topp_vwc(5.47).vwc == pytest.approx(0.0910, abs=1e-4)

    def test_monotone_on_validity_range(self):
        # The cubic itself is strictly increasing on the validity range
        # (derivative positive, dense-grid check); the returned moisture is
        # non-decreasing — the [0, 1] clamp plateaus below eps ~ 1.85 where
        # the polynomial is negative.
        grid = np.linspace(*EPS_VALID, 2000)
        assert np.all(np.diff([poly(e) for e in grid]) > 0)
        values = [topp_vwc(e).vwc for e in grid]
        assert np.all(np.diff(values) >= 0)
        unclamped = [v for e, v in zip(grid, values) if not topp_vwc(e).clamped]
        assert np.all(np.diff(unclamped) > 0)

    def test_guard(self):
        with pytest.raises(ValueError, match="validity"):
            topp_vwc(1.0)
        with pytest.raises(ValueError, match="validity"):
            topp_vwc(60.0)

    def test_flags_clamped(self):
        # poly(1.5) = -0.0101 < 0 -> clamped to 0 with the out-of-model flag.
        m = topp_vwc(1.5)
        assert m.vwc == 0.0
        assert m.clamped


class TestToppPermittivity:
    def test_round_trip(self):
        assert topp_permittivity(topp_vwc(9.0).vwc) == pytest.approx(9.0, abs=1e-6)

    def test_inverse_of_paper_case(self):
        assert topp_permittivity(0.1922) == pytest.approx(10.2, abs=1e-3)

    def test_rejects_unattainable(self):
        # poly(40) = 0.5102 < 0.9
        with pytest.raises(ValueError, match="attainable"):
            topp_permittivity(0.9)

    def test_round_trip_dense(self):
        for eps in np.linspace(1.6, 39.5, 37):
            v = poly(eps)
            assert topp_permittivity(v) == pytest.approx(eps, abs=1e-6)


class TestTravelTime:
    def test_soil_case(self):
        # (3e8 * 3e-9 / (2*0.15))^2 = 9.00 exactly.
        assert traveltime_permittivity(3.0e-9, 0.15) == pytest.approx(9.00, abs=1e-9)

    def test_free_space(self):
        assert traveltime_permittivity(1.0e-9, 0.15) == pytest.approx(1.00, abs=1e-9)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            traveltime_permittivity(1e-9, 0.0)
        with pytest.raises(ValueError):
            traveltime_permittivity(0.0, 0.1)

    def test_consistent_with_two_way_time(self):
        # Single layer, zero air gap: exact analytic consistency.
        for eps in (2.0, 5.47, 9.0, 16.0):
            stack = LayerStack(0.0, (Layer(0.15, eps),), PEC)
            assert traveltime_permittivity(two_way_time(stack), 0.15) == pytest.approx(
                eps, abs=1e-9
            )


class TestGravimetric:
    def test_product(self):
        assert gravimetric_vwc(0.10, 1.5).vwc == pytest.approx(0.15, abs=1e-12)

    def test_zero(self):
        assert gravimetric_vwc(0.0, 1.5).vwc == 0.0

    def test_rejects_bad_density(self):
        with pytest.raises(ValueError):
            gravimetric_vwc(0.1, 0.0)

    def test_rejects_negative_mwc(self):
        with pytest.raises(ValueError):
            gravimetric_vwc(-0.1, 1.5)

    def test_flags_above_one(self):
        m = gravimetric_vwc(0.9, 1.5)
        assert m.vwc == 1.0
        assert m.clamped
