"""Misfit, likelihood and posterior machinery."""

import math

import numpy as np
import pytest

from gprinv.ascan import AScan
from gprinv.errors import InstabilityError
from gprinv.objective import (
    ComparisonConfig,
    NoiseModel,
    log_likelihood,
    log_posterior,
    relative_error,
)
from gprinv.scene import ParameterEntry, ParameterSpace

RAW = ComparisonConfig(domain="raw", alignment="none")


def trace(samples, dt=1.0):
    return AScan(dt, 0.0, samples)


class TestRelativeError:
    def test_perfect_fit(self):
        y = trace(np.sin(np.arange(32)))
        assert relative_error(y, y, RAW) == 0.0

    def test_all_zero_simulation(self):
        y = trace(np.sin(np.arange(32)) + 2)
        z = trace(np.zeros(32))
        assert relative_error(y, z, RAW) == pytest.approx(100.0, abs=1e-9)

    def test_orthogonal_two_sample(self):
        # sqrt(2/1) * 100
        assert relative_error(trace([1.0, 0.0]), trace([0.0, 1.0]), RAW) == pytest.approx(
            141.42, abs=0.01
        )

    def test_zero_reference_errors(self):
        with pytest.raises(ValueError, match="all zero"):
            relative_error(trace(np.zeros(8)), trace(np.ones(8)), RAW)

    def test_length_mismatch_errors(self):
        with pytest.raises(ValueError):
            relative_error(trace(np.ones(8)), trace(np.ones(9)), RAW)

    def test_joint_scale_invariance(self):
        rng = np.random.default_rng(0)
        y = trace(rng.normal(size=64))
        y_sim = trace(rng.normal(size=64))
        base = relative_error(y, y_sim, RAW)
        for c in (0.1, -2.0, 1e6):
            scaled = relative_error(
                y.with_samples(c * y.samples), y_sim.with_samples(c * y_sim.samples), RAW
            )
            assert scaled == pytest.approx(base, rel=1e-12)

    def test_envelope_domain_and_window(self):
        i = np.arange(256)
        pulse = np.exp(-((i - 80) ** 2) / 50.0) * np.cos(2 * np.pi * i / 8)
        y = trace(pulse)
        cfg = ComparisonConfig(domain="envelope", window=(60.0, 100.0), alignment="none")
        assert relative_error(y, y, cfg) == 0.0
        late_junk = trace(pulse + 0.5 * (i > 150))
        assert relative_error(y, late_junk, cfg) == pytest.approx(0.0, abs=1e-9)


class TestLogLikelihood:
    def test_perfect_fit_n100(self):
        y = trace(np.sin(np.arange(100)))
        ll = log_likelihood(y, y, NoiseModel(1.0), RAW)
        assert ll == pytest.approx(-100 * math.log(math.sqrt(2 * math.pi)), rel=1e-12)
        assert ll == pytest.approx(-91.894, abs=1e-3)

    def test_per_sample_constant(self):
        # Each perfect-fit sample contributes -log(sqrt(2 pi) sigma).
        y2 = trace(np.ones(2))
        y3 = trace(np.ones(3))
        sigma = 0.7
        per = -math.log(math.sqrt(2 * math.pi) * sigma)
        assert log_likelihood(y2, y2, NoiseModel(sigma), RAW) == pytest.approx(2 * per)
        assert log_likelihood(y3, y3, NoiseModel(sigma), RAW) == pytest.approx(3 * per)

    def test_unit_standardized_residual(self):
        sigma = 0.31
        y = trace([0.0, 0.0])
        y_sim = trace([sigma, 0.0])
        expected = -0.5 - 2 * math.log(math.sqrt(2 * math.pi) * sigma)
        assert log_likelihood(y, y_sim, NoiseModel(sigma), RAW) == pytest.approx(expected)

    def test_maximized_at_perfect_fit(self):
        rng = np.random.default_rng(1)
        y = trace(rng.normal(size=64))
        best = log_likelihood(y, y, NoiseModel(0.5), RAW)
        for _ in range(20):
            other = trace(y.samples + rng.normal(0, 0.3, 64))
            assert log_likelihood(y, other, NoiseModel(0.5), RAW) < best

    def test_sigma_maximum_at_rms_residual(self):
        # For fixed traces the likelihood peaks at sigma^2 = mean sq residual.
        rng = np.random.default_rng(2)
        y = trace(rng.normal(size=256))
        y_sim = trace(y.samples + rng.normal(0, 0.4, 256))
        rms = float(np.sqrt(np.mean((y_sim.samples - y.samples) ** 2)))
        grid = np.linspace(0.5 * rms, 2.0 * rms, 301)
        lls = [log_likelihood(y, y_sim, NoiseModel(s), RAW) for s in grid]
        assert grid[int(np.argmax(lls))] == pytest.approx(rms, rel=0.01)


class TestLogPosterior:
    def setup_method(self):
        self.space = ParameterSpace((ParameterEntry("a", "layers[0].eps_r", 0.0, 10.0),))
        self.y = trace(np.sin(np.arange(50)))

    def test_out_of_bounds_sentinel(self):
        lp = log_posterior([11.0], self.y, lambda v: self.y, self.space, NoiseModel(1.0), RAW)
        assert lp == -math.inf

    def test_truth_equals_perfect_fit_likelihood(self):
        lp = log_posterior([5.0], self.y, lambda v: self.y, self.space, NoiseModel(1.0), RAW)
        assert lp == pytest.approx(-50 * math.log(math.sqrt(2 * math.pi)), rel=1e-12)

    def test_uniform_prior_cancels_in_differences(self):
        rng = np.random.default_rng(3)

        def forward(v):
            return trace(np.sin(np.arange(50) * (1 + 0.01 * v[0])))

        noise = NoiseModel(0.2)
        lp1 = log_posterior([2.0], self.y, forward, self.space, noise, RAW)
        lp2 = log_posterior([7.0], self.y, forward, self.space, noise, RAW)
        ll1 = log_likelihood(self.y, forward(np.array([2.0])), noise, RAW)
        ll2 = log_likelihood(self.y, forward(np.array([7.0])), noise, RAW)
        assert lp1 - lp2 == pytest.approx(ll1 - ll2, rel=1e-12)

    def test_forward_failure_maps_to_sentinel(self):
        def broken(v):
            raise InstabilityError("blew up", step=3)

        lp = log_posterior([5.0], self.y, broken, self.space, NoiseModel(1.0), RAW)
        assert lp == -math.inf

    def test_argmin_re_is_argmax_ll_on_grid(self):
        def forward(v):
            return trace(np.sin(np.arange(50) * (1 + 0.002 * v[0])))

        target = forward(np.array([4.0]))
        noise = NoiseModel(0.1)
        grid = np.linspace(0.0, 10.0, 41)
        res = [relative_error(target, forward(np.array([g])), RAW) for g in grid]
        lls = [log_likelihood(target, forward(np.array([g])), noise, RAW) for g in grid]
        assert np.argmin(res) == np.argmax(lls)


class TestNoiseModel:
    def test_requires_positive_sigma(self):
        with pytest.raises(ValueError):
            NoiseModel(0.0)

    def test_from_reference_fraction_of_peak_envelope(self):
        i = np.arange(256)
        y = trace(4.0 * np.exp(-((i - 100) ** 2) / 200.0) * np.cos(2 * np.pi * i / 8))
        nm = NoiseModel.from_reference(y, fraction=0.02)
        assert nm.sigma_noise == pytest.approx(0.08, rel=0.02)

    def test_from_reference_respects_window(self):
        # A 10x burst outside the window must not set the scale.
        i = np.arange(256)
        small = 2.0 * np.exp(-((i - 55) ** 2) / 60.0) * np.cos(2 * np.pi * i / 8)
        big = 10.0 * np.exp(-((i - 200) ** 2) / 60.0) * np.cos(2 * np.pi * i / 8)
        y = trace(small + big)
        cfg = ComparisonConfig(window=(10.0, 100.0), alignment="none")
        nm = NoiseModel.from_reference(y, cfg, fraction=0.02)
        assert nm.sigma_noise == pytest.approx(0.04, rel=0.1)
