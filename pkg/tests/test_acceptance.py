"""Acceptance suite: one test per criterion, each printing a verdict line.

Test profile (documented): forward runs for the inversion criteria use 10
grid points per smallest wavelength (the solver-accuracy criteria run at
the default 20); posterior sampling follows the two-stage workflow — an
envelope-misfit surrogate optimization localizes the prior box, then the
ensemble sampler draws the posterior on the raw-trace likelihood. The
five-parameter criterion uses a measurement-noise scale of 15% of the peak
envelope, matching posterior widths to its stated tolerances; everything
is seeded and byte-reproducible.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to stream the
verdict lines).
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.stats import kstest

from gprinv.ascan import envelope, write_ascan_csv
from gprinv.bayesopt import calibrate_pulse, minimize
from gprinv.cli import main
from gprinv.fdtd import SourcePulse, simulate_stack
from gprinv.inversion import TraceForward, localized_space
from gprinv.mcmc import diagnostics, sample, summarize
from gprinv.objective import ComparisonConfig, NoiseModel, log_posterior, relative_error
from gprinv.oracle import attenuation_constant, grid_matched_response
from gprinv.petro import topp_permittivity, topp_vwc
from gprinv.scene import (
    HalfSpace,
    Layer,
    LayerStack,
    ParameterEntry,
    ParameterSpace,
    scene_to_dict,
    two_way_time,
)
from tracetools import direct_and_reflection

PULSE = SourcePulse("gaussian", 1.579e9)
RAW = ComparisonConfig(domain="raw", alignment="none")
ENVELOPE_CFG = ComparisonConfig(domain="envelope", alignment="none")
INVERSION_PPW = 10


def verdict(criterion, detail):
    print(f"[criterion {criterion:>2}] PASS — {detail}")


def two_stage_posterior(template, space, data, sigma, seed, bo_budget, bo_init,
                        steps, walkers=17):
    """The documented two-stage profile: envelope-BO localization, raw sampling."""
    forward = TraceForward(template, space, PULSE, data, INVERSION_PPW)

    def misfit(theta):
        try:
            return relative_error(data, forward(theta), ENVELOPE_CFG)
        except Exception:
            return math.inf

    stage1 = minimize(misfit, space, budget=bo_budget, n_init=bo_init, seed=seed)
    narrowed = localized_space(space, template, stage1.best_theta.as_array())
    noise = NoiseModel(sigma)

    def log_post(theta):
        return log_posterior(theta, data, forward, narrowed, noise, RAW)

    chain = sample(log_post, narrowed, n_walkers=walkers, n_steps=steps, seed=seed)
    return stage1, chain


def test_criterion_01_fdtd_oracle_equivalence():
    suite = [
        ("air/PEC", LayerStack(0.24, (), "pec")),
        ("air+soil/PEC", LayerStack(0.10, (Layer(0.15, 5.47, 0.0, "soil"),), "pec")),
        ("air+soil/PEC lossy", LayerStack(0.10, (Layer(0.15, 5.47, 0.01, "soil"),), "pec")),
        ("air+organic+soil/PEC", LayerStack(
            0.10, (Layer(0.10, 3.0, 0.0, "organic"), Layer(0.15, 5.47, 0.0, "soil")), "pec")),
        ("air+organic+soil/PEC lossy", LayerStack(
            0.10, (Layer(0.10, 3.0, 0.005, "organic"), Layer(0.15, 5.47, 0.01, "soil")), "pec")),
        ("air+wet-soil/PEC lossy", LayerStack(0.10, (Layer(0.15, 9.0, 0.01, "soil"),), "pec")),
        ("air/half-space", LayerStack(0.30, (), HalfSpace(9.0))),
    ]
    worst = 0.0
    for name, stack in suite:
        t0 = time.perf_counter()
        trace, grid = simulate_stack(stack, PULSE)
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"{name}: simulation took {elapsed:.1f} s"
        reference = grid_matched_response(grid, PULSE)
        err = relative_error(envelope(trace), envelope(reference), RAW)
        assert err < 2.0, f"{name}: envelope relative error {err:.3f}% >= 2%"
        worst = max(worst, err)
    verdict(1, f"{len(suite)} stacks, worst envelope error {worst:.3f}% < 2%")


def test_criterion_02_travel_time_anchor():
    for gap, expected in ((0.24, 1.600e-9), (0.43, 2.867e-9)):
        trace, grid = simulate_stack(LayerStack(gap, (), "pec"), PULSE)
        (t_d, _), (t_r, _) = direct_and_reflection(trace, two_way_time(grid.snapped))
        err = abs((t_r - t_d) - expected)
        assert err < 2 * grid.dt, f"gap {gap}: separation off by {err / grid.dt:.2f} dt"
    verdict(2, "0.24 m -> 1.600 ns and 0.43 m -> 2.867 ns within 2 time steps")


def test_criterion_03_fresnel_amplitude():
    trace, grid = simulate_stack(LayerStack(0.30, (), HalfSpace(9.0)), PULSE)
    (t_d, h_d), (t_r, h_r) = direct_and_reflection(trace, two_way_time(grid.snapped))
    ratio = h_r / h_d
    assert ratio == pytest.approx(0.5, rel=0.03)
    sel = np.abs(trace.times - t_r) < 2 * PULSE.delay
    assert trace.samples[sel].min() < -0.8 * h_r, "reflected pulse not inverted"
    assert trace.samples[sel].max() < 0.5 * h_r
    verdict(3, f"reflected/direct ratio {ratio:.4f} = 0.5 +- 3%, inversion verified")


def test_criterion_04_conductive_attenuation():
    d_nominal = 0.15

    def bottom(sigma):
        stack = LayerStack(0.20, (Layer(d_nominal, 9.0, sigma, "slab"),), "pec")
        trace, grid = simulate_stack(stack, PULSE)
        _, (_, h) = direct_and_reflection(trace, two_way_time(grid.snapped), 0.02)
        return h, grid.snapped.layers[0].thickness

    h0, d = bottom(0.0)
    h1, _ = bottom(0.01)
    alpha = attenuation_constant(9.0, 0.01, PULSE.f_c)
    expected = math.exp(-2 * alpha * d)
    assert h1 / h0 == pytest.approx(expected, rel=0.05)
    verdict(4, f"round-trip decay {h1 / h0:.4f} vs exp(-2 alpha d) = {expected:.4f} (within 5%)")


def test_criterion_05_topp_values():
    assert topp_vwc(10.2).vwc == pytest.approx(0.1922, abs=1e-4)
    assert topp_vwc(5.47).vwc == pytest.approx(0.0910, abs=1e-4)
    for eps in (2.5, 5.47, 10.2, 25.0):
        assert topp_permittivity(topp_vwc(eps).vwc) == pytest.approx(eps, abs=1e-6)
    verdict(5, "vwc(10.2)=0.1922, vwc(5.47)=0.0910 (1e-4), inverse round trip to 1e-6")


def test_criterion_06_calibration_round_trip():
    measurements = []
    for gap in (0.24, 0.43):
        stack = LayerStack(gap, (), "pec")
        trace, _ = simulate_stack(stack, PULSE)
        measurements.append((trace, stack))
    budget = 48  # <= 60 objective evaluations per family
    result = calibrate_pulse(measurements, (0.5e9, 5.0e9), budget=budget,
                             n_init=10, seed=42)
    assert result.family == "gaussian"
    rel = abs(result.f_c - PULSE.f_c) / PULSE.f_c
    assert rel < 0.02, f"recovered f_c off by {rel:.2%}"
    assert all(r.evaluations_used <= 60 for r in result.results.values())
    verdict(6, f"recovered gaussian at {result.f_c / 1e9:.4f} GHz "
               f"({rel:.2%} error) in {budget} evaluations per family")


def test_criterion_07_single_parameter_round_trip():
    template = LayerStack(0.10, (Layer(0.15, 9.0, 0.0, "soil"),), "pec")
    space = ParameterSpace((ParameterEntry("eps1", "soil.eps_r", 1.0, 30.0),))
    bo_errs, map_errs, covers = [], [], []
    for i, eps_true in enumerate((4.0, 6.0, 9.0, 12.0, 16.0)):
        for noisy in (False, True):
            seed = 1000 + 10 * i + int(noisy)
            truth = LayerStack(0.10, (Layer(0.15, eps_true, 0.0, "soil"),), "pec")
            data, _ = simulate_stack(truth, PULSE, points_per_wavelength=INVERSION_PPW)
            sigma = 0.02 * float(np.abs(data.samples).max())
            if noisy:
                rng = np.random.default_rng([seed, 99])
                data = data.with_samples(data.samples + rng.normal(0, sigma, len(data)))
            stage1, chain = two_stage_posterior(template, space, data, sigma, seed,
                                                bo_budget=64, bo_init=16, steps=600)
            p = summarize(chain).params["eps1"]
            bo_errs.append(abs(stage1.best_theta.values[0] - eps_true))
            map_errs.append(abs(p.map_value - eps_true))
            covers.append(p.ci_low <= eps_true <= p.ci_high)
    assert max(bo_errs) <= 0.2, f"worst BO error {max(bo_errs):.3f} > 0.2"
    assert max(map_errs) <= 0.3, f"worst MAP error {max(map_errs):.3f} > 0.3"
    assert sum(covers) >= 9, f"95% CI covered truth in only {sum(covers)}/10 cases"
    verdict(7, f"10 cases: worst BO err {max(bo_errs):.3f} <= 0.2, "
               f"worst MAP err {max(map_errs):.3f} <= 0.3, CI coverage {sum(covers)}/10")


def test_criterion_08_five_parameter_round_trip():
    t_start = time.perf_counter()
    template = LayerStack(
        0.10, (Layer(0.12, 4.0, 0.002, "organic"), Layer(0.15, 9.0, 0.002, "soil")), "pec")
    space = ParameterSpace((
        ParameterEntry("eps1", "soil.eps_r", 1.0, 15.0),
        ParameterEntry("eps2", "organic.eps_r", 1.0, 15.0),
        ParameterEntry("sig1", "soil.sigma", 0.0, 0.05),
        ParameterEntry("sig2", "organic.sigma", 0.0, 0.05),
        ParameterEntry("d2", "organic.thickness", 0.03, 0.20),
    ))
    truth = LayerStack(
        0.10, (Layer(0.10, 3.0, 0.005, "organic"), Layer(0.15, 5.47, 0.01, "soil")), "pec")
    data, _ = simulate_stack(truth, PULSE, points_per_wavelength=INVERSION_PPW)
    sigma = 0.15 * float(envelope(data).samples.max())
    stage1, chain = two_stage_posterior(template, space, data, sigma, seed=88,
                                        bo_budget=144, bo_init=64, steps=12000)
    diag = diagnostics(chain)
    summ = summarize(chain)
    elapsed = time.perf_counter() - t_start

    worst_rhat = max(diag.r_hat.values())
    assert worst_rhat < 1.05, f"split R-hat {worst_rhat:.3f} >= 1.05"
    d2_err = abs(summ.params["d2"].map_value - 0.10)
    eps1_err = abs(summ.params["eps1"].map_value - 5.47)
    assert d2_err <= 0.01, f"d2 MAP off by {d2_err * 100:.2f} cm"
    assert eps1_err <= 0.5, f"eps1 MAP off by {eps1_err:.3f}"
    assert elapsed <= 1800, f"took {elapsed / 60:.1f} min > 30 min"
    verdict(8, f"R-hat max {worst_rhat:.3f} < 1.05, d2 MAP err {d2_err * 1000:.1f} mm "
               f"<= 10 mm, eps1 MAP err {eps1_err:.3f} <= 0.5, {elapsed / 60:.1f} min")


def test_criterion_09_uncertainty_ordering_with_depth():
    sigma_organic = 0.075
    space = ParameterSpace((ParameterEntry("eps1", "soil.eps_r", 1.0, 30.0),))

    def scene(d2, soil_eps):
        return LayerStack(
            0.10, (Layer(d2, 3.0, sigma_organic, "organic"), Layer(0.15, soil_eps, 0.0, "soil")),
            "pec")

    # attenuating sigma chosen so the 15 cm case's bottom reflection is
    # below 10% of the direct arrival
    check, grid = simulate_stack(scene(0.15, 5.47), PULSE, points_per_wavelength=INVERSION_PPW)
    (t_d, h_d), (_, h_b) = direct_and_reflection(check, two_way_time(grid.snapped), 0.005)
    assert h_b / h_d < 0.10, f"bottom/direct {h_b / h_d:.3f} >= 0.10 at 15 cm"

    sds = []
    for d2 in (0.05, 0.10, 0.15):
        seed = 500 + int(d2 * 100)
        data, _ = simulate_stack(scene(d2, 5.47), PULSE, points_per_wavelength=INVERSION_PPW)
        sigma = 0.02 * float(envelope(data).samples.max())
        _, chain = two_stage_posterior(scene(d2, 9.0), space, data, sigma, seed,
                                       bo_budget=48, bo_init=12, steps=1200)
        sds.append(summarize(chain).params["eps1"].sd)
    assert sds[0] < sds[1] < sds[2], f"posterior sd not increasing with depth: {sds}"
    verdict(9, "depth 5/10/15 cm -> sd(eps1) = "
               + "/".join(f"{s:.4f}" for s in sds) + " strictly increasing "
               f"(15 cm bottom reflection {h_b / h_d:.3f} of direct)")


def test_criterion_09_uncertainty_ordering_with_noise():
    # Equivalent formulation: larger added data noise widens the posterior.
    truth = LayerStack(
        0.10, (Layer(0.10, 3.0, 0.01, "organic"), Layer(0.15, 5.47, 0.0, "soil")), "pec")
    template = LayerStack(
        0.10, (Layer(0.10, 3.0, 0.01, "organic"), Layer(0.15, 9.0, 0.0, "soil")), "pec")
    space = ParameterSpace((ParameterEntry("eps1", "soil.eps_r", 1.0, 30.0),))
    clean, _ = simulate_stack(truth, PULSE, points_per_wavelength=INVERSION_PPW)
    peak = float(envelope(clean).samples.max())
    sds = []
    for i, frac in enumerate((0.01, 0.03, 0.06)):
        rng = np.random.default_rng([777, i])
        data = clean.with_samples(clean.samples + rng.normal(0, frac * peak, len(clean)))
        _, chain = two_stage_posterior(template, space, data, frac * peak, seed=700 + i,
                                       bo_budget=48, bo_init=12, steps=1200)
        sds.append(summarize(chain).params["eps1"].sd)
    assert sds[0] < sds[1] < sds[2], f"posterior sd not increasing with noise: {sds}"
    verdict(9, "noise 1/3/6% of peak -> sd(eps1) = "
               + "/".join(f"{s:.4f}" for s in sds) + " strictly increasing")


def test_criterion_10_sampler_statistics():
    space = ParameterSpace((
        ParameterEntry("x", "layers[0].eps_r", -6.0, 6.0),
        ParameterEntry("y", "layers[0].sigma", -6.0, 6.0),
    ))

    def log_post(v):
        return -0.5 * float(np.sum(np.asarray(v) ** 2))

    # 3531 steps x 17 walkers -> 30k post-burn-in samples at 50% burn-in.
    chain = sample(log_post, space, n_walkers=17, n_steps=3531, seed=67)
    diag = diagnostics(chain)
    burn = chain.n_steps // 2
    flat = chain.samples[burn:].reshape(-1, 2)
    assert flat.shape[0] >= 30000
    mean_err = float(np.abs(flat.mean(axis=0)).max())
    sd_err = float(np.abs(flat.std(axis=0, ddof=1) - 1.0).max())
    worst_rhat = max(diag.r_hat.values())
    ks = max(kstest(flat[:, i], "norm").statistic for i in range(2))
    assert mean_err < 0.05
    assert sd_err < 0.05
    assert worst_rhat < 1.02
    assert ks < 0.02
    verdict(10, f"{flat.shape[0]} samples: |mean| {mean_err:.3f} < 0.05, "
                f"|sd-1| {sd_err:.3f} < 0.05, R-hat {worst_rhat:.4f} < 1.02, "
                f"KS {ks:.4f} < 0.02")


def test_criterion_11_determinism(tmp_path):
    template = LayerStack(0.06, (Layer(0.08, 9.0, 0.0, "soil"),), "pec")
    truth = LayerStack(0.06, (Layer(0.08, 6.0, 0.0, "soil"),), "pec")
    data, _ = simulate_stack(truth, PULSE, points_per_wavelength=INVERSION_PPW)
    write_ascan_csv(data, tmp_path / "data.csv")
    scene = scene_to_dict(template)
    scene["parameters"] = [{"name": "eps1", "path": "soil.eps_r", "low": 1.0, "high": 20.0}]
    (tmp_path / "scene.json").write_text(json.dumps(scene))
    config = {
        "scene": "scene.json", "data": "data.csv",
        "pulse": {"family": "gaussian", "f_c_hz": 1.579e9},
        "comparison": {"domain": "raw", "alignment": "none"},
        "grid": {"points_per_wavelength": INVERSION_PPW},
        "bo": {"budget": 16, "n_init": 6},
        "mcmc": {"walkers": 8, "steps": 150},
        "seed": 11,
        "output_dir": str(tmp_path / "a"),
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    cfg_path = str(tmp_path / "config.json")

    code_a = main(["invert", cfg_path, "--mode", "mcmc"])
    code_b = main(["invert", cfg_path, "--mode", "mcmc",
                   "--output-dir", str(tmp_path / "b")])
    code_c = main(["invert", cfg_path, "--mode", "mcmc", "--workers", "4",
                   "--output-dir", str(tmp_path / "c")])
    assert code_a == code_b == code_c
    for name in ("chain.csv", "results.csv"):
        ref = (tmp_path / "a" / name).read_bytes()
        assert (tmp_path / "b" / name).read_bytes() == ref, f"{name}: rerun differs"
        assert (tmp_path / "c" / name).read_bytes() == ref, f"{name}: workers change differs"

    main(["invert", cfg_path, "--mode", "bo", "--output-dir", str(tmp_path / "d")])
    main(["invert", cfg_path, "--mode", "bo", "--workers", "4",
          "--output-dir", str(tmp_path / "e")])
    for name in ("history.csv", "results.csv"):
        assert (tmp_path / "d" / name).read_bytes() == (tmp_path / "e" / name).read_bytes()
    verdict(11, "chain/results CSVs byte-identical across reruns and worker counts")
