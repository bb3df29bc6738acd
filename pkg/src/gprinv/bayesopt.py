"""Gaussian-process surrogate optimization of expensive trace misfits.

Used in two places: antenna-pulse calibration (waveform family and center
frequency against known metal-plate geometries) and deterministic parameter
point estimates. The surrogate is a Matern-5/2 GP with per-dimension length
scales on inputs normalized to the unit box and standardized outputs; the
acquisition is expected improvement maximized over a seeded candidate set
with a local polish, so runs are deterministic for a fixed seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.optimize import minimize as scipy_minimize
from scipy.stats import norm, qmc

from .ascan import AScan, envelope, match_grid
from .errors import InstabilityError
from .fdtd import FAMILIES, SourcePulse, simulate_stack
from .objective import ComparisonConfig, relative_error
from .scene import LayerStack, ParameterEntry, ParameterSpace, ParameterVector, parameter_values

_LOG_SF_BOUNDS = (math.log(1e-2), math.log(1e2))
_LOG_LS_BOUNDS = (math.log(0.03), math.log(10.0))
_N_CANDIDATES = 2048


def _seed_list(seed) -> list[int]:
    """Normalize a seed (int or sequence of ints) to a list for default_rng."""
    if np.ndim(seed) == 0:
        return [int(seed)]
    return [int(s) for s in seed]


@dataclass(frozen=True)
class GPModel:
    """Fitted Gaussian-process surrogate (normalized/standardized internally)."""

    x_train: np.ndarray  # (n, d), unit box
    alpha: np.ndarray  # K^-1 y, standardized outputs
    chol_lower: np.ndarray
    log_sf: float
    log_ls: np.ndarray
    jitter: float
    y_mean: float
    y_scale: float
    lows: np.ndarray
    highs: np.ndarray


@dataclass(frozen=True)
class BOResult:
    """Outcome of a surrogate-optimization run."""

    best_theta: ParameterVector
    best_value: float
    history: list[tuple[ParameterVector, float]]
    evaluations_used: int


def _matern52(a: np.ndarray, b: np.ndarray, log_sf: float, log_ls: np.ndarray) -> np.ndarray:
    ls = np.exp(log_ls)
    diff = (a[:, None, :] - b[None, :, :]) / ls
    r = np.sqrt(np.sum(diff**2, axis=-1))
    s5r = math.sqrt(5.0) * r
    return math.exp(2.0 * log_sf) * (1.0 + s5r + (5.0 / 3.0) * r**2) * np.exp(-s5r)


def _negative_log_marginal(params, u, ys, jitter):
    log_sf, log_ls = params[0], params[1:]
    k = _matern52(u, u, log_sf, log_ls)
    k[np.diag_indices_from(k)] += jitter
    try:
        low = cholesky(k, lower=True)
    except np.linalg.LinAlgError:
        return 1e25
    alpha = cho_solve((low, True), ys)
    return float(
        0.5 * ys @ alpha + np.sum(np.log(np.diag(low))) + 0.5 * ys.size * math.log(2.0 * math.pi)
    )


def gp_fit(X, y, space: ParameterSpace, seed=0, restarts: int = 8,
           jitter: float = 1e-8) -> GPModel:
    """Fit the surrogate by maximizing the marginal likelihood.

    Hyperparameters are found by multi-start L-BFGS-B over log-scale bounds
    (``restarts`` starts, seeded); exact duplicate inputs are averaged with
    a warning.
    """
    xs = np.array([parameter_values(x) for x in X], dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.ndim != 2 or xs.shape[0] != ys.shape[0] or xs.shape[0] < 2:
        raise ValueError("need matching X, y with at least 2 observations")
    if not np.all(np.isfinite(ys)):
        raise ValueError("training outputs must be finite")
    lows, highs = space.lows, space.highs
    u = (xs - lows) / (highs - lows)

    uniq, inverse = np.unique(u, axis=0, return_inverse=True)
    if uniq.shape[0] < u.shape[0]:
        warnings.warn("duplicate training inputs averaged before GP fit", stacklevel=2)
        ys = np.array([ys[inverse == i].mean() for i in range(uniq.shape[0])])
        u = uniq

    y_mean = float(ys.mean())
    y_scale = float(ys.std())
    if y_scale == 0.0:
        y_scale = 1.0
    ys_std = (ys - y_mean) / y_scale

    dim = u.shape[1]
    bounds = [_LOG_SF_BOUNDS] + [_LOG_LS_BOUNDS] * dim
    rng = np.random.default_rng(_seed_list(seed) + [101])
    starts = [np.concatenate(([math.log(1.0)], np.full(dim, math.log(0.3))))]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    for _ in range(max(restarts - 1, 0)):
        starts.append(lo + rng.random(dim + 1) * (hi - lo))

    best = None
    for x0 in starts:
        res = scipy_minimize(
            _negative_log_marginal, x0, args=(u, ys_std, jitter),
            method="L-BFGS-B", bounds=bounds,
        )
        if best is None or res.fun < best.fun:
            best = res
    log_sf, log_ls = float(best.x[0]), np.array(best.x[1:])

    k = _matern52(u, u, log_sf, log_ls)
    low = None
    jit = jitter
    while jit <= 1e-2:
        try:
            low = cholesky(k + jit * np.eye(k.shape[0]), lower=True)
            break
        except np.linalg.LinAlgError:
            jit *= 100.0
    if low is None:
        raise RuntimeError("kernel matrix singular even after jitter escalation")
    alpha = cho_solve((low, True), ys_std)
    return GPModel(
        x_train=u, alpha=alpha, chol_lower=low, log_sf=log_sf, log_ls=log_ls,
        jitter=jit, y_mean=y_mean, y_scale=y_scale, lows=lows, highs=highs,
    )


def _predict_unit(m: GPModel, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean/sd (raw output units) at unit-box points u of shape (q, d)."""
    kvec = _matern52(u, m.x_train, m.log_sf, m.log_ls)
    mean_std = kvec @ m.alpha
    w = cho_solve((m.chol_lower, True), kvec.T, check_finite=False)
    var = math.exp(2.0 * m.log_sf) - np.sum(kvec * w.T, axis=1)
    sd_std = np.sqrt(np.maximum(var, 0.0))
    return m.y_mean + m.y_scale * mean_std, m.y_scale * sd_std


def gp_predict(m: GPModel, x) -> tuple[float, float]:
    """Posterior mean and standard deviation at a single point."""
    values = parameter_values(x)
    u = (values - m.lows) / (m.highs - m.lows)
    mean, sd = _predict_unit(m, u[None, :])
    return float(mean[0]), float(sd[0])


def expected_improvement(mean, sd, best_so_far):
    """Minimization expected improvement; max(best - mean, 0) where sd = 0."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    out = np.maximum(best_so_far - mean, 0.0)
    positive = sd > 0
    z = np.where(positive, (best_so_far - mean) / np.where(positive, sd, 1.0), 0.0)
    ei = (best_so_far - mean) * norm.cdf(z) + sd * norm.pdf(z)
    out = np.where(positive, ei, out)
    return float(out) if out.ndim == 0 else out


def minimize(objective, space: ParameterSpace, budget: int, n_init: int,
             seed: int, mapper=None) -> BOResult:
    """Minimize an expensive objective over a bounded box.

    Latin-hypercube initialization, then fit/acquire/evaluate rounds with
    expected improvement maximized over a seeded candidate set (ties broken
    by lowest candidate index) followed by a local polish. Non-finite
    objective values are recorded with a large penalty rather than dropped.
    ``mapper`` (an ordered map) parallelizes the initial batch.
    """
    if n_init < 2:
        raise ValueError(f"n_init must be >= 2, got {n_init}")
    if budget <= n_init:
        raise ValueError(f"budget ({budget}) must exceed n_init ({n_init})")
    mapper = mapper or map
    dim = space.dim
    lows, highs = space.lows, space.highs

    sampler = qmc.LatinHypercube(d=dim, seed=np.random.default_rng([int(seed), 101, 11]))
    u_init = sampler.random(n_init)
    thetas = [lows + u * (highs - lows) for u in u_init]
    raw = list(mapper(objective, thetas))

    finite = [v for v in raw if np.isfinite(v)]
    if not finite:
        raise RuntimeError("objective returned non-finite values at every init point")
    worst = max(finite)
    penalty = 1e3 * worst if worst > 0 else worst + 1e3 * (1.0 + abs(worst))
    values = [float(v) if np.isfinite(v) else penalty for v in raw]

    for round_idx in range(budget - n_init):
        model = gp_fit(thetas, values, space, seed=[int(seed), 101, 13, round_idx])
        rng = np.random.default_rng([int(seed), 101, 17, round_idx])
        candidates = rng.random((_N_CANDIDATES, dim))
        mean, sd = _predict_unit(model, candidates)
        best_so_far = min(values)
        ei = expected_improvement(mean, sd, best_so_far)
        top = int(np.argmax(ei))  # first maximum wins ties

        def neg_ei(u):
            m, s = _predict_unit(model, u[None, :])
            return -float(expected_improvement(m, s, best_so_far)[0])

        res = scipy_minimize(
            neg_ei, candidates[top], method="L-BFGS-B", bounds=[(0.0, 1.0)] * dim
        )
        u_next = res.x if -res.fun >= ei[top] else candidates[top]
        theta = lows + u_next * (highs - lows)
        value = objective(theta)
        if not np.isfinite(value):
            worst = max(v for v in values if np.isfinite(v))
            value = 1e3 * worst if worst > 0 else worst + 1e3 * (1.0 + abs(worst))
        thetas.append(theta)
        values.append(float(value))

    best_idx = int(np.argmin(values))
    history = [(ParameterVector(tuple(t)), v) for t, v in zip(thetas, values)]
    return BOResult(
        best_theta=history[best_idx][0],
        best_value=values[best_idx],
        history=history,
        evaluations_used=len(history),
    )


# ---------------------------------------------------------------------------
# Antenna-pulse calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationResult:
    """Winning waveform family and center frequency, plus per-family searches."""

    family: str
    f_c: float
    results: dict[str, BOResult]


def _calibration_misfit(trace: AScan, stack: LayerStack, pulse: SourcePulse,
                        points_per_wavelength: int, courant: float) -> float:
    """Envelope-domain relative error with peak alignment and peak-amplitude
    normalization, on the measured trace's grid."""
    span = trace.dt * (len(trace) - 1)
    try:
        sim, _ = simulate_stack(
            stack, pulse, points_per_wavelength, courant,
            t_max=span + 2.0 * pulse.delay,
        )
    except InstabilityError:
        return math.inf
    sim = match_grid(sim, trace)
    peak_meas = envelope(trace).samples.max()
    peak_sim = envelope(sim).samples.max()
    if peak_sim <= 0:
        return math.inf
    sim = sim.with_samples(sim.samples * (peak_meas / peak_sim))
    return relative_error(trace, sim, ComparisonConfig(domain="envelope", alignment="peak"))


def calibrate_pulse(
    measurements: list[tuple[AScan, LayerStack]],
    f_band: tuple[float, float],
    budget: int = 48,
    seed: int = 0,
    families: tuple[str, ...] = FAMILIES,
    n_init: int = 8,
    points_per_wavelength: int = 20,
    courant: float = 0.99,
    mapper=None,
) -> CalibrationResult:
    """Find the waveform family and center frequency matching the measurements.

    Each measurement pairs a recorded trace with its known calibration
    geometry (a reflector at known stand-off). The categorical family is
    searched by one independent continuous BO run per family over f_c; the
    winner is the (family, f_c) with the lowest summed envelope misfit.
    """
    if not measurements:
        raise ValueError("need at least one (trace, stack) measurement")
    f_lo, f_hi = f_band
    if not 0 < f_lo < f_hi:
        raise ValueError(f"invalid frequency band {f_band}")

    results: dict[str, BOResult] = {}
    space = ParameterSpace(
        (ParameterEntry("f_c_hz", path="pulse.f_c", low=f_lo, high=f_hi, unit="Hz"),)
    )
    for k, family in enumerate(families):

        def misfit(theta, family=family):
            f_c = float(np.asarray(theta).ravel()[0])
            pulse = SourcePulse(family, f_c)
            return sum(
                _calibration_misfit(trace, stack, pulse, points_per_wavelength, courant)
                for trace, stack in measurements
            )

        results[family] = minimize(
            misfit, space, budget=budget, n_init=n_init,
            seed=int(seed) + 7919 * k, mapper=mapper,
        )

    winner = min(families, key=lambda fam: results[fam].best_value)
    return CalibrationResult(
        family=winner,
        f_c=float(results[winner].best_theta.values[0]),
        results=results,
    )
