"""Affine-invariant ensemble sampler, convergence diagnostics and summaries.

The sampler advances an ensemble of walkers with stretch moves: a walker x
proposes y = x_partner + Z*(x - x_partner) against a partner drawn from the
complementary half-ensemble, with Z ~ g(z) proportional to 1/sqrt(z) on
[1/a, a], accepted with probability min(1, Z^(dim-1) * exp(delta log
posterior)). The random stream is split per (step, walker), so chains are
reproducible bit-for-bit regardless of how many workers evaluate the
posterior.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .scene import ParameterSpace, ParameterVector


@dataclass(frozen=True)
class Chain:
    """Ensemble samples: row 0 is the initial ensemble, later rows follow updates."""

    names: tuple[str, ...]
    samples: np.ndarray  # (n_steps, n_walkers, dim)
    log_post: np.ndarray  # (n_steps, n_walkers)
    acceptance_count: np.ndarray | None  # per walker; None when unknown (CSV import)
    seed: int

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def n_walkers(self) -> int:
        return self.samples.shape[1]

    @property
    def dim(self) -> int:
        return self.samples.shape[2]

    def theta(self, step: int, walker: int) -> ParameterVector:
        return ParameterVector(tuple(self.samples[step, walker]))


@dataclass(frozen=True)
class Diagnostics:
    """Split R-hat and effective sample size per parameter, mean acceptance."""

    r_hat: dict[str, float]
    effective_sample_size: dict[str, float]
    mean_acceptance: float

    @property
    def converged(self) -> bool:
        return all(np.isfinite(v) and v < 1.05 for v in self.r_hat.values())


@dataclass(frozen=True)
class ParamSummary:
    name: str
    mean: float
    sd: float
    map_value: float  # marginal mode (highest-count histogram bin center)
    ci_low: float
    ci_high: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray


@dataclass(frozen=True)
class PosteriorSummary:
    params: dict[str, ParamSummary]
    joint_map: ParameterVector
    joint_map_log_post: float
    pair_hists: dict[tuple[str, str], tuple[np.ndarray, np.ndarray, np.ndarray]]


def sample(log_post, space: ParameterSpace, n_walkers: int = 17, n_steps: int = 1000,
           seed: int = 0, a: float = 2.0, mapper=None) -> Chain:
    """Run the ensemble sampler over the prior box.

    Walkers start uniform over the prior box (re-drawn up to 100 times each
    until the posterior is finite). ``mapper`` (an ordered map) parallelizes
    posterior evaluations within each half-ensemble update.
    """
    dim = space.dim
    if dim == 0:
        raise ValueError("parameter space has dimension 0")
    if n_walkers < 2 * dim + 2:
        raise ValueError(f"need n_walkers >= 2*dim + 2 = {2 * dim + 2}, got {n_walkers}")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if a <= 1:
        raise ValueError("stretch parameter a must exceed 1")
    mapper = mapper or map
    lows, highs = space.lows, space.highs

    # Initialization: per-walker streams, batch evaluation, redraw failures.
    pos = np.empty((n_walkers, dim))
    lp = np.full(n_walkers, -np.inf)
    rngs = [np.random.default_rng([seed, 0, w]) for w in range(n_walkers)]
    pending = list(range(n_walkers))
    for _ in range(100):
        if not pending:
            break
        for w in pending:
            pos[w] = lows + rngs[w].random(dim) * (highs - lows)
        vals = list(mapper(log_post, [pos[w].copy() for w in pending]))
        still = []
        for w, v in zip(pending, vals):
            if np.isfinite(v):
                lp[w] = v
            else:
                still.append(w)
        pending = still
    if pending:
        raise RuntimeError(
            "initialization failed: posterior is -inf everywhere sampled for "
            f"walkers {pending}; check bounds and data"
        )

    samples = np.empty((n_steps, n_walkers, dim))
    log_post_store = np.empty((n_steps, n_walkers))
    samples[0] = pos
    log_post_store[0] = lp
    accept = np.zeros(n_walkers, dtype=int)

    half = n_walkers // 2
    halves = (np.arange(half), np.arange(half, n_walkers))
    for t in range(1, n_steps):
        for active, other in ((halves[0], halves[1]), (halves[1], halves[0])):
            proposals = np.empty((active.size, dim))
            zs = np.empty(active.size)
            us = np.empty(active.size)
            for i, w in enumerate(active):
                rng = np.random.default_rng([seed, t, int(w)])
                partner = pos[other[rng.integers(other.size)]]
                z = (1.0 + (a - 1.0) * rng.random()) ** 2 / a
                us[i] = rng.random()
                zs[i] = z
                proposals[i] = partner + z * (pos[w] - partner)
            # Out-of-box proposals are rejected without evaluating the
            # posterior: the bounded uniform prior has no support there.
            in_box = np.all((proposals >= lows) & (proposals <= highs), axis=1)
            lp_new = np.full(active.size, -np.inf)
            todo = np.flatnonzero(in_box)
            if todo.size:
                evaluated = list(mapper(log_post, [proposals[i].copy() for i in todo]))
                lp_new[todo] = evaluated
            for i, w in enumerate(active):
                log_ratio = (dim - 1) * math.log(zs[i]) + lp_new[i] - lp[w]
                if math.log(us[i]) < log_ratio:
                    pos[w] = proposals[i]
                    lp[w] = lp_new[i]
                    accept[w] += 1
        samples[t] = pos
        log_post_store[t] = lp

    return Chain(
        names=tuple(space.names),
        samples=samples,
        log_post=log_post_store,
        acceptance_count=accept,
        seed=seed,
    )


def _autocorr_time(x: np.ndarray) -> float:
    """Integrated autocorrelation time of one scalar walker trace.

    FFT autocorrelation with the standard self-consistent window
    (smallest M with M >= 5 * tau_hat(M)).
    """
    n = x.size
    x = x - x.mean()
    if not np.any(x):
        return 1.0
    m = 1
    while m < 2 * n:
        m *= 2
    f = np.fft.rfft(x, n=m)
    acf = np.fft.irfft(f * np.conj(f), n=m)[:n].real
    acf /= acf[0]
    taus = 2.0 * np.cumsum(acf) - 1.0
    for window in range(1, n):
        if window >= 5.0 * taus[window]:
            return max(float(taus[window]), 1.0)
    return max(float(taus[-1]), 1.0)


def diagnostics(chain: Chain, burn_in_fraction: float = 0.5) -> Diagnostics:
    """Split R-hat and autocorrelation-based ESS on the post-burn-in chain."""
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError("burn_in_fraction must be in [0, 1)")
    burn = int(chain.n_steps * burn_in_fraction)
    post = chain.samples[burn:]
    n_post = post.shape[0]
    if n_post < 4:
        raise ValueError(f"need >= 4 post-burn-in steps, got {n_post}")

    r_hat = {}
    ess = {}
    m = n_post // 2
    for p, name in enumerate(chain.names):
        traces = post[:, :, p]  # (n_post, n_walkers)
        # Split each walker trace in half -> 2 * n_walkers sequences of length m.
        split = np.concatenate([traces[:m], traces[m : 2 * m]], axis=1).T  # (2nw, m)
        within = split.var(axis=1, ddof=1).mean()
        between = m * split.mean(axis=1).var(ddof=1)
        if within == 0.0:
            if between == 0.0:
                warnings.warn(
                    f"parameter {name!r} has zero variance in every walker; "
                    "R-hat undefined", stacklevel=2,
                )
                r_hat[name] = math.nan
            else:
                r_hat[name] = math.inf
        else:
            var_plus = (m - 1) / m * within + between / m
            r_hat[name] = float(math.sqrt(var_plus / within))
        ess[name] = float(
            sum(n_post / _autocorr_time(traces[:, w]) for w in range(chain.n_walkers))
        )

    if chain.acceptance_count is None or chain.n_steps < 2:
        acc = math.nan
    else:
        acc = float(np.mean(chain.acceptance_count / (chain.n_steps - 1)))
    return Diagnostics(r_hat=r_hat, effective_sample_size=ess, mean_acceptance=acc)


def _fd_histogram(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Histogram with Freedman-Diaconis bin widths (deterministic, scale-aware)."""
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return np.array([lo, hi]), np.array([x.size])
    q75, q25 = np.percentile(x, [75.0, 25.0])
    width = 2.0 * (q75 - q25) / x.size ** (1.0 / 3.0)
    if width <= 0:
        n_bins = max(int(math.sqrt(x.size)), 1)
    else:
        n_bins = int(np.clip(math.ceil((hi - lo) / width), 1, 200))
    counts, edges = np.histogram(x, bins=n_bins, range=(lo, hi))
    return edges, counts


def summarize(chain: Chain, burn_in_fraction: float = 0.5) -> PosteriorSummary:
    """Marginal statistics, histogram modes and the joint MAP sample."""
    burn = int(chain.n_steps * burn_in_fraction)
    post = chain.samples[burn:]
    flat = post.reshape(-1, chain.dim)
    if flat.shape[0] < 100:
        raise ValueError(
            f"need >= 100 post-burn-in samples to summarize, got {flat.shape[0]}"
        )

    params = {}
    for p, name in enumerate(chain.names):
        x = flat[:, p]
        edges, counts = _fd_histogram(x)
        mode_bin = int(np.argmax(counts))
        map_value = 0.5 * (edges[mode_bin] + edges[mode_bin + 1])
        ci_low, ci_high = np.percentile(x, [2.5, 97.5])
        params[name] = ParamSummary(
            name=name,
            mean=float(x.mean()),
            sd=float(x.std(ddof=1)) if x.size > 1 else 0.0,
            map_value=float(map_value),
            ci_low=float(ci_low),
            ci_high=float(ci_high),
            hist_edges=edges,
            hist_counts=counts,
        )

    best = np.unravel_index(int(np.argmax(chain.log_post)), chain.log_post.shape)
    joint_map = ParameterVector(tuple(chain.samples[best[0], best[1]]))

    pair_hists = {}
    for i in range(chain.dim):
        for j in range(i + 1, chain.dim):
            bins_i = min(len(params[chain.names[i]].hist_counts), 60)
            bins_j = min(len(params[chain.names[j]].hist_counts), 60)
            counts, xe, ye = np.histogram2d(flat[:, i], flat[:, j], bins=[bins_i, bins_j])
            pair_hists[(chain.names[i], chain.names[j])] = (xe, ye, counts)

    return PosteriorSummary(
        params=params,
        joint_map=joint_map,
        joint_map_log_post=float(chain.log_post[best[0], best[1]]),
        pair_hists=pair_hists,
    )


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def chain_to_csv(chain: Chain, path) -> None:
    """Write the chain as CSV: step, walker, each parameter, log_posterior."""
    with open(path, "w", newline="") as fh:
        fh.write("step,walker," + ",".join(chain.names) + ",log_posterior\n")
        for t in range(chain.n_steps):
            for w in range(chain.n_walkers):
                values = ",".join(f"{v:.17g}" for v in chain.samples[t, w])
                fh.write(f"{t},{w},{values},{chain.log_post[t, w]:.17g}\n")


def chain_from_csv(path) -> Chain:
    """Read a chain CSV back; acceptance counts are not recoverable."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["step", "walker"] or header[-1] != "log_posterior":
            raise ValueError(f"{path}: not a chain CSV (bad header)")
        names = tuple(header[2:-1])
        rows = [(int(r[0]), int(r[1]), [float(v) for v in r[2:-1]], float(r[-1]))
                for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: empty chain")
    n_steps = max(r[0] for r in rows) + 1
    n_walkers = max(r[1] for r in rows) + 1
    if len(rows) != n_steps * n_walkers:
        raise ValueError(f"{path}: incomplete chain grid")
    samples = np.empty((n_steps, n_walkers, len(names)))
    log_post = np.empty((n_steps, n_walkers))
    for t, w, vals, lp in rows:
        samples[t, w] = vals
        log_post[t, w] = lp
    return Chain(names=names, samples=samples, log_post=log_post,
                 acceptance_count=None, seed=0)


def summary_to_dict(summary: PosteriorSummary) -> dict:
    """JSON-friendly view of a posterior summary."""
    return {
        "parameters": {
            name: {
                "mean": p.mean,
                "sd": p.sd,
                "map": p.map_value,
                "ci_95": [p.ci_low, p.ci_high],
                "hist_edges": [float(v) for v in p.hist_edges],
                "hist_counts": [int(v) for v in p.hist_counts],
            }
            for name, p in summary.params.items()
        },
        "joint_map": {
            "values": list(summary.joint_map.values),
            "log_posterior": summary.joint_map_log_post,
        },
    }
