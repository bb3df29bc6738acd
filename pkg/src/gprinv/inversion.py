"""Inversion workflows: configuration, the trace forward model, BO and MCMC runs.

A run is fully specified by (config file, seed, input files) and is
reproducible byte-for-byte: every random stream is seeded, reductions are
order-deterministic, and the worker count never changes results. The
deterministic numbers land in CSV artifacts; wall time and environment
echoes live in report.json only.
"""

from __future__ import annotations

import json
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ascan import AScan, match_grid, read_ascan_csv
from .bayesopt import minimize
from .errors import ConfigError, InstabilityError
from .fdtd import SourcePulse, discretize, load_pulse, pulse_from_dict, simulate
from .mcmc import Chain, Diagnostics, PosteriorSummary, chain_to_csv, diagnostics as chain_diagnostics, sample, summarize, summary_to_dict
from .objective import ComparisonConfig, NoiseModel, log_posterior, relative_error
from .petro import EPS_VALID, topp_vwc
from .scene import LayerStack, ParameterSpace, _resolve_path, build_scene, load_scene
from .svgplot import histogram_chart, line_chart

log = logging.getLogger(__name__)

R_HAT_THRESHOLD = 1.05


@dataclass
class InversionConfig:
    """Everything one inversion run needs; see README for the JSON schema."""

    scene_path: Path
    data_path: Path
    pulse: SourcePulse
    comparison: ComparisonConfig = ComparisonConfig()
    noise_sigma: float | None = None  # explicit sigma wins over the fraction
    noise_fraction: float = 0.02
    points_per_wavelength: int = 20
    courant: float = 0.99
    bo_budget: int = 60
    bo_n_init: int = 10
    mcmc_walkers: int = 17
    mcmc_steps: int = 2000
    burn_in_fraction: float = 0.5
    mcmc_localize: bool = True
    seed: int = 0
    output_dir: Path = Path(".")
    echo: dict = field(default_factory=dict)


# Waveform misfits are riddled with cycle-skipped local optima (sliding a
# reflection past the data by a pulse width creates a false fit), so chains
# started uniform over wide prior boxes freeze in separate basins. The
# sampler therefore runs, by default, on a prior box localized around the
# surrogate-optimization estimate — the same optimize-then-infer sequence
# the probabilistic workflow is built on. Margins per targeted field:
LOCALIZE_MARGINS = {"eps_r": 1.0, "thickness": 0.03, "air_gap": 0.03}


def localized_space(space: ParameterSpace, template: LayerStack, center) -> ParameterSpace:
    """Shrink prior bounds around a point estimate (conductivities keep
    their full bounds: they attenuate smoothly and never cycle-skip)."""
    from .scene import ParameterEntry

    values = np.asarray(center, dtype=float)
    entries = []
    for entry, value in zip(space.entries, values):
        _, fieldname = _resolve_path(template, entry.path)
        margin = LOCALIZE_MARGINS.get(fieldname)
        if margin is None:
            entries.append(entry)
            continue
        low = max(entry.low, value - margin)
        high = min(entry.high, value + margin)
        entries.append(ParameterEntry(entry.name, entry.path, low, high, entry.unit))
    return ParameterSpace(tuple(entries))


_CONFIG_KEYS = {
    "scene", "data", "pulse", "comparison", "noise", "grid", "bo", "mcmc",
    "seed", "output_dir",
}
_COMPARISON_KEYS = {"domain", "alignment", "window_s"}
_NOISE_KEYS = {"sigma", "fraction_of_peak"}
_GRID_KEYS = {"points_per_wavelength", "courant"}
_BO_KEYS = {"budget", "n_init"}
_MCMC_KEYS = {"walkers", "steps", "burn_in_fraction", "localize"}


def _strict(doc: dict, allowed: set, context: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")


def load_inversion_config(path, seed=None, output_dir=None) -> InversionConfig:
    """Parse a config file; the seed/output_dir arguments override the file.

    A seed is mandatory (there is no wall-clock default) — from the file or
    the command line.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    _strict(doc, _CONFIG_KEYS, "config")
    base = path.parent

    for key in ("scene", "data", "pulse"):
        if key not in doc:
            raise ConfigError(f"config: {key!r} is required")

    pulse_doc = doc["pulse"]
    if isinstance(pulse_doc, str):
        pulse = load_pulse(base / pulse_doc)
    else:
        pulse = pulse_from_dict(pulse_doc)

    comp_doc = doc.get("comparison", {})
    _strict(comp_doc, _COMPARISON_KEYS, "config comparison")
    window = comp_doc.get("window_s")
    try:
        comparison = ComparisonConfig(
            domain=comp_doc.get("domain", "raw"),
            window=None if window is None else (float(window[0]), float(window[1])),
            alignment=comp_doc.get("alignment", "peak"),
        )
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"config comparison: {exc}") from exc

    noise_doc = doc.get("noise", {})
    _strict(noise_doc, _NOISE_KEYS, "config noise")
    grid_doc = doc.get("grid", {})
    _strict(grid_doc, _GRID_KEYS, "config grid")
    bo_doc = doc.get("bo", {})
    _strict(bo_doc, _BO_KEYS, "config bo")
    mcmc_doc = doc.get("mcmc", {})
    _strict(mcmc_doc, _MCMC_KEYS, "config mcmc")

    effective_seed = seed if seed is not None else doc.get("seed")
    if effective_seed is None:
        raise ConfigError("config: a seed is mandatory (config 'seed' or --seed)")
    out = output_dir if output_dir is not None else doc.get("output_dir", ".")

    return InversionConfig(
        scene_path=base / doc["scene"],
        data_path=base / doc["data"],
        pulse=pulse,
        comparison=comparison,
        noise_sigma=None if "sigma" not in noise_doc else float(noise_doc["sigma"]),
        noise_fraction=float(noise_doc.get("fraction_of_peak", 0.02)),
        points_per_wavelength=int(grid_doc.get("points_per_wavelength", 20)),
        courant=float(grid_doc.get("courant", 0.99)),
        bo_budget=int(bo_doc.get("budget", 60)),
        bo_n_init=int(bo_doc.get("n_init", 10)),
        mcmc_walkers=int(mcmc_doc.get("walkers", 17)),
        mcmc_steps=int(mcmc_doc.get("steps", 2000)),
        burn_in_fraction=float(mcmc_doc.get("burn_in_fraction", 0.5)),
        mcmc_localize=bool(mcmc_doc.get("localize", True)),
        seed=int(effective_seed),
        output_dir=Path(out),
        echo=doc,
    )


class TraceForward:
    """Forward model mapping a parameter vector onto the measured-data grid.

    Each call builds the scene, discretizes it (record capped at the data
    span), runs the FDTD solver and resamples onto the data grid. Failure
    and call counts feed the instability-storm guard.
    """

    def __init__(self, template: LayerStack, space: ParameterSpace, pulse: SourcePulse,
                 data: AScan, points_per_wavelength: int = 20, courant: float = 0.99):
        self.template = template
        self.space = space
        self.pulse = pulse
        self.data = data
        self.ppw = points_per_wavelength
        self.courant = courant
        self.t_max = data.dt * (len(data) - 1) + 2.0 * pulse.delay
        self._lock = threading.Lock()
        self.n_calls = 0
        self.n_failures = 0

    def __call__(self, values) -> AScan:
        with self._lock:
            self.n_calls += 1
        stack = build_scene(self.template, self.space, values)
        try:
            grid = discretize(stack, self.pulse, self.ppw, self.courant, t_max=self.t_max)
            trace = simulate(stack, self.pulse, grid)
        except (InstabilityError, ValueError) as exc:
            with self._lock:
                self.n_failures += 1
            if isinstance(exc, InstabilityError):
                raise
            # Geometry that cannot be gridded (layer thinner than 4 cells)
            # behaves like any other failed forward evaluation.
            raise InstabilityError(str(exc)) from exc
        return match_grid(trace, self.data)

    @property
    def failure_fraction(self) -> float:
        return self.n_failures / self.n_calls if self.n_calls else 0.0

    def check_stability(self) -> None:
        if self.n_calls >= 10 and self.failure_fraction > 0.5:
            raise InstabilityError(
                f"{self.n_failures}/{self.n_calls} forward evaluations failed; "
                "widen or narrow the parameter bounds so simulated geometries "
                "stay resolvable and stable"
            )


def _noise_model(cfg: InversionConfig, data: AScan) -> NoiseModel:
    if cfg.noise_sigma is not None:
        return NoiseModel(cfg.noise_sigma)
    return NoiseModel.from_reference(data, cfg.comparison, cfg.noise_fraction)


def _moisture_fields(space: ParameterSpace, template: LayerStack, value_of) -> dict:
    """Permittivity-targeting parameters converted to volumetric water content."""
    out = {}
    for entry in space.entries:
        idx, fieldname = _resolve_path(template, entry.path)
        if fieldname != "eps_r" or idx is None:
            continue
        eps = float(value_of(entry.name))
        layer = template.layers[idx].name or f"layers[{idx}]"
        if not EPS_VALID[0] <= eps <= EPS_VALID[1]:
            out[entry.name] = {"layer": layer, "eps_r": eps, "vwc": None,
                               "guard": "outside-validity-range"}
        else:
            m = topp_vwc(eps)
            out[entry.name] = {"layer": layer, "eps_r": eps, "vwc": m.vwc,
                               "guard": "clamped" if m.clamped else "ok"}
    return out


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


@dataclass
class RunArtifacts:
    """What a run produced, for the CLI to report."""

    report: dict
    output_dir: Path
    converged: bool = True


def run_bo_inversion(cfg: InversionConfig, mapper=None) -> RunArtifacts:
    """Deterministic point estimate: minimize the percent waveform misfit."""
    template, space = load_scene(cfg.scene_path)
    if space.dim == 0:
        raise ConfigError("scene declares no parameters to invert")
    data = read_ascan_csv(cfg.data_path)
    forward = TraceForward(template, space, cfg.pulse, data,
                           cfg.points_per_wavelength, cfg.courant)

    def misfit(values) -> float:
        try:
            sim = forward(values)
        except InstabilityError:
            return math.inf
        return relative_error(data, sim, cfg.comparison)

    t_start = time.perf_counter()
    result = minimize(misfit, space, budget=cfg.bo_budget, n_init=cfg.bo_n_init,
                      seed=cfg.seed, mapper=mapper)
    wall = time.perf_counter() - t_start
    forward.check_stability()

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    best = dict(zip(space.names, result.best_theta.values))
    moisture = _moisture_fields(space, template, best.__getitem__)

    with open(out / "history.csv", "w", newline="") as fh:
        fh.write("evaluation," + ",".join(space.names) + ",misfit_percent\n")
        for i, (theta, value) in enumerate(result.history):
            row = ",".join(f"{v:.17g}" for v in theta.values)
            fh.write(f"{i},{row},{value:.17g}\n")

    with open(out / "results.csv", "w", newline="") as fh:
        fh.write("name,best,low,high,unit,vwc,topp_guard\n")
        for entry in space.entries:
            m = moisture.get(entry.name)
            vwc = "" if m is None or m["vwc"] is None else f"{m['vwc']:.10g}"
            guard = "" if m is None else m["guard"]
            fh.write(
                f"{entry.name},{best[entry.name]:.10g},{entry.low:.10g},"
                f"{entry.high:.10g},{entry.unit},{vwc},{guard}\n"
            )

    best_curve = np.minimum.accumulate([v for _, v in result.history])
    line_chart(out / "bo_progress.svg",
               [(np.arange(len(best_curve)), best_curve, "best so far")],
               title="Misfit progress", xlabel="evaluation", ylabel="relative error (%)")

    report = {
        "mode": "bo",
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.echo,
        "best": best,
        "best_misfit_percent": result.best_value,
        "evaluations_used": result.evaluations_used,
        "forward_failures": forward.n_failures,
        "moisture": moisture,
        "wall_time_s": wall,
    }
    _write_json(out / "report.json", report)
    return RunArtifacts(report=report, output_dir=out)


def run_mcmc_inversion(cfg: InversionConfig, mapper=None) -> RunArtifacts:
    """Full posterior: ensemble sampling, diagnostics, summaries and plots.

    By default the sampler's prior box is first localized around a
    surrogate-optimization point estimate (see LOCALIZE_MARGINS); disable
    with mcmc.localize = false when the configured bounds already encode
    tight prior knowledge.
    """
    template, full_space = load_scene(cfg.scene_path)
    if full_space.dim == 0:
        raise ConfigError("scene declares no parameters to invert")
    data = read_ascan_csv(cfg.data_path)
    noise = _noise_model(cfg, data)
    forward = TraceForward(template, full_space, cfg.pulse, data,
                           cfg.points_per_wavelength, cfg.courant)

    t_start = time.perf_counter()
    localization = None
    space = full_space
    if cfg.mcmc_localize:
        # The localization stage compares amplitude envelopes: raw-trace
        # misfits are glassy in the phase mismatch and defeat the surrogate,
        # while envelope misfits vary smoothly as reflections slide.
        stage1_cfg = ComparisonConfig(domain="envelope",
                                      window=cfg.comparison.window,
                                      alignment=cfg.comparison.alignment)

        def misfit(values) -> float:
            try:
                sim = forward(values)
            except InstabilityError:
                return math.inf
            return relative_error(data, sim, stage1_cfg)

        stage1 = minimize(misfit, full_space, budget=cfg.bo_budget,
                          n_init=cfg.bo_n_init, seed=cfg.seed, mapper=mapper)
        space = localized_space(full_space, template, stage1.best_theta.as_array())
        localization = {
            "estimate": dict(zip(full_space.names, stage1.best_theta.values)),
            "misfit_percent": stage1.best_value,
            "evaluations": stage1.evaluations_used,
            "bounds": {e.name: [e.low, e.high] for e in space.entries},
        }

    def log_post(values) -> float:
        return log_posterior(values, data, forward, space, noise, cfg.comparison)

    chain = sample(log_post, space, n_walkers=cfg.mcmc_walkers,
                   n_steps=cfg.mcmc_steps, seed=cfg.seed, mapper=mapper)
    wall = time.perf_counter() - t_start
    forward.check_stability()

    diag = chain_diagnostics(chain, cfg.burn_in_fraction)
    summary = summarize(chain, cfg.burn_in_fraction)
    converged = all(
        np.isfinite(v) and v < R_HAT_THRESHOLD for v in diag.r_hat.values()
    )

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    chain_to_csv(chain, out / "chain.csv")
    _write_artifacts(out, cfg, chain, diag, summary)

    map_values = dict(zip(space.names, summary.joint_map.values))
    moisture = _moisture_fields(space, template, lambda n: summary.params[n].map_value)
    try:
        sim_at_map = forward(summary.joint_map.as_array())
        misfit_at_map = relative_error(data, sim_at_map, cfg.comparison)
    except (InstabilityError, ValueError):
        misfit_at_map = None

    with open(out / "results.csv", "w", newline="") as fh:
        fh.write("name,mean,sd,map,ci_low,ci_high,r_hat,ess,vwc_of_map,topp_guard\n")
        for name in space.names:
            p = summary.params[name]
            m = moisture.get(name)
            vwc = "" if m is None or m["vwc"] is None else f"{m['vwc']:.10g}"
            guard = "" if m is None else m["guard"]
            fh.write(
                f"{name},{p.mean:.10g},{p.sd:.10g},{p.map_value:.10g},"
                f"{p.ci_low:.10g},{p.ci_high:.10g},{diag.r_hat[name]:.10g},"
                f"{diag.effective_sample_size[name]:.10g},{vwc},{guard}\n"
            )

    report = {
        "mode": "mcmc",
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.echo,
        "localization": localization,
        "joint_map": map_values,
        "joint_map_log_posterior": summary.joint_map_log_post,
        "misfit_at_map_percent": misfit_at_map,
        "posterior": summary_to_dict(summary),
        "diagnostics": {
            "r_hat": diag.r_hat,
            "effective_sample_size": diag.effective_sample_size,
            "mean_acceptance": diag.mean_acceptance,
            "converged": converged,
            "status": "CONVERGED" if converged else "NOT-CONVERGED",
        },
        "noise_sigma": noise.sigma_noise,
        "forward_failures": forward.n_failures,
        "moisture": moisture,
        "wall_time_s": wall,
    }
    _write_json(out / "report.json", report)
    if not converged:
        log.warning("MCMC did not converge (max R-hat %.3f); results flagged NOT-CONVERGED",
                    max(v for v in diag.r_hat.values() if np.isfinite(v)))
    return RunArtifacts(report=report, output_dir=out, converged=converged)


def _write_artifacts(out: Path, cfg: InversionConfig, chain: Chain,
                     diag: Diagnostics, summary: PosteriorSummary) -> None:
    """Trace/marginal/pairwise exports: CSV data plus basic SVG renderings."""
    _write_json(out / "diagnostics.json", {
        "r_hat": diag.r_hat,
        "effective_sample_size": diag.effective_sample_size,
        "mean_acceptance": diag.mean_acceptance,
    })
    _write_json(out / "summary.json", summary_to_dict(summary))

    steps = np.arange(chain.n_steps)
    for p, name in enumerate(chain.names):
        series = [(steps, chain.samples[:, w, p]) for w in range(chain.n_walkers)]
        line_chart(out / f"trace_{name}.svg", series, legend=False,
                   title=f"Walker traces: {name}", xlabel="step", ylabel=name)
        ps = summary.params[name]
        histogram_chart(out / f"marginal_{name}.svg", ps.hist_edges, ps.hist_counts,
                        title=f"Marginal posterior: {name}", xlabel=name,
                        marker=ps.map_value)
        with open(out / f"marginal_{name}.csv", "w", newline="") as fh:
            fh.write("bin_low,bin_high,count\n")
            for i, c in enumerate(ps.hist_counts):
                fh.write(f"{ps.hist_edges[i]:.17g},{ps.hist_edges[i + 1]:.17g},{int(c)}\n")

    for (ni, nj), (xe, ye, counts) in summary.pair_hists.items():
        with open(out / f"pair_{ni}__{nj}.csv", "w", newline="") as fh:
            fh.write(f"# 2-D histogram of ({ni}, {nj}); first row/column are bin edges\n")
            fh.write("," + ",".join(f"{v:.10g}" for v in ye) + "\n")
            for i in range(counts.shape[0]):
                fh.write(f"{xe[i]:.10g}," + ",".join(str(int(c)) for c in counts[i]) + "\n")
