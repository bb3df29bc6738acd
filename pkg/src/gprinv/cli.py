"""Command-line interface.

Commands: simulate, calibrate, invert, envelope, topp, traveltime, diagnose.
Exit codes: 0 success, 2 configuration or input error, 3 numerical failure,
4 run completed but MCMC diagnostics failed the convergence threshold.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ascan import envelope, match_grid, read_ascan_csv, write_ascan_csv
from .bayesopt import calibrate_pulse
from .errors import ConfigError, InstabilityError
from .fdtd import (
    SourcePulse,
    backend_name,
    load_pulse,
    pulse_to_dict,
    save_pulse,
    simulate_stack,
)
from .inversion import (
    R_HAT_THRESHOLD,
    load_inversion_config,
    run_bo_inversion,
    run_mcmc_inversion,
)
from .mcmc import chain_from_csv, diagnostics as chain_diagnostics
from .parallel import WorkerPool
from .petro import topp_permittivity, topp_vwc, traveltime_permittivity
from .scene import build_scene, load_scene, ParameterEntry, ParameterSpace
from .svgplot import line_chart

log = logging.getLogger("gprinv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gprinv",
        description="Estimate sub-surface layer properties from GPR A-scans "
                    "by waveform inversion.",
    )
    parser.add_argument("--version", action="version", version=f"gprinv {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (mandatory for stochastic commands)")
    common.add_argument("--workers", type=int, default=None,
                        help="worker threads for forward evaluations (default: all cores)")
    common.add_argument("--output-dir", default=None, help="directory for run artifacts")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="run the forward model on a scene file")
    p.add_argument("scene", help="scene JSON file")
    p.add_argument("--out", required=True, help="output A-scan CSV path")
    p.add_argument("--pulse-file", help="pulse JSON file")
    p.add_argument("--family", default="gaussian", help="pulse family (default gaussian)")
    p.add_argument("--fc", type=float, default=1.579e9,
                   help="pulse center frequency in Hz (default 1.579e9)")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--delay", type=float, default=None, help="pulse delay in s (default 1/fc)")
    p.add_argument("--ppw", type=int, default=20, help="grid points per smallest wavelength")
    p.add_argument("--courant", type=float, default=0.99)
    p.add_argument("--sweep", help="param=lo:hi:n — one trace per swept value")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", parents=[common],
                       help="fit the pulse family and center frequency to "
                            "reflector measurements")
    p.add_argument("manifest", help="JSON list of {ascan, scene} measurement pairs")
    p.add_argument("--band", nargs=2, type=float, default=[0.5e9, 5.0e9],
                   metavar=("LO_HZ", "HI_HZ"), help="frequency band (default 0.5e9 5e9)")
    p.add_argument("--budget", type=int, default=48, help="objective evaluations per family")
    p.add_argument("--ppw", type=int, default=20)
    p.add_argument("--courant", type=float, default=0.99)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("invert", parents=[common], help="invert a measured A-scan")
    p.add_argument("config", help="inversion config JSON")
    p.add_argument("--mode", choices=["bo", "mcmc"], required=True)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("envelope", parents=[common],
                       help="write the amplitude envelope of an A-scan CSV")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("topp", parents=[common],
                       help="permittivity -> moisture (or --inverse moisture -> permittivity)")
    p.add_argument("value", type=float)
    p.add_argument("--inverse", action="store_true",
                   help="treat the value as volumetric water content")
    p.set_defaults(func=cmd_topp)

    p = sub.add_parser("traveltime", parents=[common],
                       help="permittivity from a round-trip delay and thickness")
    p.add_argument("--dt", type=float, required=True, help="round-trip delay in seconds")
    p.add_argument("--depth", type=float, required=True, help="layer thickness in meters")
    p.set_defaults(func=cmd_traveltime)

    p = sub.add_parser("diagnose", parents=[common],
                       help="convergence diagnostics of an exported chain CSV")
    p.add_argument("chain", help="chain.csv from an MCMC inversion")
    p.add_argument("--burn-in", type=float, default=0.5)
    p.set_defaults(func=cmd_diagnose)

    return parser


def _pulse_from_args(args) -> SourcePulse:
    if args.pulse_file:
        return load_pulse(args.pulse_file)
    try:
        return SourcePulse(args.family, args.fc, args.amplitude, args.delay)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


_SWEEP_RE = re.compile(r"^(?P<path>[\w.\[\]]+)=(?P<lo>[^:]+):(?P<hi>[^:]+):(?P<n>\d+)$")


def cmd_simulate(args) -> int:
    template, _ = load_scene(args.scene)
    pulse = _pulse_from_args(args)
    out = Path(args.out)
    if args.sweep is None:
        trace, _ = simulate_stack(template, pulse, args.ppw, args.courant)
        write_ascan_csv(trace, out)
        print(f"wrote {out} ({len(trace)} samples, dt={trace.dt:.3e} s, "
              f"backend={backend_name()})")
        return 0

    m = _SWEEP_RE.match(args.sweep)
    if not m:
        raise ConfigError(f"cannot parse --sweep {args.sweep!r} (expect param=lo:hi:n)")
    path_str = m.group("path")
    lo, hi, n = float(m.group("lo")), float(m.group("hi")), int(m.group("n"))
    if n < 1 or not lo < hi:
        raise ConfigError("sweep needs lo < hi and n >= 1")
    space = ParameterSpace((ParameterEntry("swept", path_str, lo - 1e-9, hi + 1e-9),))
    safe = re.sub(r"[^\w.]+", "_", path_str)
    for value in np.linspace(lo, hi, n):
        stack = build_scene(template, space, [value])
        trace, _ = simulate_stack(stack, pulse, args.ppw, args.courant)
        target = out.with_name(f"{out.stem}_{safe}_{value:g}{out.suffix or '.csv'}")
        write_ascan_csv(trace, target)
        print(f"wrote {target}")
    return 0


_MANIFEST_KEYS = {"ascan", "scene"}


def cmd_calibrate(args) -> int:
    if args.seed is None:
        raise ConfigError("calibrate needs an explicit --seed")
    manifest_path = Path(args.manifest)
    try:
        entries = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if not isinstance(entries, list) or not entries:
        raise ConfigError("manifest must be a non-empty JSON list")
    lo, hi = args.band
    if not lo < hi:
        raise ConfigError(f"invalid band [{lo:g}, {hi:g}]")

    measurements = []
    for i, entry in enumerate(entries):
        unknown = set(entry) - _MANIFEST_KEYS
        if unknown:
            raise ConfigError(f"manifest[{i}]: unknown keys {sorted(unknown)}")
        if "ascan" not in entry or "scene" not in entry:
            raise ConfigError(f"manifest[{i}]: needs 'ascan' and 'scene'")
        trace = read_ascan_csv(manifest_path.parent / entry["ascan"])
        stack, _ = load_scene(manifest_path.parent / entry["scene"])
        measurements.append((trace, stack))

    out = Path(args.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    with WorkerPool(args.workers) as pool:
        result = calibrate_pulse(
            measurements, (lo, hi), budget=args.budget, seed=args.seed,
            points_per_wavelength=args.ppw, courant=args.courant, mapper=pool.map,
        )
    wall = time.perf_counter() - t_start

    pulse = SourcePulse(result.family, result.f_c)
    save_pulse(pulse, out / "pulse.json")
    _write_calibration_overlays(out, measurements, result, args)

    report = {
        "version": __version__,
        "seed": args.seed,
        "band_hz": [lo, hi],
        "budget_per_family": args.budget,
        "pulse": pulse_to_dict(pulse),
        "families": {
            fam: {
                "best_f_c_hz": float(r.best_theta.values[0]),
                "best_misfit_percent": r.best_value,
                "evaluations": r.evaluations_used,
            }
            for fam, r in result.results.items()
        },
        "wall_time_s": wall,
    }
    (out / "calibration_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"calibrated pulse: family={result.family} f_c={result.f_c:.4g} Hz "
          f"-> {out / 'pulse.json'}")
    return 0


def _write_calibration_overlays(out: Path, measurements, result, args) -> None:
    """Measured vs simulated envelope overlays, before and after calibration."""
    first_theta = result.results[result.family].history[0][0]
    before = SourcePulse(result.family, float(first_theta.values[0]))
    after = SourcePulse(result.family, result.f_c)
    for i, (trace, stack) in enumerate(measurements):
        span = trace.dt * (len(trace) - 1)
        rows = [("measured", trace)]
        for tag, pulse in (("before", before), ("after", after)):
            sim, _ = simulate_stack(stack, pulse, args.ppw, args.courant,
                                    t_max=span + 2.0 * pulse.delay)
            sim = match_grid(sim, trace)
            env_meas = envelope(trace).samples
            env_sim = envelope(sim).samples
            if env_sim.max() > 0:
                sim = sim.with_samples(sim.samples * (env_meas.max() / env_sim.max()))
            rows.append((tag, sim))
        series = []
        with open(out / f"overlay_{i}.csv", "w", newline="") as fh:
            fh.write("time_s," + ",".join(f"envelope_{tag}" for tag, _ in rows) + "\n")
            envs = [envelope(tr).samples for _, tr in rows]
            for k, t in enumerate(trace.times):
                fh.write(f"{t:.17g}," + ",".join(f"{e[k]:.10g}" for e in envs) + "\n")
            for (tag, tr), env in zip(rows, envs):
                series.append((trace.times, env, tag))
        line_chart(out / f"overlay_{i}.svg", series,
                   title=f"Calibration overlay (measurement {i})",
                   xlabel="time (s)", ylabel="envelope amplitude")


def cmd_invert(args) -> int:
    cfg = load_inversion_config(args.config, seed=args.seed, output_dir=args.output_dir)
    with WorkerPool(args.workers) as pool:
        if args.mode == "bo":
            artifacts = run_bo_inversion(cfg, mapper=pool.map)
        else:
            artifacts = run_mcmc_inversion(cfg, mapper=pool.map)
    if args.mode == "bo":
        best = artifacts.report["best"]
        print(f"best fit ({artifacts.report['best_misfit_percent']:.3f}% misfit): "
              + ", ".join(f"{k}={v:.4g}" for k, v in best.items()))
        print(f"artifacts in {artifacts.output_dir}")
        return 0
    diag = artifacts.report["diagnostics"]
    print("posterior MAP: " + ", ".join(
        f"{k}={v:.4g}" for k, v in artifacts.report["joint_map"].items()))
    print(f"max R-hat {max(diag['r_hat'].values()):.4f} "
          f"(threshold {R_HAT_THRESHOLD}), status {diag['status']}")
    print(f"artifacts in {artifacts.output_dir}")
    if not artifacts.converged:
        print("WARNING: chains not converged; results written and flagged "
              "NOT-CONVERGED", file=sys.stderr)
        return 4
    return 0


def cmd_envelope(args) -> int:
    trace = read_ascan_csv(args.input)
    write_ascan_csv(envelope(trace), args.output)
    print(f"wrote {args.output}")
    return 0


def cmd_topp(args) -> int:
    if args.inverse:
        eps = topp_permittivity(args.value)
        print(f"eps_r = {eps:.6f}")
    else:
        m = topp_vwc(args.value)
        flag = " (clamped: outside model range)" if m.clamped else ""
        print(f"vwc = {m.vwc:.6f} m^3/m^3{flag}")
    return 0


def cmd_traveltime(args) -> int:
    eps = traveltime_permittivity(args.dt, args.depth)
    print(f"eps_r = {eps:.6f}")
    return 0


def cmd_diagnose(args) -> int:
    chain = chain_from_csv(args.chain)
    diag = chain_diagnostics(chain, args.burn_in)
    print(f"{'parameter':<20}{'R-hat':>10}{'ESS':>12}")
    for name in chain.names:
        print(f"{name:<20}{diag.r_hat[name]:>10.4f}{diag.effective_sample_size[name]:>12.1f}")
    worst = max(v for v in diag.r_hat.values() if np.isfinite(v))
    print(f"max R-hat {worst:.4f}; threshold {R_HAT_THRESHOLD}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InstabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
