"""Benchmark the compiled FDTD kernel against the pure-Python fallback.

Runs representative forward simulations with both backends and reports
per-simulation wall time and the speedup. The two kernels are
operation-identical, so the traces are also checked for bit equality.

Usage: python benchmarks/bench_fdtd.py [--repeats N]
"""

import argparse
import time

import numpy as np

from gprinv.fdtd import SourcePulse, discretize, simulate
from gprinv.fdtd import _kernel_py
from gprinv.scene import HalfSpace, Layer, LayerStack

try:
    from gprinv.fdtd import _kernel as _kernel_c
except ImportError:
    _kernel_c = None

CASES = [
    ("calibration plate (air/PEC 0.24 m)", LayerStack(0.24, (), "pec"), 20),
    ("soil over reflector", LayerStack(0.10, (Layer(0.15, 5.47, 0.01, "soil"),), "pec"), 20),
    ("organic + soil over reflector", LayerStack(
        0.10, (Layer(0.10, 3.0, 0.005, "organic"), Layer(0.15, 5.47, 0.01, "soil")), "pec"), 20),
    ("lossy half-space", LayerStack(0.20, (Layer(0.08, 4.0, 0.01, "top"),), HalfSpace(9.0, 0.01)), 20),
    ("inversion profile (10 ppw)", LayerStack(
        0.10, (Layer(0.10, 3.0, 0.005, "organic"), Layer(0.15, 5.47, 0.01, "soil")), "pec"), 10),
]


def run_case(stack, pulse, ppw, kernel, repeats):
    import gprinv.fdtd.model as model

    grid = discretize(stack, pulse, points_per_wavelength=ppw)
    original = model.run_leapfrog
    model.run_leapfrog = kernel
    try:
        trace = simulate(stack, pulse, grid)  # warm-up + result
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            simulate(stack, pulse, grid)
            best = min(best, time.perf_counter() - t0)
    finally:
        model.run_leapfrog = original
    return best, trace, grid


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    pulse = SourcePulse("gaussian", 1.579e9)
    if _kernel_c is None:
        print("compiled kernel not built — showing the pure-Python kernel only\n")

    header = f"{'case':<38}{'cells':>7}{'steps':>7}{'python':>12}{'compiled':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, stack, ppw in CASES:
        t_py, trace_py, grid = run_case(stack, pulse, ppw, _kernel_py.run_leapfrog, args.repeats)
        row = f"{name:<38}{grid.n_cells:>7}{grid.n_steps:>7}{t_py * 1e3:>10.2f} ms"
        if _kernel_c is not None:
            t_c, trace_c, _ = run_case(stack, pulse, ppw, _kernel_c.run_leapfrog, args.repeats)
            identical = np.array_equal(trace_py.samples, trace_c.samples)
            row += f"{t_c * 1e3:>10.3f} ms{t_py / t_c:>8.1f}x"
            if not identical:
                row += "  [WARNING: traces differ]"
        print(row)


if __name__ == "__main__":
    main()
