"""A-scan traces and the preprocessing that makes two of them comparable.

An A-scan is a uniformly sampled received-field time series. Measured and
simulated traces arrive with different time steps and time zeros, so this
module provides amplitude envelopes, resampling, peak-based time alignment
and windowing; the misfit machinery downstream assumes both traces have
been pushed through these operations first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import hilbert


@dataclass(frozen=True)
class AScan:
    """Uniformly sampled trace: amplitude versus two-way travel time.

    Parameters
    ----------
    dt : float
        Sample interval in seconds, > 0.
    t0 : float
        Time of the first sample in seconds.
    samples : array_like
        At least two finite amplitudes (arbitrary consistent units).
    label : str
        Free-form provenance string.
    """

    dt: float
    t0: float
    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("samples must be a 1-D sequence of length >= 2")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite (no NaN/inf)")

    def __len__(self):
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.samples.size - 1)

    def with_samples(self, samples, label: str | None = None) -> "AScan":
        return AScan(self.dt, self.t0, samples, self.label if label is None else label)


class Alignment(NamedTuple):
    """Result of :func:`align`: integer sample shift plus an ambiguity flag."""

    shift: int
    ambiguous: bool


def envelope(a: AScan) -> AScan:
    """Amplitude envelope: magnitude of the discrete analytic signal.

    The analytic signal is built in the frequency domain (negative
    frequencies zeroed, positive doubled) on the raw trace with no
    tapering; edge samples are therefore less reliable and excluded from
    the guarantees made by callers.
    """
    if len(a) < 4:
        raise ValueError("envelope needs at least 4 samples")
    env = np.abs(hilbert(a.samples))
    return a.with_samples(env)


def resample(a: AScan, dt_new: float) -> AScan:
    """Linear interpolation onto the grid ``t0 + k*dt_new`` over the original span."""
    if not dt_new > 0:
        raise ValueError(f"dt_new must be positive, got {dt_new}")
    if not (a.dt / 100.0 <= dt_new <= 100.0 * a.dt):
        raise ValueError(
            f"dt_new={dt_new:g} outside the supported range "
            f"[{a.dt / 100.0:g}, {a.dt * 100.0:g}]"
        )
    span = a.dt * (len(a) - 1)
    n_new = int(np.floor(span / dt_new + 1e-9)) + 1
    t_rel = dt_new * np.arange(n_new)
    out = np.interp(t_rel, a.dt * np.arange(len(a)), a.samples)
    return AScan(dt_new, a.t0, out, a.label)


def _first_dominant_peak(env: np.ndarray) -> tuple[int, bool]:
    """Earliest local maximum >= 90% of the global maximum.

    Returns (index, ambiguous); ambiguous flags two candidate peaks of
    equal height.
    """
    peak = env.max()
    if peak <= 0 or peak == env.min():
        raise ValueError("trace has no envelope peak (flat or all-zero)")
    interior = (env[1:-1] >= env[:-2]) & (env[1:-1] >= env[2:])
    idx = np.flatnonzero(interior) + 1
    # Endpoints count as local maxima when the trace slopes away from them.
    if env[0] >= env[1]:
        idx = np.concatenate(([0], idx))
    if env[-1] >= env[-2]:
        idx = np.concatenate((idx, [env.size - 1]))
    dominant = idx[env[idx] >= 0.9 * peak]
    if dominant.size == 0:
        raise ValueError("trace has no dominant envelope peak")
    first = int(dominant[0])
    others = dominant[dominant != first]
    ambiguous = bool(
        others.size and np.any(np.abs(env[others] - env[first]) <= 1e-9 * peak)
    )
    return first, ambiguous


def align(reference: AScan, other: AScan) -> Alignment:
    """Sample shift of ``other`` relative to ``reference``.

    Both traces must share dt (resample first). The shift is the offset
    between the first dominant envelope peaks, so ``other`` delayed by k
    samples yields ``Alignment(k, ...)``; shifting ``other`` by -shift
    registers the direct arrivals.
    """
    if not np.isclose(reference.dt, other.dt, rtol=1e-9):
        raise ValueError("traces must share dt; resample before aligning")
    p_ref, amb_ref = _first_dominant_peak(envelope(reference).samples)
    p_oth, amb_oth = _first_dominant_peak(envelope(other).samples)
    return Alignment(p_oth - p_ref, amb_ref or amb_oth)


def shift_samples(a: AScan, shift: int) -> AScan:
    """Shift a trace by an integer number of samples, zero-filling the gap."""
    out = np.zeros_like(a.samples)
    if shift >= 0:
        out[shift:] = a.samples[: len(a) - shift]
    else:
        out[:shift] = a.samples[-shift:]
    return a.with_samples(out)


def window(a: AScan, t_start: float, t_end: float) -> AScan:
    """Sub-trace covering [t_start, t_end]; t0 is updated accordingly."""
    eps = 1e-9 * a.dt
    if t_start >= t_end:
        raise ValueError(f"empty or inverted window [{t_start:g}, {t_end:g}]")
    if t_start < a.t0 - eps or t_end > a.t_end + eps:
        raise ValueError(
            f"window [{t_start:g}, {t_end:g}] outside trace span "
            f"[{a.t0:g}, {a.t_end:g}]"
        )
    i0 = int(np.ceil((t_start - a.t0) / a.dt - 1e-9))
    i1 = int(np.floor((t_end - a.t0) / a.dt + 1e-9))
    if i1 <= i0:
        raise ValueError("window too narrow: fewer than 2 samples")
    return AScan(a.dt, a.t0 + i0 * a.dt, a.samples[i0 : i1 + 1], a.label)


def match_grid(a: AScan, like: AScan) -> AScan:
    """Resample a trace onto another trace's time grid (dt and length).

    Samples beyond the source span are zero-filled; time registration
    beyond the shared grid is the alignment step's job.
    """
    r = resample(a, like.dt) if not np.isclose(a.dt, like.dt, rtol=1e-12) else a
    out = np.zeros(len(like))
    m = min(len(r), len(like))
    out[:m] = r.samples[:m]
    return AScan(like.dt, like.t0, out, a.label)


def read_ascan_csv(path) -> AScan:
    """Read the A-scan CSV format: header ``time_s,amplitude``, one sample per row.

    The time column must be uniformly increasing to 1 part in 1e6.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["time_s", "amplitude"]:
        raise ValueError(f"{path}: expected header 'time_s,amplitude'")
    body = [r for r in rows[1:] if r]
    if len(body) < 2:
        raise ValueError(f"{path}: need at least 2 samples")
    try:
        t = np.array([float(r[0]) for r in body])
        amp = np.array([float(r[1]) for r in body])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed row ({exc})") from exc
    steps = np.diff(t)
    dt = steps[0]
    if dt <= 0 or np.any(np.abs(steps - dt) > 1e-6 * abs(dt)):
        raise ValueError(f"{path}: time column is not uniformly increasing")
    return AScan(dt, float(t[0]), amp, label=str(path))


def write_ascan_csv(a: AScan, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("time_s,amplitude\n")
        for t, v in zip(a.times, a.samples):
            fh.write(f"{t:.17g},{v:.17g}\n")
