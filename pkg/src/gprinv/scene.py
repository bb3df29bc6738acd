"""Layered-earth scene description and the parameter-vector mapping.

A scene is an antenna stand-off (air gap) over a stack of homogeneous,
non-magnetic, non-dispersive lossy dielectric layers, terminated either by
a perfect electric conductor (a metal reflector plate) or by a half-space.
Inversion unknowns are declared as bounded paths into a template stack;
``build_scene`` overwrites the targeted fields with a parameter vector.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

import numpy as np

from .constants import C_LIGHT
from .errors import ConfigError

PEC = "pec"

# Default prior bounds when a config omits them, keyed by targeted field.
DEFAULT_BOUNDS = {
    "eps_r": (1.0, 30.0),
    "sigma": (0.0, 0.05),
    "thickness": (0.01, 0.25),
    "air_gap": (0.01, 0.25),
}


@dataclass(frozen=True)
class Layer:
    """Homogeneous lossy dielectric layer.

    thickness in meters, eps_r relative permittivity, sigma conductivity in
    S/m; mu_r is fixed at 1 (non-magnetic materials only).
    """

    thickness: float
    eps_r: float
    sigma: float = 0.0
    name: str = ""
    mu_r: float = 1.0


@dataclass(frozen=True)
class HalfSpace:
    """Semi-infinite medium terminating a stack from below."""

    eps_r: float
    sigma: float = 0.0


@dataclass(frozen=True)
class LayerStack:
    """Ordered layers (top to bottom) under an antenna air gap."""

    air_gap: float
    layers: tuple[Layer, ...]
    termination: str | HalfSpace = PEC

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def is_pec(self) -> bool:
        return self.termination == PEC

    def layer_named(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(f"no layer named {name!r}")


def validate_stack(stack: LayerStack) -> list[str]:
    """Return every invariant violation; an empty list means the stack is valid."""
    problems = []
    if stack.air_gap < 0:
        problems.append(f"air_gap must be >= 0, got {stack.air_gap}")
    # Zero layers is legal: a bare reflector under an air gap is the
    # calibration geometry.
    for i, layer in enumerate(stack.layers):
        tag = layer.name or f"layers[{i}]"
        if not layer.thickness > 0:
            problems.append(f"{tag}: thickness must be > 0, got {layer.thickness}")
        if not layer.eps_r >= 1:
            problems.append(f"{tag}: eps_r must be >= 1, got {layer.eps_r}")
        if not layer.sigma >= 0:
            problems.append(f"{tag}: sigma must be >= 0, got {layer.sigma}")
        if layer.mu_r != 1.0:
            problems.append(f"{tag}: mu_r is fixed at 1, got {layer.mu_r}")
    if isinstance(stack.termination, HalfSpace):
        if not stack.termination.eps_r >= 1:
            problems.append(f"half-space eps_r must be >= 1, got {stack.termination.eps_r}")
        if not stack.termination.sigma >= 0:
            problems.append(f"half-space sigma must be >= 0, got {stack.termination.sigma}")
    elif stack.termination != PEC:
        problems.append(f"termination must be 'pec' or a HalfSpace, got {stack.termination!r}")
    return problems


def two_way_time(stack: LayerStack) -> float:
    """Round-trip travel time through the air gap and every layer.

    For a perfect-conductor termination this is the time to the reflector;
    for a half-space it is the time to the last interface.
    """
    t = 2.0 * stack.air_gap / C_LIGHT
    for layer in stack.layers:
        t += 2.0 * layer.thickness * np.sqrt(layer.eps_r) / C_LIGHT
    return t


_PATH_RE = re.compile(r"^(?:(?P<name>\w+)|layers\[(?P<index>\d+)\])\.(?P<field>\w+)$")
_FIELDS = ("thickness", "eps_r", "sigma")


@dataclass(frozen=True)
class ParameterEntry:
    """One bounded unknown: a name and a path into a LayerStack template."""

    name: str
    path: str
    low: float
    high: float
    unit: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.low) and np.isfinite(self.high)):
            raise ValueError(f"{self.name}: bounds must be finite")
        if not self.low < self.high:
            raise ValueError(f"{self.name}: need low < high, got [{self.low}, {self.high}]")


@dataclass(frozen=True)
class ParameterSpace:
    """Ordered, named, bounded unknowns mapped onto a stack template."""

    entries: tuple[ParameterEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")

    def __len__(self):
        return len(self.entries)

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def lows(self) -> np.ndarray:
        return np.array([e.low for e in self.entries])

    @property
    def highs(self) -> np.ndarray:
        return np.array([e.high for e in self.entries])

    def in_bounds(self, values) -> bool:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} values, got shape {v.shape}")
        return bool(np.all(v >= self.lows) & np.all(v <= self.highs))


@dataclass(frozen=True)
class ParameterVector:
    """Ordered parameter values matching a ParameterSpace."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self):
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


def parameter_values(theta) -> np.ndarray:
    """Coerce a ParameterVector or array-like into a float array."""
    if isinstance(theta, ParameterVector):
        return theta.as_array()
    return np.asarray(theta, dtype=float)


def _resolve_path(stack: LayerStack, path: str) -> tuple[int | None, str]:
    """Parse a parameter path against a stack; returns (layer index or None, field).

    Accepted forms: ``air_gap``, ``<layer_name>.<field>`` and
    ``layers[<i>].<field>`` with field in {thickness, eps_r, sigma}.
    """
    if path == "air_gap":
        return None, "air_gap"
    m = _PATH_RE.match(path)
    if not m:
        raise ConfigError(f"cannot parse parameter path {path!r}")
    fieldname = m.group("field")
    if fieldname not in _FIELDS:
        raise ConfigError(f"path {path!r}: field must be one of {_FIELDS}")
    if m.group("index") is not None:
        idx = int(m.group("index"))
        if idx >= len(stack.layers):
            raise ConfigError(f"path {path!r}: layer index out of range")
    else:
        try:
            idx = stack.layer_named(m.group("name"))
        except KeyError as exc:
            raise ConfigError(f"path {path!r}: {exc.args[0]}") from exc
    return idx, fieldname


def build_scene(template: LayerStack, space: ParameterSpace, theta) -> LayerStack:
    """Copy the template with each targeted field overwritten by theta.

    Raises on out-of-bounds values (identifying the offending entry) and on
    paths that do not resolve in the template.
    """
    values = parameter_values(theta)
    if values.shape != (space.dim,):
        raise ValueError(f"theta has shape {values.shape}, expected ({space.dim},)")
    for entry, value in zip(space.entries, values):
        if not entry.low <= value <= entry.high:
            raise ValueError(
                f"parameter {entry.name!r} = {value:g} outside bounds "
                f"[{entry.low:g}, {entry.high:g}]"
            )
    layers = list(template.layers)
    air_gap = template.air_gap
    for entry, value in zip(space.entries, values):
        idx, fieldname = _resolve_path(template, entry.path)
        if idx is None:
            air_gap = float(value)
        else:
            layers[idx] = replace(layers[idx], **{fieldname: float(value)})
    return LayerStack(air_gap, tuple(layers), template.termination)


def read_back(stack: LayerStack, space: ParameterSpace) -> np.ndarray:
    """Read the targeted fields of a stack back into parameter order."""
    out = np.empty(space.dim)
    for k, entry in enumerate(space.entries):
        idx, fieldname = _resolve_path(stack, entry.path)
        out[k] = stack.air_gap if idx is None else getattr(stack.layers[idx], fieldname)
    return out


# ---------------------------------------------------------------------------
# Scene/config JSON format
# ---------------------------------------------------------------------------

_SCENE_KEYS = {"air_gap_m", "layers", "termination", "parameters"}
_LAYER_KEYS = {"name", "thickness_m", "eps_r", "sigma_s_per_m"}
_HS_KEYS = {"eps_r", "sigma_s_per_m"}
_PARAM_KEYS = {"name", "path", "low", "high", "unit"}


def _reject_unknown(mapping: dict, allowed: set, context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")


def scene_from_dict(doc: dict) -> tuple[LayerStack, ParameterSpace]:
    """Parse the scene JSON document into a stack template and parameter space."""
    if not isinstance(doc, dict):
        raise ConfigError("scene document must be a JSON object")
    _reject_unknown(doc, _SCENE_KEYS, "scene")
    if "air_gap_m" not in doc or "layers" not in doc:
        raise ConfigError("scene: 'air_gap_m' and 'layers' are required")
    layers = []
    for i, entry in enumerate(doc["layers"]):
        _reject_unknown(entry, _LAYER_KEYS, f"scene layers[{i}]")
        try:
            layers.append(
                Layer(
                    thickness=float(entry["thickness_m"]),
                    eps_r=float(entry["eps_r"]),
                    sigma=float(entry.get("sigma_s_per_m", 0.0)),
                    name=str(entry.get("name", "")),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"scene layers[{i}]: missing key {exc.args[0]}") from exc
    term_doc = doc.get("termination", "pec")
    if term_doc == "pec":
        termination: str | HalfSpace = PEC
    elif isinstance(term_doc, dict) and set(term_doc) == {"half_space"}:
        hs = term_doc["half_space"]
        _reject_unknown(hs, _HS_KEYS, "scene termination.half_space")
        termination = HalfSpace(float(hs["eps_r"]), float(hs.get("sigma_s_per_m", 0.0)))
    else:
        raise ConfigError(
            "scene termination must be \"pec\" or {\"half_space\": {...}}"
        )
    stack = LayerStack(float(doc["air_gap_m"]), tuple(layers), termination)
    problems = validate_stack(stack)
    if problems:
        raise ConfigError("invalid scene: " + "; ".join(problems))

    entries = []
    for i, p in enumerate(doc.get("parameters", [])):
        _reject_unknown(p, _PARAM_KEYS, f"scene parameters[{i}]")
        try:
            name, path = str(p["name"]), str(p["path"])
        except KeyError as exc:
            raise ConfigError(f"scene parameters[{i}]: missing key {exc.args[0]}") from exc
        _, fieldname = _resolve_path(stack, path)  # errors if unresolvable
        default_low, default_high = DEFAULT_BOUNDS[fieldname if fieldname in DEFAULT_BOUNDS else "eps_r"]
        entries.append(
            ParameterEntry(
                name=name,
                path=path,
                low=float(p.get("low", default_low)),
                high=float(p.get("high", default_high)),
                unit=str(p.get("unit", "")),
            )
        )
    return stack, ParameterSpace(tuple(entries))


def load_scene(path) -> tuple[LayerStack, ParameterSpace]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scene file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return scene_from_dict(doc)


def scene_to_dict(stack: LayerStack, space: ParameterSpace | None = None) -> dict:
    doc = {
        "air_gap_m": stack.air_gap,
        "layers": [
            {
                "name": layer.name,
                "thickness_m": layer.thickness,
                "eps_r": layer.eps_r,
                "sigma_s_per_m": layer.sigma,
            }
            for layer in stack.layers
        ],
        "termination": "pec"
        if stack.is_pec
        else {"half_space": {"eps_r": stack.termination.eps_r, "sigma_s_per_m": stack.termination.sigma}},
    }
    if space is not None and space.dim:
        doc["parameters"] = [
            {"name": e.name, "path": e.path, "low": e.low, "high": e.high, "unit": e.unit}
            for e in space.entries
        ]
    return doc
