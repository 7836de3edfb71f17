"""Configuration schema: the single home of every solver and force default.

Thresholds that depend on the module are stored as factors of the module
area (``"area"``) or module size (``"size"``) and resolved per shape.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any


@dataclass(frozen=True)
class Setting:
    kind: type
    default: Any
    help: str
    scale: str | None = None  # "area" or "size": default is a factor of it
    section: str = "solver"   # "solver" (SolverConfig) or "gains" (ForceGains)
    nullable: bool = False


SCHEMA: dict[str, Setting] = {
    "dt": Setting(float, 0.01, "time quantum of one integration step"),
    "tau_o": Setting(float, 0.02, "total overlap threshold", scale="area"),
    "tau_m": Setting(float, 0.05, "total misplacement threshold", scale="size"),
    "tau_s": Setting(float, 1e-4, "per-step displacement threshold for stability", scale="size"),
    "tau_E": Setting(int, 5, "stable placements gathered per phase"),
    "alpha_O": Setting(float, 1.0, "energy weight of total overlap"),
    "alpha_M": Setting(float, 1.0, "energy weight of total misplacement"),
    "max_iterations": Setting(int, 20000, "step cap per phase"),
    "seed": Setting(int, 0, "base random seed"),
    "starts": Setting(int, 1, "number of multi-start runs (seeds seed..seed+starts-1)"),
    "subdivide_edges": Setting(bool, True, "split boundary edges longer than the module diameter"),
    "max_step_fraction": Setting(float, 0.5, "per-step translation limit, fraction of the inradius"),
    "temperature_epsilon": Setting(float, 1e-9, "added to the annealing temperature"),
    "energy_tolerance": Setting(float, 1e-12, "energy change treated as none", scale="area"),
    "connect_range": Setting(float, 1.25, "mutual neighbours within this many contact distances "
                                          "count as connected for misplacement"),
    "chi_d": Setting(float, 1.0, "gain of module distance forces", section="gains"),
    "chi_tau": Setting(float, 1.0, "gain of module moments", section="gains"),
    "chi_T": Setting(float, 1.0, "gain of connector offset forces", section="gains"),
    "chi_Pd": Setting(float, 1.0, "gain of boundary distance forces", section="gains"),
    "chi_Ptau": Setting(float, 1.0, "gain of boundary moments", section="gains"),
    "n": Setting(int, 2, "exponent of distance weights", section="gains"),
    "weight_epsilon": Setting(float, 1e-12, "added to moment and offset weights", section="gains"),
    "edge_range": Setting(float, 1.0, "boundary distance terms act within this many contact distances",
                          section="gains"),
    "edge_fade": Setting(float, 0.1, "width of the boundary distance fade-out", section="gains"),
    "edge_moment_range": Setting(float, 1.5, "boundary moments vanish beyond this many contact distances",
                                 section="gains"),
    "edge_moment_gate": Setting(float, math.pi / 36, "misalignment up to which boundary moments act in full",
                                section="gains"),
    "edge_moment_cutoff": Setting(float, math.pi / 12, "misalignment from which boundary moments vanish",
                                  section="gains"),
    "module_range": Setting(float, None, "module distance forces act within this many contact distances "
                                         "(null: unlimited)", section="gains", nullable=True),
}


def default(name: str):
    """Unscaled default of one setting."""
    return SCHEMA[name].default


class ConfigError(ValueError):
    pass


def _coerce(name: str, value):
    spec = SCHEMA[name]
    if value is None:
        if spec.nullable:
            return None
        raise ConfigError(f"{name}: null is not allowed")
    if spec.kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true or false, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if spec.kind is int:
        if float(value) != int(value):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name}: must be finite")
    return value


def resolve(shape, overrides: dict | None = None):
    """SolverConfig for ``shape`` from the schema defaults plus ``overrides``
    (absolute values; unknown keys are rejected)."""
    from .forces import ForceGains
    from .solver import SolverConfig

    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown setting(s): {', '.join(unknown)}")
    solver, gains = {}, {}
    for name, spec in SCHEMA.items():
        if name in overrides:
            value = _coerce(name, overrides[name])
        else:
            value = spec.default
            if spec.scale == "area":
                value = value * shape.area
            elif spec.scale == "size":
                value = value * shape.size
        (gains if spec.section == "gains" else solver)[name] = value
    try:
        return SolverConfig(gains=ForceGains(**gains), **solver)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load(text: str, shape):
    """Parse a JSON config document into a SolverConfig."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return resolve(shape, data)


def describe(shape=None) -> dict:
    """Every setting with its default, resolved for ``shape`` when given."""
    out = {}
    for name, spec in SCHEMA.items():
        value = spec.default
        if shape is not None and spec.scale and value is not None:
            value = value * (shape.area if spec.scale == "area" else shape.size)
            out[name] = value
        elif spec.scale:
            out[name] = f"{value} * module {spec.scale}"
        else:
            out[name] = value
    return out


def as_dict(config) -> dict:
    """Flat mapping of a SolverConfig, loadable back through :func:`resolve`."""
    from dataclasses import asdict

    d = asdict(config)
    d.update(d.pop("gains"))
    return {k: d[k] for k in SCHEMA}


__all__ = ["SCHEMA", "Setting", "ConfigError", "resolve", "load", "describe", "as_dict", "default"]
