"""Run configuration: one YAML file consumed by every subcommand.

Sections: geometry, physics, solver, experiment (per-subcommand options,
ignored by other subcommands but validated when present), seed, output_dir.
Unknown keys are rejected.  The ratio kappa^2/sigma is always recomputed,
never stored.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import yaml

from .grids import Domain, Grid2D, PhysicalParams, build_strip_domain


class ConfigError(ValueError):
    pass


_GEOMETRY_KEYS = {"length", "width", "nx", "ny"}
_PHYSICS_KEYS = {"kappa", "sigma", "h", "h_ref", "current"}
_CURRENT_KEYS = {"type", "magnitude", "s", "value"}
_SOLVER_KEYS = {"tol", "dt", "t_final", "gauge", "scaling", "record_every"}
_TOP_KEYS = {"geometry", "physics", "solver", "experiment", "seed", "output_dir"}

_EXPERIMENT_KEYS = {
    "spectrum": {"h_values"},
    "resolvent-scan": {"nu", "gamma_max", "n_gamma"},
    "decay-predict": {"kappa_values"},
    "model-op": {"frak_j", "c", "half_width", "height", "nx", "ny", "variant"},
    "tdgl-run": {"snapshots", "mutation"},
    "verify": {"level", "mu_h_values", "large_domain_R"},
    "normal-state": set(),
}

_DEFAULTS = {
    "geometry": {"length": 1.0, "width": 2.0, "nx": 48, "ny": 96},
    "physics": {"kappa": 4.0, "sigma": 1.0, "h": 1.0, "h_ref": 0.0,
                "current": {"type": "constant", "magnitude": 1.0}},
    "solver": {"tol": 1e-10, "dt": 2e-3, "t_final": 6.0, "gauge": "coulomb",
               "scaling": "coherence", "record_every": 25},
    "experiment": {},
    "seed": 12345,
    "output_dir": "out",
}


@dataclass
class RunConfig:
    geometry: dict
    physics: dict
    solver: dict
    experiment: dict = field(default_factory=dict)
    seed: int = 12345
    output_dir: str = "out"

    # -- derived objects ---------------------------------------------------
    def build(self) -> tuple[Domain, Grid2D, PhysicalParams]:
        g = self.geometry
        dom, grid = build_strip_domain(g["length"], g["width"], g["nx"], g["ny"])
        p = self.physical_params(dom)
        return dom, grid, p

    def physical_params(self, dom: Domain) -> PhysicalParams:
        ph = self.physics
        cur = ph["current"]
        table = None
        mag = float(cur.get("magnitude", 1.0))
        if cur["type"] == "table":
            table = (np.asarray(cur["s"], dtype=float),
                     np.asarray(cur["value"], dtype=float))
        elif cur["type"] == "sine2":
            table = smooth_contact_profile(dom, mag)
        elif cur["type"] != "constant":
            raise ConfigError(f"unknown current type {cur['type']!r}")
        return PhysicalParams(kappa=ph["kappa"], sigma=ph["sigma"], h=ph["h"],
                              h_ref=ph["h_ref"], jr_magnitude=mag,
                              jr_table=table)

    def canonical(self) -> str:
        data = {"geometry": self.geometry, "physics": self.physics,
                "solver": self.solver, "experiment": self.experiment,
                "seed": self.seed, "output_dir": self.output_dir}
        return yaml.safe_dump(data, sort_keys=True)

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def smooth_contact_profile(dom: Domain, magnitude: float, samples: int = 8192
                           ) -> tuple[np.ndarray, np.ndarray]:
    """sin^2 current bump on each contact (inflow at y=0), C^1 at the corners.

    Used for convergence studies: vanishing to second order at corners keeps
    the harmonic extensions regular enough for clean second-order rates.
    """
    P, L, W = dom.perimeter, dom.length, dom.width
    s = np.linspace(0.0, P, samples, endpoint=False)
    v = np.zeros_like(s)
    bot = s < L
    v[bot] = magnitude * np.sin(np.pi * s[bot] / L) ** 2
    top = (s >= L + W) & (s < 2 * L + W)
    x_top = 2 * L + W - s[top]
    v[top] = -magnitude * np.sin(np.pi * x_top / L) ** 2
    return s, v


def _require_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _positive(value, name):
    if not isinstance(value, (int, float)) or value <= 0:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


def validate(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _require_keys(raw, _TOP_KEYS, "config")
    merged = {}
    for key, default in _DEFAULTS.items():
        value = raw.get(key, default)
        if isinstance(default, dict) and isinstance(value, dict):
            filled = dict(default)
            filled.update(value)
            merged[key] = filled
        else:
            merged[key] = value

    geo = merged["geometry"]
    _require_keys(geo, _GEOMETRY_KEYS, "geometry")
    _positive(geo["length"], "geometry.length")
    _positive(geo["width"], "geometry.width")
    for k in ("nx", "ny"):
        if not isinstance(geo[k], int) or geo[k] < 4:
            raise ConfigError(f"geometry.{k} must be an integer >= 4")

    ph = merged["physics"]
    _require_keys(ph, _PHYSICS_KEYS, "physics")
    _positive(ph["kappa"], "physics.kappa")
    _positive(ph["sigma"], "physics.sigma")
    if not isinstance(ph["h"], (int, float)) or ph["h"] < 0:
        raise ConfigError("physics.h must be nonnegative")
    if not isinstance(ph["h_ref"], (int, float)):
        raise ConfigError("physics.h_ref must be a number")
    cur = ph["current"]
    if not isinstance(cur, dict):
        raise ConfigError("physics.current must be a mapping")
    _require_keys(cur, _CURRENT_KEYS, "physics.current")
    if cur.get("type") not in ("constant", "sine2", "table"):
        raise ConfigError("physics.current.type must be constant, sine2 or table")
    if cur["type"] == "table" and not ("s" in cur and "value" in cur):
        raise ConfigError("physics.current table needs 's' and 'value' lists")

    sol = merged["solver"]
    _require_keys(sol, _SOLVER_KEYS, "solver")
    for k in ("tol", "dt", "t_final"):
        _positive(sol[k], f"solver.{k}")
    if sol["gauge"] not in ("coulomb", "phi_div"):
        raise ConfigError("solver.gauge must be coulomb or phi_div")
    if sol["scaling"] not in ("coherence", "penetration"):
        raise ConfigError("solver.scaling must be coherence or penetration")
    if not isinstance(sol["record_every"], int) or sol["record_every"] < 1:
        raise ConfigError("solver.record_every must be a positive integer")

    exp = merged["experiment"]
    if not isinstance(exp, dict):
        raise ConfigError("experiment must be a mapping")
    for name, opts in exp.items():
        if name not in _EXPERIMENT_KEYS:
            raise ConfigError(f"unknown experiment section {name!r}")
        if not isinstance(opts, dict):
            raise ConfigError(f"experiment.{name} must be a mapping")
        _require_keys(opts, _EXPERIMENT_KEYS[name], f"experiment.{name}")

    if not isinstance(merged["seed"], int):
        raise ConfigError("seed must be an integer")
    if not isinstance(merged["output_dir"], str):
        raise ConfigError("output_dir must be a string")

    return RunConfig(geometry=geo, physics=ph, solver=sol, experiment=exp,
                     seed=merged["seed"], output_dir=merged["output_dir"])


def parse_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}")
    return validate(raw)


def emit_config(cfg: RunConfig, path: str):
    with open(path, "w") as fh:
        fh.write(cfg.canonical())
