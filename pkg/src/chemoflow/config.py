"""Run configuration: flat TOML-style documents, validated key by key.

Keys may appear at the top level or grouped under the cosmetic sections
[grid], [model], [initial], [run], [solver], [output], [monitors]; the key
names themselves are globally unique.  Unknown keys are rejected with a
closest-match suggestion.  Precedence is CLI > file > default.
"""

import difflib
import math
from dataclasses import dataclass, field, fields as dataclass_fields

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError
from .grid import GridSpec
from .harness import Scenario
from .regularization import (DIFFUSION_VARIANTS, FLUID_BCS, FLUID_VARIANTS,
                             ModelParams)

__all__ = ["RunConfig", "parse_config", "load_config", "KNOWN_SECTIONS"]

KNOWN_SECTIONS = ("grid", "model", "initial", "run", "solver", "output",
                  "monitors")


@dataclass
class RunConfig:
    """Flattened scenario + solver + output settings with defaults."""

    cells: tuple = (64, 64)
    lengths: tuple = (1.0, 1.0)
    m: float = 2.0
    chi: float = 1.0
    kappa: float = 0.5
    mu: float = 1.0
    eps: float = 0.01
    grad_phi: tuple = (0.0, -0.5)
    diffusion_variant: str = "degenerate"
    fluid_variant: str = "navier_stokes"
    fluid_bc: str = "no_slip"
    viscosity: float = 1.0
    K: float = 1.0
    floor: float = 1e-12
    T: float = 1.0
    sample_dt: float = 0.0
    dt_max: float = 0.05
    dt_fixed: float = 0.0
    cfl_target: float = 0.8
    lin_tol: float = 1e-10
    max_iters: int = 20000
    pressure_solver: str = "dct"
    diffusivity_mean: str = "arithmetic"
    n_preset: str = "gaussian"
    c_preset: str = "uniform"
    u_preset: str = "zero"
    n_base: float = 0.1
    n_amp: float = 0.9
    n_sigma: float = 0.12
    c_level: float = 1.0
    u_amp: float = 0.0
    perturb: float = 0.0
    seed: int = 0
    outdir: str = "out"
    csv_name: str = "history.csv"
    snapshot_dt: float = 0.0
    checkpoint_dt: float = 0.0
    tol_mass: float = 1e-2
    tol_c: float = 1e-8
    tol_budget: float = 5e-2
    energy_factor: float = 2.0
    threads: int = 0          # set from the environment only, never a key

    def scenario(self):
        grid = GridSpec(self.cells, self.lengths)
        params = ModelParams(
            chi=self.chi, kappa=self.kappa, mu=self.mu, m=self.m,
            eps=self.eps, grad_phi=self.grad_phi,
            diffusion_variant=self.diffusion_variant,
            fluid_variant=self.fluid_variant, fluid_bc=self.fluid_bc,
            viscosity=self.viscosity)
        return Scenario(
            grid=grid, params=params, T=self.T, sample_dt=self.sample_dt,
            n_preset=self.n_preset, c_preset=self.c_preset,
            u_preset=self.u_preset, n_base=self.n_base, n_amp=self.n_amp,
            n_sigma=self.n_sigma, c_level=self.c_level, u_amp=self.u_amp,
            perturb=self.perturb, seed=self.seed, cfl_target=self.cfl_target,
            dt_max=self.dt_max, dt_fixed=self.dt_fixed, lin_tol=self.lin_tol,
            max_iters=self.max_iters, K=self.K, floor=self.floor,
            pressure_solver=self.pressure_solver,
            diffusivity_mean=self.diffusivity_mean)

    def as_toml(self):
        lines = []
        for f in dataclass_fields(self):
            if f.name == "threads":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                lines.append(f"{f.name} = [{', '.join('%.17g' % x for x in v)}]")
            elif isinstance(v, str):
                lines.append(f'{f.name} = "{v}"')
            elif isinstance(v, bool):
                lines.append(f"{f.name} = {str(v).lower()}")
            elif isinstance(v, int):
                lines.append(f"{f.name} = {v}")
            else:
                lines.append(f"{f.name} = %.17g" % v)
        return "\n".join(lines) + "\n"


def _as_float(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    return float(v)


def _as_int(key, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return int(v)


def _as_str(key, v, choices=None):
    if not isinstance(v, str):
        raise ConfigError(f"{key}: expected a string, got {v!r}")
    if choices and v not in choices:
        raise ConfigError(f"{key}: must be one of {choices}, got {v!r}")
    return v


def _as_seq(key, v, n_min=2, n_max=3, caster=float):
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{key}: expected a list, got {v!r}")
    if not (n_min <= len(v) <= n_max):
        raise ConfigError(f"{key}: expected {n_min}..{n_max} entries")
    try:
        return tuple(caster(x) for x in v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: entries must be {caster.__name__}s")


_CASTERS = {
    "cells": lambda k, v: _as_seq(k, v, caster=int),
    "lengths": lambda k, v: _as_seq(k, v),
    "grad_phi": lambda k, v: _as_seq(k, v),
    "diffusion_variant": lambda k, v: _as_str(k, v, DIFFUSION_VARIANTS),
    "fluid_variant": lambda k, v: _as_str(k, v, FLUID_VARIANTS),
    "fluid_bc": lambda k, v: _as_str(k, v, FLUID_BCS),
    "pressure_solver": lambda k, v: _as_str(k, v, ("cg", "dct")),
    "diffusivity_mean": lambda k, v: _as_str(k, v, ("arithmetic", "harmonic")),
    "n_preset": lambda k, v: _as_str(k, v, ("gaussian", "uniform")),
    "c_preset": lambda k, v: _as_str(k, v, ("uniform",)),
    "u_preset": lambda k, v: _as_str(k, v, ("zero", "vortex")),
    "outdir": _as_str,
    "csv_name": _as_str,
    "max_iters": _as_int,
    "seed": _as_int,
}

_CONSTRAINTS = {
    "mu": (lambda c: c.mu > 0, "mu: must be > 0 (standing assumption mu > 0)"),
    "m": (lambda c: c.m > 0, "m: must be > 0"),
    "chi": (lambda c: c.chi >= 0, "chi: must be >= 0"),
    "kappa": (lambda c: c.kappa >= 0, "kappa: must be >= 0"),
    "eps": (lambda c: 0 < c.eps <= 1, "eps: must lie in (0, 1]"),
    "T": (lambda c: c.T > 0, "T: must be > 0"),
    "viscosity": (lambda c: c.viscosity > 0, "viscosity: must be > 0"),
    "cfl_target": (lambda c: 0 < c.cfl_target < 1,
                   "cfl_target: must lie in (0, 1)"),
    "lin_tol": (lambda c: c.lin_tol > 0, "lin_tol: must be > 0"),
    "tol_mass": (lambda c: c.tol_mass > 0, "tol_mass: must be > 0"),
    "tol_c": (lambda c: c.tol_c > 0, "tol_c: must be > 0"),
    "tol_budget": (lambda c: c.tol_budget > 0, "tol_budget: must be > 0"),
    "floor": (lambda c: c.floor > 0, "floor: must be > 0"),
    "n_base": (lambda c: c.n_base > 0, "n_base: must be > 0 (n0 positive)"),
    "c_level": (lambda c: c.c_level > 0, "c_level: must be > 0 (c0 positive)"),
    "sample_dt": (lambda c: c.sample_dt >= 0, "sample_dt: must be >= 0"),
    "max_iters": (lambda c: c.max_iters > 0, "max_iters: must be >= 1"),
    "dt_max": (lambda c: c.dt_max > 0, "dt_max: must be > 0"),
}

_FIELD_NAMES = [f.name for f in dataclass_fields(RunConfig)]
_SETTABLE = [n for n in _FIELD_NAMES if n != "threads"]


def _flatten(doc):
    flat = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            if key not in KNOWN_SECTIONS:
                raise ConfigError(
                    f"{key}: unknown section (known: {', '.join(KNOWN_SECTIONS)})")
            for sub, subval in value.items():
                if isinstance(subval, dict):
                    raise ConfigError(f"{key}.{sub}: nested tables not allowed")
                if sub in flat:
                    raise ConfigError(f"{key}.{sub}: duplicate key {sub!r}")
                flat[sub] = (f"{key}.{sub}", subval)
        else:
            if key in flat:
                raise ConfigError(f"{key}: duplicate key")
            flat[key] = (key, value)
    return flat


def apply_overrides(cfg, overrides):
    """Set key=value pairs (already parsed) onto cfg with validation."""
    for key, (path, value) in overrides.items():
        if key not in _SETTABLE:
            hint = difflib.get_close_matches(key, _SETTABLE, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"{path}: unknown key{suffix}")
        caster = _CASTERS.get(key)
        if caster is not None:
            value = caster(path, value)
        else:
            current = getattr(cfg, key)
            if isinstance(current, float):
                value = _as_float(path, value)
            elif isinstance(current, int):
                value = _as_int(path, value)
            else:
                value = _as_str(path, value)
        setattr(cfg, key, value)
    for name, (check, message) in _CONSTRAINTS.items():
        if not check(cfg):
            raise ConfigError(message)
    if len(cfg.cells) != len(cfg.lengths):
        raise ConfigError("lengths: must match the cells dimension")
    if len(cfg.grad_phi) != len(cfg.cells):
        raise ConfigError("grad_phi: must match the cells dimension")
    return cfg


def parse_config(text, overrides=None):
    """Parse a config document into a validated RunConfig.

    ``overrides`` (mapping key -> value) are applied after the file, giving
    the CLI > file > default precedence.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}")
    cfg = RunConfig()
    apply_overrides(cfg, _flatten(doc))
    if overrides:
        apply_overrides(cfg, {k: (k, v) for k, v in overrides.items()})
    return cfg


def load_config(path, overrides=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides=overrides)
