"""Experiment configuration files.

An experiment is an INI file (``configparser`` syntax). Lists are comma
separated; booleans accept true/false/yes/no/1/0. Sections::

    [experiment]  name, seed, waive_validation, validation_samples
    [model]       k, m, beta, lambda, q
    [coupler]     kind = sum | euclidean | weighted_power
    [flux]        kind = identity | rotation; a, b; optional declared c, C1, C2, C3, C4
    [drift]       kind = none | power; C5, q, direction
    [grid]        dims, lo, hi, cells, bc = zero_flux | dirichlet_zero | periodic
    [initial]     kind = gaussian | bump | barenblatt | proportional | file, plus its keys
    [solver]      t_start, t_end, cfl_safety, clip_negative, coefficient_mean,
                  epsilon_reg, snapshot_interval, ledger_every, backend
    [check.NAME]  kind = <check kind> plus its keys; ``threshold`` names an
                  entry of the thresholds file

The space dimension of the model is the grid's ``dims``. See ``docs/config.md``
for the initial-data and check keys.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..grid import BC, Grid
from ..model import (
    DomainError,
    Exponents,
    IdentityFlux,
    NoDrift,
    PowerDrift,
    ScaledRotationFlux,
    StructureConstants,
    make_coupler,
)
from ..solver import SolverConfig

INITIAL_KINDS = ("gaussian", "bump", "barenblatt", "proportional", "file")
CHECK_KINDS = (
    "mass_conservation",
    "clipped_mass",
    "boundary_guard",
    "sup_monotone",
    "k_hat_rate",
    "oracle_convergence",
    "proportional",
    "harnack",
    "oscillation_decay",
    "truncation",
)


class ConfigError(ValueError):
    """The configuration cannot be parsed or is inconsistent."""


def parse_floats(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"not a list of numbers: {text!r}") from None


def _bool(text) -> bool:
    key = str(text).strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_points(text, dims) -> list[tuple]:
    # "x0 y0; x1 y1" or "x0; x1" in 1-D
    pts = []
    for chunk in str(text).split(";"):
        if chunk.strip():
            vals = [float(v) for v in chunk.replace(",", " ").split()]
            if len(vals) != dims:
                raise ConfigError(f"point {chunk.strip()!r} needs {dims} coordinates")
            pts.append(tuple(vals))
    return pts


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


@dataclass
class CheckSpec:
    name: str
    kind: str
    params: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.params.get(key, default)

    def floats(self, key, default=None) -> list[float]:
        if key not in self.params:
            if default is None:
                raise ConfigError(f"check {self.name!r} needs {key!r}")
            return list(default)
        return parse_floats(self.params[key])

    def number(self, key, default=None) -> float:
        if key not in self.params:
            if default is None:
                raise ConfigError(f"check {self.name!r} needs {key!r}")
            return float(default)
        return float(self.params[key])


@dataclass
class ExperimentConfig:
    name: str
    exponents: Exponents
    coupler: str
    flux: dict
    drift: dict
    grid: Grid
    initial: dict
    solver: SolverConfig
    t_start: float = 0.0
    checks: list[CheckSpec] = field(default_factory=list)
    seed: int = 0
    waive_validation: bool = False
    validation_samples: int = 2000

    # -- built objects -----------------------------------------------------
    def build_coupler(self):
        return make_coupler(self.coupler, self.exponents)

    def build_flux(self):
        kind = self.flux.get("kind", "identity")
        if kind == "identity":
            return IdentityFlux()
        if kind == "rotation":
            a = float(self.flux.get("a", 1.0))
            b = float(self.flux.get("b", 0.0))
            declared = {key: float(self.flux[key]) for key in ("c", "C1", "C2", "C3", "C4")
                        if key in self.flux}
            constants = None
            if declared:
                base = ScaledRotationFlux(a, b).constants
                constants = StructureConstants(**{**base.__dict__, **declared})
            return ScaledRotationFlux(a, b, constants)
        raise ConfigError(f"unknown flux kind {kind!r}")

    def build_drift(self):
        kind = self.drift.get("kind", "none")
        if kind == "none":
            return NoDrift()
        if kind == "power":
            direction = parse_floats(self.drift.get("direction", ",".join(["1"] + ["0"] * (self.grid.dims - 1))))
            if len(direction) != self.grid.dims:
                raise ConfigError("drift direction needs one entry per grid axis")
            return PowerDrift(float(self.drift.get("C5", 1.0)), float(self.drift["q"]), direction)
        raise ConfigError(f"unknown drift kind {kind!r}")

    def check(self, name: str) -> Optional[CheckSpec]:
        for c in self.checks:
            if c.name == name:
                return c
        return None

    # -- text form ---------------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        exp = self.exponents
        cp["experiment"] = {"name": self.name, "seed": str(self.seed),
                            "waive_validation": _fmt(self.waive_validation),
                            "validation_samples": str(self.validation_samples)}
        model = {"k": str(exp.k), "m": _fmt(exp.m), "beta": _fmt(list(exp.beta)),
                 "lambda": _fmt(list(exp.lam))}
        if exp.q is not None:
            model["q"] = _fmt(exp.q)
        cp["model"] = model
        cp["coupler"] = {"kind": self.coupler}
        cp["flux"] = {k: _fmt(v) for k, v in self.flux.items()}
        cp["drift"] = {k: _fmt(v) for k, v in self.drift.items()}
        g = self.grid
        cp["grid"] = {"dims": str(g.dims), "lo": _fmt(g.extent[0][0]), "hi": _fmt(g.extent[0][1]),
                      "cells": str(g.cells[0]), "bc": BC(g.bc).label}
        cp["initial"] = {k: _fmt(v) for k, v in self.initial.items()}
        s = self.solver
        cp["solver"] = {
            "t_start": _fmt(self.t_start), "t_end": _fmt(s.t_end), "cfl_safety": _fmt(s.cfl_safety),
            "clip_negative": _fmt(s.clip_negative), "coefficient_mean": s.coefficient_mean.name.lower(),
            "epsilon_reg": _fmt(s.epsilon_reg), "snapshot_interval": _fmt(s.snapshot_interval),
            "ledger_every": str(s.ledger_every), "backend": s.backend,
        }
        for c in self.checks:
            cp[f"check.{c.name}"] = {"kind": c.kind, **{k: _fmt(v) for k, v in c.params.items()}}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _section(cp, name, required=True) -> dict:
    if not cp.has_section(name):
        if required:
            raise ConfigError(f"missing section [{name}]")
        return {}
    return dict(cp.items(name))


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(str(err)) from err
    try:
        return _build(cp)
    except ConfigError:
        raise
    except (DomainError, KeyError, ValueError, TypeError) as err:
        raise ConfigError(f"{type(err).__name__}: {err}") from err


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from err
    return parse_config(text)


def _build(cp) -> ExperimentConfig:
    ex = _section(cp, "experiment")
    grid_s = _section(cp, "grid")
    dims = int(grid_s.get("dims", 1))
    grid = Grid.box(float(grid_s["lo"]), float(grid_s["hi"]), int(grid_s["cells"]), dims,
                    BC.parse(grid_s.get("bc", "zero_flux")))

    model = _section(cp, "model")
    k = int(model.get("k", 1))
    beta = parse_floats(model.get("beta", "1"))
    lam = parse_floats(model.get("lambda", "1"))
    if len(beta) == 1:
        beta = beta * k
    if len(lam) == 1:
        lam = lam * k
    q = float(model["q"]) if model.get("q", "").strip() else None
    exp = Exponents(dims, k, float(model["m"]), tuple(beta), tuple(lam), q)

    solver_s = _section(cp, "solver")
    known = {"t_start", "t_end", "cfl_safety", "clip_negative", "coefficient_mean", "epsilon_reg",
             "snapshot_interval", "ledger_every", "backend"}
    unknown = set(solver_s) - known
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    t_start = float(solver_s.get("t_start", 0.0))
    solver = SolverConfig(
        cfl_safety=float(solver_s.get("cfl_safety", 0.4)),
        clip_negative=_bool(solver_s.get("clip_negative", "true")),
        coefficient_mean=solver_s.get("coefficient_mean", "arithmetic"),
        epsilon_reg=float(solver_s.get("epsilon_reg", 1e-12)),
        t_end=float(solver_s.get("t_end", 1.0)),
        snapshot_interval=float(solver_s.get("snapshot_interval", "inf")),
        ledger_every=int(solver_s.get("ledger_every", 1)),
        backend=solver_s.get("backend", "auto"),
    )
    if solver.t_end < t_start:
        raise ConfigError(f"t_end={solver.t_end} precedes t_start={t_start}")
    if solver.backend not in ("auto", "compiled", "python"):
        raise ConfigError(f"unknown backend {solver.backend!r}")

    initial = _section(cp, "initial")
    if initial.get("kind") not in INITIAL_KINDS:
        raise ConfigError(f"initial kind must be one of {INITIAL_KINDS}, got {initial.get('kind')!r}")

    checks = []
    for sec in cp.sections():
        if sec.startswith("check."):
            params = dict(cp.items(sec))
            kind = params.pop("kind", None)
            if kind not in CHECK_KINDS:
                raise ConfigError(f"[{sec}] kind must be one of {CHECK_KINDS}, got {kind!r}")
            checks.append(CheckSpec(sec[len("check."):], kind, params))

    cfg = ExperimentConfig(
        name=ex.get("name", "experiment"),
        exponents=exp,
        coupler=_section(cp, "coupler", required=False).get("kind", "sum"),
        flux=_section(cp, "flux", required=False) or {"kind": "identity"},
        drift=_section(cp, "drift", required=False) or {"kind": "none"},
        grid=grid,
        initial=initial,
        solver=solver,
        t_start=t_start,
        checks=checks,
        seed=int(ex.get("seed", 0)),
        waive_validation=_bool(ex.get("waive_validation", "false")),
        validation_samples=int(ex.get("validation_samples", 2000)),
    )
    # resolve the built objects early so errors surface as config errors
    cfg.build_coupler()
    cfg.build_flux()
    cfg.build_drift()
    return cfg


