"""Explicit conservative finite-volume time stepping for

    (u^i)_t = div( m U^{m-1} A(grad u^i, u^i, x, t) + B(u^i, x, t) ).

Face fluxes are differenced into cell updates, so the change of each
component's total mass equals the flux through the domain boundary.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from . import _kernels_py
from .grid import BC, Grid, StateVector, Trajectory, divergence, face_average, pad, tangential_gradient
from .model import (
    Coupler,
    DriftLaw,
    Exponents,
    FluxLaw,
    EuclideanNormCoupler,
    NoDrift,
    PowerDrift,
    ScaledRotationFlux,
    SumCoupler,
    WeightedPowerCoupler,
)

log = logging.getLogger(__name__)

TINY = 1e-300


class CoefficientMean(enum.IntEnum):
    ARITHMETIC = 0
    HARMONIC = 1

    @classmethod
    def parse(cls, name) -> "CoefficientMean":
        if isinstance(name, CoefficientMean):
            return name
        key = str(name).strip().lower()
        if key.startswith("arith"):
            return cls.ARITHMETIC
        if key.startswith("harm"):
            return cls.HARMONIC
        raise ValueError(f"unknown coefficient mean {name!r}")


class SingularCoefficientError(ValueError):
    """m < 1 with a vanishing face value of U and no regularization floor."""


class NumericalBlowup(RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class SolverConfig:
    cfl_safety: float = 0.4
    clip_negative: bool = True
    coefficient_mean: CoefficientMean = CoefficientMean.ARITHMETIC
    epsilon_reg: float = 1e-12
    t_end: float = 1.0
    snapshot_interval: float = math.inf
    # ledger row every this many steps (the last step is always recorded)
    ledger_every: int = 1
    # "auto", "compiled" or "python"; custom laws always take the generic path
    backend: str = "auto"

    def __post_init__(self):
        self.coefficient_mean = CoefficientMean.parse(self.coefficient_mean)
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.epsilon_reg < 0:
            raise ValueError("epsilon_reg must be >= 0")
        if self.ledger_every < 1:
            raise ValueError("ledger_every must be >= 1")


@dataclass
class StepReport:
    clipped_mass: np.ndarray  # mass added per component by clipping
    boundary_outflow: np.ndarray  # mass leaving per component through the boundary


def field_U(u: np.ndarray, coupler: Coupler) -> np.ndarray:
    # clipped-off runs can carry small negative undershoots; U sees them as 0
    return np.asarray(coupler.value(np.maximum(u, 0.0)), dtype=float)


def _backend(config: SolverConfig):
    if config.backend == "python":
        return _kernels_py
    if config.backend == "compiled":
        if kernels.compiled_backend is None:
            raise RuntimeError("compiled kernels requested but the extension is not built")
        return kernels.compiled_backend
    return kernels.backend


def face_coefficient(state: StateVector, coupler: Coupler, m: float,
                     config: Optional[SolverConfig] = None) -> list[np.ndarray]:
    """D = m * Ubar^(m-1) on every face; Ubar is the configured mean of U over
    the two adjacent cells (the wall value 0 on DirichletZero boundaries)."""
    config = config or SolverConfig()
    U = field_U(state.u, coupler)
    D, singular = _backend(config).face_coef(
        U, float(m), int(config.coefficient_mean), float(config.epsilon_reg), int(state.grid.bc))
    if singular:
        raise SingularCoefficientError(
            f"m={m} < 1 with U = 0 on {singular} faces and epsilon_reg = 0")
    return D


def stable_dt(state: StateVector, config: SolverConfig, flux: FluxLaw, drift: DriftLaw,
              coupler: Coupler, exp: Exponents, D: Optional[list] = None) -> float:
    """cfl_safety * h_min^2 / (2 dims max(D C3, tiny)), further limited by
    h_min / max|B'| when a drift is active."""
    grid = state.grid
    if D is None:
        D = face_coefficient(state, coupler, exp.m, config)
    Dmax = max(float(np.max(d)) for d in D)
    hmin = min(grid.h)
    dt = config.cfl_safety * hmin * hmin / (2.0 * grid.dims * max(Dmax * flux.constants.C3, TINY))
    if drift.C5 > 0:
        slope = drift.max_derivative(float(np.max(state.u)))
        if slope > 0:
            dt = min(dt, config.cfl_safety * hmin / slope)
    return dt


def _fast_params(flux, drift, dims):
    if not isinstance(flux, ScaledRotationFlux):
        return None
    if isinstance(drift, NoDrift):
        return flux.a, flux.b, 0.0, 1.0, (0.0,) * dims
    if isinstance(drift, PowerDrift) and len(drift.direction) == dims:
        return flux.a, flux.b, drift.C5, drift.q, tuple(float(v) for v in drift.direction)
    return None


def _coupler_params(coupler, k):
    if isinstance(coupler, SumCoupler):
        return 0, np.ones(k), np.ones(k)
    if isinstance(coupler, WeightedPowerCoupler):
        return 1, np.broadcast_to(coupler.lam, (k,)).copy(), np.broadcast_to(coupler.beta, (k,)).copy()
    if isinstance(coupler, EuclideanNormCoupler):
        return 2, np.ones(k), np.ones(k)
    return None


def _generic_rhs(u, D, grid: Grid, flux: FluxLaw, drift: DriftLaw, t: float):
    F = []
    inflow = 0.0
    for axis in range(grid.dims):
        if grid.dims == 1:
            p = np.diff(pad(u, grid, 0), axis=0)[..., None] / grid.h[0]
        else:
            p = np.stack(tangential_gradient(u, grid, axis), axis=-1)
        z = face_average(u, grid, axis)
        x = grid.face_centers(axis)
        Fa = D[axis] * np.asarray(flux(p, z, x, t))[..., axis] + np.asarray(drift(z, x, t))[..., axis]
        if grid.bc == BC.ZERO_FLUX:
            idx = [slice(None)] * grid.dims
            idx[axis] = [0, -1]
            Fa[tuple(idx)] = 0.0
        area = float(np.prod([grid.h[d] for d in range(grid.dims) if d != axis]))
        lo = [slice(None)] * grid.dims
        hi = [slice(None)] * grid.dims
        lo[axis] = 0
        hi[axis] = -1
        inflow += float((Fa[tuple(hi)].sum() - Fa[tuple(lo)].sum()) * area)
        F.append(Fa)
    return divergence(F, grid), inflow


def operator(state: StateVector, flux: FluxLaw, drift: DriftLaw, coupler: Coupler,
             exp: Exponents, config: Optional[SolverConfig] = None,
             D: Optional[list] = None) -> tuple[np.ndarray, np.ndarray]:
    """Discrete right-hand side div(F_i) for every component and the boundary
    inflow rate per component."""
    config = config or SolverConfig()
    grid = state.grid
    if D is None:
        D = face_coefficient(state, coupler, exp.m, config)
    fast = _fast_params(flux, drift, grid.dims)
    out = np.empty_like(state.u)
    inflow = np.zeros(state.k)
    for i in range(state.k):
        if fast is not None:
            a, b, c5, q, e = fast
            out[i], inflow[i] = _backend(config).rhs(state.u[i], D, grid.h, int(grid.bc), a, b, c5, q, e)
        else:
            out[i], inflow[i] = _generic_rhs(state.u[i], D, grid, flux, drift, state.t)
    return out, inflow


def step(state: StateVector, dt: float, flux: FluxLaw, drift: DriftLaw, coupler: Coupler,
         exp: Exponents, config: Optional[SolverConfig] = None,
         D: Optional[list] = None) -> tuple[StateVector, StepReport]:
    """One forward-Euler step u^i + dt div(F_i)."""
    config = config or SolverConfig()
    rhs, inflow = operator(state, flux, drift, coupler, exp, config, D)
    with np.errstate(invalid="ignore", over="ignore"):
        u_new = state.u + dt * rhs
    if not np.all(np.isfinite(u_new)):
        bad = np.argwhere(~np.isfinite(u_new))[0]
        raise NumericalBlowup(
            f"non-finite value in component {bad[0] + 1} at cell {tuple(int(v) for v in bad[1:])}, t={state.t}")
    vol = state.grid.cell_volume
    clipped = np.zeros(state.k)
    if config.clip_negative:
        neg = np.minimum(u_new, 0.0)
        clipped = -neg.reshape(state.k, -1).sum(axis=1) * vol
        if clipped.any():
            np.maximum(u_new, 0.0, out=u_new)
    return StateVector(state.grid, u_new, state.t + dt), StepReport(clipped, -inflow * dt)


def simulate(initial: StateVector, config: SolverConfig, flux: FluxLaw, drift: DriftLaw,
             coupler: Coupler, exp: Exponents, meta: Optional[dict] = None) -> Trajectory:
    """Step from ``initial.t`` to ``config.t_end`` and record snapshots every
    ``snapshot_interval`` plus the initial and final states."""
    if np.any(initial.u < 0):
        raise ValueError("initial data must be nonnegative")
    grid = initial.grid
    k = initial.k
    vol = grid.cell_volume
    t0 = float(initial.t)
    traj = Trajectory(grid, meta=dict(meta or {}, source="solver"))
    state = initial.copy()
    traj.append(state)

    ledger = {"step": [], "t": [], "dt": []}
    for i in range(k):
        ledger[f"mass_{i + 1}"] = []
    ledger.update(clipped_mass=[], boundary_flux=[], sup_U=[])
    clipped_total = np.zeros(k)
    outflow_total = np.zeros(k)

    def record(step_no, dt):
        masses = state.u.reshape(k, -1).sum(axis=1) * vol
        if not np.all(np.isfinite(masses)):
            traj.ledger = ledger
            raise NumericalBlowup(f"non-finite mass at t={state.t}", traj)
        ledger["step"].append(step_no)
        ledger["t"].append(state.t)
        ledger["dt"].append(dt)
        for i in range(k):
            ledger[f"mass_{i + 1}"].append(masses[i])
        ledger["clipped_mass"].append(float(clipped_total.sum()))
        ledger["boundary_flux"].append(float(outflow_total.sum()))
        ledger["sup_U"].append(float(np.max(field_U(state.u, coupler))))

    record(0, 0.0)
    t_end = float(config.t_end)
    interval = float(config.snapshot_interval)
    snap_idx = 1
    next_snap = t0 + interval if math.isfinite(interval) and interval > 0 else math.inf
    tol = 1e-12 * max(1.0, abs(t_end))
    n_steps = 0
    fast = _fast_params(flux, drift, grid.dims)
    cpl = _coupler_params(coupler, k)
    fused = fast is not None and cpl is not None
    while state.t < t_end - tol:
        target = min(t_end, next_snap)
        if fused:
            # run to the next ledger row or snapshot inside the kernel
            a, b, c5, q, e = fast
            chunk = config.ledger_every - n_steps % config.ledger_every
            u, t, taken, dt, clipped, outflow, status, where = _backend(config).advance(
                state.u, grid.h, int(grid.bc), float(exp.m), int(config.coefficient_mean),
                float(config.epsilon_reg), cpl[0], cpl[1], cpl[2], a, b, float(flux.constants.C3),
                c5, q, e, float(config.cfl_safety), float(state.t), target, chunk,
                bool(config.clip_negative), tol)
            state = StateVector(grid, u, t)
            n_steps += taken
            clipped_total += clipped
            outflow_total += outflow
            if status == 1:
                raise SingularCoefficientError(
                    f"m={exp.m} < 1 with U = 0 on some faces and epsilon_reg = 0 (t={t})")
            if status == 2:
                traj.ledger = ledger
                raise NumericalBlowup(
                    f"non-finite value in component {where[0] + 1} at cell "
                    f"{tuple(int(v) for v in where[1])}, t={t}", traj)
        else:
            D = face_coefficient(state, coupler, exp.m, config)
            dt = stable_dt(state, config, flux, drift, coupler, exp, D)
            if state.t + dt >= target - tol:
                dt = target - state.t
            try:
                new, report = step(state, dt, flux, drift, coupler, exp, config, D)
            except NumericalBlowup as err:
                traj.ledger = ledger
                err.trajectory = traj
                raise
            if abs(new.t - target) <= tol:
                new.t = target
            state = new
            n_steps += 1
            clipped_total += report.clipped_mass
            outflow_total += report.boundary_outflow
        at_snap = state.t >= next_snap - tol
        if n_steps % config.ledger_every == 0 or at_snap or state.t >= t_end - tol:
            record(n_steps, dt)
        if at_snap and state.t < t_end - tol:
            traj.append(state)
            snap_idx += 1
            next_snap = t0 + snap_idx * interval
    if traj.times[-1] != state.t:
        traj.append(state)

    traj.ledger = {key: np.asarray(v) for key, v in ledger.items()}
    traj.meta.update(
        steps=n_steps,
        clipped_mass=[float(v) for v in clipped_total],
        boundary_outflow=[float(v) for v in outflow_total],
        backend="generic" if not fused else
        ("python" if _backend(config) is _kernels_py else "compiled"),
    )
    log.debug("simulate: %d steps to t=%g", n_steps, state.t)
    return traj
