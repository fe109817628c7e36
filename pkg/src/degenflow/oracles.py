"""Closed-form reference solutions of the scalar equation u_t = Δ(u^m) and
exact multi-component reductions, sampled onto grids as trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as spi

from .grid import Grid, StateVector, Trajectory
from .model import DomainError, RegimeError, Exponents
from . import solver


@dataclass(frozen=True)
class BarenblattParams:
    """Source-type solution of u_t = Δ(u^m) in R^n carrying mass M.

    m > 1:  t^{-alpha} (C - kappa |x|^2 t^{-2 alpha/n})_+^{1/(m-1)}
    m < 1:  t^{-alpha} (C + kappa |x|^2 t^{-2 alpha/n})^{-1/(1-m)}
    with alpha = n/(n(m-1)+2) and kappa = alpha |m-1| / (2 m n).
    """

    m: float
    n: int
    M: float = 1.0

    def __post_init__(self):
        if self.m == 1:
            raise RegimeError("m = 1 is the heat kernel, not a Barenblatt profile")
        if not self.m > (self.n - 2) / self.n:
            raise RegimeError(f"Barenblatt profile needs m > (n-2)/n, got m={self.m}, n={self.n}")
        if self.M <= 0:
            raise DomainError("mass must be positive")

    @property
    def alpha(self) -> float:
        return self.n / (self.n * (self.m - 1.0) + 2.0)

    @property
    def kappa(self) -> float:
        return self.alpha * abs(self.m - 1.0) / (2.0 * self.m * self.n)

    @cached_property
    def C(self) -> float:
        # mass of the C = 1 profile, then the homogeneity M(C) = C^p M(1)
        n, m, kap = self.n, self.m, self.kappa
        sphere = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
        if m > 1:
            e = 1.0 / (m - 1.0)
            rmax = 1.0 / math.sqrt(kap)
            m1, _ = spi.quad(lambda r: r ** (n - 1) * (1.0 - kap * r * r) ** e, 0.0, rmax,
                             epsabs=0, epsrel=1e-13, limit=200)
            p = e + n / 2.0
        else:
            e = 1.0 / (1.0 - m)
            m1, _ = spi.quad(lambda r: r ** (n - 1) * (1.0 + kap * r * r) ** (-e), 0.0, math.inf,
                             epsabs=0, epsrel=1e-13, limit=400)
            p = n / 2.0 - e
        return (self.M / (sphere * m1)) ** (1.0 / p)

    def front_radius(self, t: float) -> float:
        if self.m < 1:
            return math.inf
        return math.sqrt(self.C / self.kappa) * t ** (self.alpha / self.n)

    def sup(self, t: float) -> float:
        return barenblatt_value(np.zeros(self.n), t, self)


def barenblatt_value(x, t: float, params: BarenblattParams):
    """Barenblatt profile at points ``x`` (shape (..., n)) and time t > 0."""
    if t <= 0:
        raise DomainError("Barenblatt profile needs t > 0")
    x = np.asarray(x, dtype=float)
    r2 = (x * x).sum(axis=-1)
    a, kap, C, m = params.alpha, params.kappa, params.C, params.m
    s = r2 * t ** (-2.0 * a / params.n)
    if m > 1:
        return t ** (-a) * np.maximum(C - kap * s, 0.0) ** (1.0 / (m - 1.0))
    return t ** (-a) * (C + kap * s) ** (-1.0 / (1.0 - m))


def heat_kernel_value(x, t: float, n: int, M: float = 1.0):
    """M (4 pi t)^{-n/2} exp(-|x|^2 / (4t))."""
    if t <= 0:
        raise DomainError("heat kernel needs t > 0")
    x = np.asarray(x, dtype=float)
    r2 = (x * x).sum(axis=-1)
    return M * (4.0 * math.pi * t) ** (-n / 2.0) * np.exp(-r2 / (4.0 * t))


def sample_trajectory(func: Callable[[np.ndarray, float], np.ndarray], grid: Grid,
                      times: Sequence[float], k: int = 1, meta: dict | None = None) -> Trajectory:
    """Cell-center samples of a closed form ``func(x, t)`` at the given times."""
    traj = Trajectory(grid, meta=dict(meta or {}, source="oracle"))
    x = grid.centers()
    for t in times:
        v = np.asarray(func(x, t), dtype=float)
        traj.append(StateVector(grid, np.broadcast_to(v, (k,) + grid.shape).copy(), t))
    return traj


def barenblatt_trajectory(grid: Grid, params: BarenblattParams, times: Sequence[float],
                          center=None) -> Trajectory:
    c = np.zeros(grid.dims) if center is None else np.asarray(center, dtype=float)
    return sample_trajectory(lambda x, t: barenblatt_value(x - c, t, params), grid, times,
                             meta={"oracle": "barenblatt", "m": params.m, "n": params.n, "M": params.M})


def heat_trajectory(grid: Grid, times: Sequence[float], M: float = 1.0, center=None) -> Trajectory:
    c = np.zeros(grid.dims) if center is None else np.asarray(center, dtype=float)
    return sample_trajectory(lambda x, t: heat_kernel_value(x - c, t, grid.dims, M), grid, times,
                             meta={"oracle": "heat", "M": M})


def proportional_reduction(weights: Sequence[float], scalar_traj: Trajectory) -> Trajectory:
    """u^i = c_i v for a scalar solution v. With the sum coupler and
    sum c_i = 1 this solves the coupled system exactly."""
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise DomainError("weights must be positive")
    if abs(w.sum() - 1.0) > 1e-14:
        raise DomainError(f"weights must sum to 1 (got {w.sum():.17g})")
    out = Trajectory(scalar_traj.grid, meta=dict(scalar_traj.meta, source="oracle",
                                                 reduction="proportional", weights=w.tolist()))
    shape = (-1,) + (1,) * scalar_traj.grid.dims
    for t, v in zip(scalar_traj.times, scalar_traj.states):
        out.append(StateVector(scalar_traj.grid, w.reshape(shape) * v[0][None], t))
    return out


def residual(traj: Trajectory, flux, drift, coupler, exp: Exponents,
             config: solver.SolverConfig | None = None, region=None) -> list[tuple[float, np.ndarray]]:
    """Per interior snapshot, the discrete L2 norm (per component) of
    (u(t+d) - u(t-d))/(2d) - div F(u(t)). Assumes evenly spaced snapshots
    around each interior time; ``region`` (boolean mask) restricts the norm."""
    if len(traj) < 3:
        raise ValueError("residual needs at least 3 snapshots")
    grid = traj.grid
    mask = np.ones(grid.shape, dtype=bool) if region is None else region
    out = []
    for j in range(1, len(traj) - 1):
        tm, t, tp = traj.times[j - 1], traj.times[j], traj.times[j + 1]
        dudt = (traj.states[j + 1] - traj.states[j - 1]) / (tp - tm)
        rhs, _ = solver.operator(traj.state(j), flux, drift, coupler, exp, config)
        r = dudt - rhs
        norms = np.sqrt((r[:, mask] ** 2).sum(axis=1) * grid.cell_volume)
        out.append((t, norms))
    return out
