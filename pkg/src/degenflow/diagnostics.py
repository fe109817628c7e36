"""Observables computed from saved trajectories.

Time series (mass, sup U) come first, followed by the truncation energies.
The Harnack ratios and the oscillation statistics are evaluated on
intrinsically scaled cylinders."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import Ball, Trajectory, boundary_layer_mask, face_average, face_gradient, fmt
from .model import Coupler, DomainError, Exponents, RegimeError, StructureConstants, derive
from .solver import field_U


class ClippingError(ValueError):
    """A requested region leaves the grid or the trajectory's time range."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


class Record:
    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def record_key(traj_id: str, name: str, params: dict) -> str:
    digest = hashlib.sha1(json.dumps(_jsonable(params), sort_keys=True).encode()).hexdigest()[:12]
    return f"{traj_id}:{name}:{digest}"


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------


@dataclass
class Series(Record):
    name: str
    times: list
    values: list

    def to_csv(self) -> str:
        rows = ["t,value"] + [f"{fmt(t)},{fmt(v)}" for t, v in zip(self.times, self.values)]
        return "\n".join(rows) + "\n"


@dataclass
class MassSeries(Series):
    component: int = 0
    max_drift: float = 0.0
    relative: bool = True


def mass_series(traj: Trajectory, i: int) -> MassSeries:
    """Total mass of component ``i`` per snapshot, with the largest drift from
    the initial mass (relative unless the initial mass is zero)."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    vol = traj.grid.cell_volume
    masses = [float(s[i].sum() * vol) for s in traj.states]
    m0 = masses[0]
    drift = max(abs(v - m0) for v in masses)
    relative = m0 != 0
    if relative:
        drift /= abs(m0)
    return MassSeries(f"mass_{i + 1}", list(traj.times), masses, i, drift, relative)


@dataclass
class SupSeries(Series):
    def K_hat(self, t0: float) -> float:
        """max over snapshots with t >= t0 of sup_x U."""
        vals = [v for t, v in zip(self.times, self.values) if t >= t0 - 1e-12 * max(1.0, t0)]
        if not vals:
            raise ValueError(f"no snapshot at or after t0={t0}")
        return max(vals)

    def max_increase(self, start: int = 1) -> float:
        v = np.asarray(self.values[start:])
        if len(v) < 2:
            return 0.0
        return float(max(np.max(np.diff(v)), 0.0))


def sup_U_series(traj: Trajectory, coupler: Coupler) -> SupSeries:
    values = [float(np.max(field_U(s, coupler))) for s in traj.states]
    return SupSeries("sup_U", list(traj.times), values)


def fit_power_law(t0s: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit values ~ A t0^{-rate}; returns (rate, A)."""
    slope, intercept = np.polyfit(np.log(t0s), np.log(values), 1)
    return float(-slope), float(math.exp(intercept))


def boundary_mass_fraction(traj: Trajectory) -> float:
    """Largest share of total mass held by boundary-adjacent cells."""
    mask = boundary_layer_mask(traj.grid)
    worst = 0.0
    for s in traj.states:
        total = float(np.abs(s).sum())
        if total > 0:
            worst = max(worst, float(np.abs(s[:, mask]).sum()) / total)
    return worst


# ---------------------------------------------------------------------------
# truncation energies
# ---------------------------------------------------------------------------


@dataclass
class TruncationDiagnostics(Record):
    K: float
    t0: float
    m: float
    levels: list
    times: list
    energies: list
    sup_parts: list
    gradient_parts: list
    resolved: bool


def _integrate_from(times: np.ndarray, values: np.ndarray, t_lo: float) -> float:
    # trapezoid of the piecewise-linear interpolant over [t_lo, times[-1]]
    if t_lo >= times[-1]:
        return 0.0
    keep = times > t_lo
    ts = np.concatenate([[t_lo], times[keep]])
    vs = np.concatenate([[np.interp(t_lo, times, values)], values[keep]])
    return float(np.trapezoid(vs, ts))


def truncation_energy(traj: Trajectory, coupler: Coupler, K: float, t0: float,
                      jmax: int, m: float) -> TruncationDiagnostics:
    """Energies of the truncations U_j = (U - L_j)_+ at levels
    L_j = K(1 - 2^-j) from times T_j = t0(1 - 2^{-(1+m)j}):

        A_j = sup_{t >= T_j} int U_j^{1+m} dx + int_{T_j}^{t_end} int |grad U_j^m|^2 dx dt
    """
    if not K > 2:
        raise DomainError("truncation scale K must exceed 2")
    if t0 <= 0:
        raise DomainError("t0 must be positive")
    if traj.times[-1] < t0:
        raise ValueError(f"trajectory ends at t={traj.times[-1]} before t0={t0}")
    grid = traj.grid
    vol = grid.cell_volume
    times = traj.time_array()
    Us = [field_U(s, coupler) for s in traj.states]
    levels = [K * (1.0 - 2.0 ** (-j)) for j in range(jmax + 1)]
    Ts = [t0 * (1.0 - 2.0 ** (-(1.0 + m) * j)) for j in range(jmax + 1)]
    sup_parts, grad_parts, energies = [], [], []
    for L, T in zip(levels, Ts):
        level_int = np.empty(len(Us))
        grad_int = np.empty(len(Us))
        for idx, U in enumerate(Us):
            Uj = np.maximum(U - L, 0.0)
            level_int[idx] = float((Uj ** (1.0 + m)).sum() * vol)
            grad_int[idx] = sum(float((g * g).sum()) for g in face_gradient(Uj ** m, grid)) * vol
        after = times >= T - 1e-14 * max(1.0, T)
        sup_part = float(level_int[after].max()) if after.any() else 0.0
        grad_part = _integrate_from(times, grad_int, T)
        sup_parts.append(sup_part)
        grad_parts.append(grad_part)
        energies.append(sup_part + grad_part)
    # every [T_j, T_{j+1}] should hold at least 4 snapshots
    resolved = all(
        np.count_nonzero((times >= Ts[j]) & (times <= Ts[j + 1])) >= 4 for j in range(jmax))
    return TruncationDiagnostics(K, t0, m, levels, Ts, energies, sup_parts, grad_parts, resolved)


# ---------------------------------------------------------------------------
# Harnack quantities (singular range)
# ---------------------------------------------------------------------------


@dataclass
class HarnackRecord(Record):
    component: int
    y: list
    rho: float
    s: float
    t: float
    theta: float
    lhs: float
    rhs_inf: float
    tail: float
    gamma_fit: float


def _harnack_setup(traj, i, exp, rho):
    if not exp.m < 1:
        raise RegimeError("Harnack estimates are stated for 0 < m < 1")
    d = derive(exp)
    theta = d.theta_i[i]
    if not theta > 0:
        raise RegimeError(f"theta_i = {theta} <= 0")
    b = exp.beta[i]
    if b == 0:
        raise RegimeError("beta_i = 0 makes the tail exponent 1/(beta_i(1-m)) undefined")
    return theta, 1.0 / (b * (1.0 - exp.m))


def _ball_integrals(traj, i, ball, idx):
    mask = ball.mask(traj.grid)
    vol = traj.grid.cell_volume
    return np.array([float(traj.states[j][i][mask].sum() * vol) for j in idx])


def _check_window(traj, lo, hi):
    if lo < traj.times[0] - 1e-12 or hi > traj.times[-1] + 1e-12:
        raise ClippingError(f"needs t in [{lo}, {hi}], trajectory covers [{traj.times[0]}, {traj.times[-1]}]")


def _tail_coefficient(constants: StructureConstants, rho: float, e: float) -> float:
    C2, C4 = constants.C2, constants.C4
    return math.sqrt(1.0 + C4) + (C4 + math.sqrt(C2 + C4)) * rho ** e


def harnack_ratio(traj: Trajectory, i: int, y, rho: float, s: float, t: float,
                  exp: Exponents, constants: StructureConstants) -> HarnackRecord:
    """Smallest gamma with

        sup_tau int_{B_rho(y)} u^i <= gamma [ inf_tau int_{B_2rho(y)} u^i
                                             + coeff * ((t-s)/rho^theta_i)^{1/(beta_i(1-m))} ]

    over snapshots tau in [s, t]."""
    theta, e = _harnack_setup(traj, i, exp, rho)
    if not s < t:
        raise ValueError("need s < t")
    big = Ball(tuple(y), 2.0 * rho)
    if not big.inside(traj.grid):
        raise ClippingError(f"B_2rho({tuple(y)}) with rho={rho} leaves the grid")
    _check_window(traj, s, t)
    idx = traj.indices_in(s, t)
    if len(idx) == 0:
        raise ClippingError(f"no snapshots in [{s}, {t}]")
    lhs = float(_ball_integrals(traj, i, Ball(tuple(y), rho), idx).max())
    rhs_inf = float(_ball_integrals(traj, i, big, idx).min())
    tail = _tail_coefficient(constants, rho, e) * ((t - s) / rho ** theta) ** e
    denom = rhs_inf + tail
    gamma = 0.0 if lhs == 0 else (lhs / denom if denom > 0 else math.inf)
    return HarnackRecord(i, list(map(float, y)), rho, s, t, theta, lhs, rhs_inf, tail, gamma)


@dataclass
class PointwiseHarnackRecord(Record):
    component: int
    y: list
    rho: float
    s: float
    t: float
    theta: float
    lhs: float
    inf_integral: float
    integral_term: float
    tail_term: float
    gamma_fit: float


def pointwise_harnack(traj: Trajectory, i: int, y, rho: float, s: float, t: float,
                      exp: Exponents, constants: StructureConstants) -> PointwiseHarnackRecord:
    """Fit gamma in the sup bound over B_rho(y) x (s, t] by the integral of
    u^i over B_4rho(y) on (2s - t, t)."""
    theta, e = _harnack_setup(traj, i, exp, rho)
    if not s < t:
        raise ValueError("need s < t")
    n = traj.grid.dims
    big = Ball(tuple(y), 4.0 * rho)
    if not big.inside(traj.grid):
        raise ClippingError(f"B_4rho({tuple(y)}) with rho={rho} leaves the grid")
    _check_window(traj, 2.0 * s - t, t)
    top = traj.indices_in(s, t, open_lo=True)
    low = traj.indices_in(2.0 * s - t, t)
    if len(top) == 0:
        raise ClippingError(f"no snapshots in ({s}, {t}]")
    mask = Ball(tuple(y), rho).mask(traj.grid)
    lhs = max(float(traj.states[j][i][mask].max()) for j in top)
    inf_int = float(_ball_integrals(traj, i, big, low).min())

    C2, C4 = constants.C2, constants.C4
    dt = t - s
    geom = ((2.0 + (C2 + C4) * rho ** 2) ** ((n + 2) / theta)) * (dt + rho ** 2) ** ((n + 2) / theta)
    integral_term = geom / dt ** (2.0 * (n + 1) / theta) * inf_int ** (2.0 / theta)
    tail_term = (1.0 + geom / dt ** ((n + 2) / theta) * _tail_coefficient(constants, rho, e) ** (2.0 / theta)) \
        * (dt / rho ** 2) ** e
    denom = integral_term + tail_term
    gamma = 0.0 if lhs == 0 else (lhs / denom if denom > 0 else math.inf)
    return PointwiseHarnackRecord(i, list(map(float, y)), rho, s, t, theta, lhs, inf_int,
                                  integral_term, tail_term, gamma)


def weighted_gradient_energy(traj: Trajectory, i: int, coupler: Coupler, exp: Exponents,
                             alpha: Optional[float] = None) -> Series:
    """int U^{m-1} (u^i)^{alpha-1} |grad u^i|^2 dx per snapshot, evaluated on
    faces with face-averaged weights. ``alpha`` defaults to the midpoint of
    (max(-1, -m_i), 0)."""
    m_i = derive(exp).m_i[i]
    if alpha is None:
        lo = max(-1.0, -m_i)
        alpha = 0.5 * lo
    grid = traj.grid
    vals = []
    for s in traj.states:
        U = field_U(s, coupler)
        u = s[i]
        total = 0.0
        for axis, g in enumerate(face_gradient(u, grid)):
            Ub = face_average(U, grid, axis)
            ub = face_average(u, grid, axis)
            ok = (ub > 0) & (Ub > 0)
            w = np.zeros_like(g)
            w[ok] = Ub[ok] ** (exp.m - 1.0) * ub[ok] ** (alpha - 1.0)
            total += float((w * g * g).sum())
        vals.append(total * grid.cell_volume)
    return Series(f"weighted_gradient_{i + 1}", list(traj.times), vals)


# ---------------------------------------------------------------------------
# intrinsic cylinders
# ---------------------------------------------------------------------------


def _cylinder_values(traj: Trajectory, i: int, center, R: float, t0: float, depth: float):
    """Cell values of u^i on B_R(center) x (t0 - depth, t0]; always includes
    the snapshot at t0."""
    lo = t0 - depth
    if lo < traj.times[0] - 1e-12 * max(1.0, abs(lo)):
        raise ClippingError(
            f"cylinder needs t in [{lo:.17g}, {t0:.17g}], trajectory covers "
            f"[{traj.times[0]:.17g}, {traj.times[-1]:.17g}]")
    idx = traj.indices_in(lo, t0, open_lo=True)
    mask = Ball(tuple(center), R).mask(traj.grid)
    if not mask.any():
        raise ClippingError(f"ball of radius {R} at {tuple(center)} holds no cell centers")
    return np.stack([traj.states[j][i][mask] for j in idx]), idx


def _osc(v) -> float:
    return float(v.max() - v.min())


@dataclass
class OscillationRecord(Record):
    component: int
    point: list
    t0: float
    R: float
    epsilon: float
    omega: list
    omega_M: float
    theta: float
    alpha0: float
    depth: float
    parent_depth: float
    scaling_condition: bool
    osc: float
    lower_fraction: float
    upper_level_fractions: list
    degenerate: bool
    clipped: bool


def oscillation_probe(traj: Trajectory, i: int, point, R: float, exp: Exponents,
                      t0: Optional[float] = None, epsilon: float = 0.1,
                      s_max: int = 8) -> OscillationRecord:
    """Oscillations over the parent cylinder B_R x (-R^{2-eps}, 0] around
    (point, t0), then statistics of u^i on the intrinsic cylinder
    B_R x (-theta^{-alpha0} R^2, 0] with theta = omega_M / 4.

    Levels are measured from the parent infimum of u^i. ``upper_level_fractions``
    holds, for s = 1..s_max, the largest per-slice share of B_R where
    u^i exceeds (1 - 2^-s) omega_M.
    """
    t0 = traj.times[-1] if t0 is None else float(t0)
    alpha0 = derive(exp).alpha0[i]
    clipped = not Ball(tuple(point), R).inside(traj.grid)
    parent_depth = R ** (2.0 - epsilon)
    omega = []
    for c in range(traj.k):
        v, _ = _cylinder_values(traj, c, point, R, t0, parent_depth)
        omega.append(_osc(v))
    omega_M = max(omega)
    v_parent, _ = _cylinder_values(traj, i, point, R, t0, parent_depth)
    mu_minus = float(v_parent.min())
    if omega_M == 0:
        return OscillationRecord(i, list(map(float, point)), t0, R, epsilon, omega, 0.0, 0.0, alpha0,
                                 parent_depth, parent_depth, False, 0.0, 1.0, [0.0] * s_max, True, clipped)
    theta = omega_M / 4.0
    depth = theta ** (-alpha0) * R * R
    scaling = theta ** alpha0 > R ** epsilon
    v, _ = _cylinder_values(traj, i, point, R, t0, depth)
    rel = v - mu_minus
    lower = float(np.count_nonzero(rel < omega_M / 2.0)) / rel.size
    upper = []
    for s in range(1, s_max + 1):
        level = (1.0 - 2.0 ** (-s)) * omega_M
        upper.append(float((rel > level).mean(axis=1).max()))
    return OscillationRecord(i, list(map(float, point)), t0, R, epsilon, omega, omega_M, theta, alpha0,
                             depth, parent_depth, bool(scaling), _osc(v), lower, upper, False, clipped)


@dataclass
class OscillationDecay(Record):
    component: int
    point: list
    t0: float
    radii: list
    depths: list
    omegas: list
    ratios: list
    max_ratio: float
    exact_continuity: bool
    intrinsic_capped: list = field(default_factory=list)


def oscillation_decay(traj: Trajectory, i: int, point, R0: float, levels: int, exp: Exponents,
                      t0: Optional[float] = None, epsilon: float = 0.1) -> OscillationDecay:
    """Halve the radius ``levels`` times. Each cylinder has depth
    min(theta^{-alpha0} R^2, R^{2-eps}, previous depth), with theta a quarter
    of the previous oscillation (of all components over the parent cylinder
    at the start), so the cylinders are nested. Reports omega_n and
    sigma_n = omega_{n+1} / omega_n."""
    t0 = traj.times[-1] if t0 is None else float(t0)
    alpha0 = derive(exp).alpha0[i]
    R = R0
    prev_depth = R0 ** (2.0 - epsilon)
    omega_M = 0.0
    for c in range(traj.k):
        v, _ = _cylinder_values(traj, c, point, R0, t0, prev_depth)
        omega_M = max(omega_M, _osc(v))
    theta = omega_M / 4.0
    radii, depths, omegas, capped = [], [], [], []
    exact = False
    for _ in range(levels + 1):
        intrinsic = theta ** (-alpha0) * R * R if theta > 0 else math.inf
        depth = min(intrinsic, R ** (2.0 - epsilon), prev_depth)
        v, _ = _cylinder_values(traj, i, point, R, t0, depth)
        w = _osc(v)
        radii.append(R)
        depths.append(depth)
        omegas.append(w)
        capped.append(bool(depth < intrinsic))
        if w == 0:
            exact = True
            break
        theta = w / 4.0
        prev_depth = depth
        R /= 2.0
    ratios = [omegas[j + 1] / omegas[j] for j in range(len(omegas) - 1)]
    return OscillationDecay(i, list(map(float, point)), t0, radii, depths, omegas, ratios,
                            max(ratios) if ratios else 0.0, exact, capped)
