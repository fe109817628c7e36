"""Run an experiment end to end: validate the structure, simulate, evaluate
the requested checks and write every artifact under one directory."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .. import diagnostics as dg
from ..grid import Grid, StateVector, Trajectory, artifact_root, fmt, read_snapshot
from ..model import (
    RegimeError,
    classify_regime,
    generate_samples,
    validate_structure,
)
from ..oracles import BarenblattParams, barenblatt_value
from ..solver import NumericalBlowup, simulate
from .config import CheckSpec, ConfigError, ExperimentConfig, parse_floats, parse_points, load_config

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_STRUCTURE = 3
EXIT_BLOWUP = 4

PASS, FAIL, MEASURED = "PASS", "FAIL", "MEASURED"


def load_thresholds() -> dict:
    return json.loads(resources.files("degenflow").joinpath("thresholds.json").read_text())


@dataclass
class CheckResult:
    name: str
    kind: str
    status: str
    value: object = None
    threshold: object = None
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        val = fmt(self.value) if isinstance(self.value, float) else str(self.value)
        thr = "" if self.threshold is None else f" (threshold {fmt(self.threshold) if isinstance(self.threshold, float) else self.threshold})"
        return f"{self.status:8s} {self.name}: {val}{thr}"


@dataclass
class RunResult:
    config: ExperimentConfig
    exit_code: int
    checks: list[CheckResult]
    trajectory: Optional[Trajectory]
    out_dir: Optional[Path]
    elapsed: float
    message: str = ""


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


def _per_component(values: list[float], k: int, what: str) -> np.ndarray:
    if len(values) == 1:
        return np.full(k, values[0])
    if len(values) != k:
        raise ConfigError(f"{what} needs 1 or k={k} entries")
    return np.asarray(values)


def _center(opts: dict, dims: int) -> np.ndarray:
    c = parse_floats(opts.get("center", ",".join(["0"] * dims)))
    if len(c) != dims:
        raise ConfigError("initial center needs one coordinate per grid axis")
    return np.asarray(c)


def _profile(kind: str, opts: dict, grid: Grid, t_start: float, m: float) -> np.ndarray:
    """Scalar profile on the grid for the analytic kinds."""
    x = grid.centers() - _center(opts, grid.dims)
    r2 = (x * x).sum(axis=-1)
    if kind == "gaussian":
        w = float(opts.get("width", 1.0))
        return np.exp(-r2 / (2.0 * w * w))
    if kind == "bump":
        R = float(opts.get("radius", 1.0))
        return np.maximum(1.0 - r2 / (R * R), 0.0) ** 2
    if kind == "barenblatt":
        params = BarenblattParams(m, grid.dims, float(opts.get("mass", 1.0)))
        return barenblatt_value(x, barenblatt_time(opts, t_start), params)
    raise ConfigError(f"{kind!r} is not an analytic profile")


def barenblatt_time(opts: dict, t_start: float) -> float:
    tau = float(opts.get("time", t_start))
    if tau <= 0:
        raise ConfigError("barenblatt initial data needs a positive time")
    return tau


def initial_state(cfg: ExperimentConfig, grid: Optional[Grid] = None) -> StateVector:
    """Build the initial data described by the ``[initial]`` section."""
    try:
        return _initial_state(cfg, grid or cfg.grid)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad [initial] section: {exc}") from None


def _initial_state(cfg: ExperimentConfig, grid: Grid) -> StateVector:
    opts = cfg.initial
    k = cfg.exponents.k
    kind = opts["kind"]
    if kind == "file":
        state = read_snapshot(opts["path"])
        if state.grid != grid or state.k != k:
            raise ConfigError("initial file does not match the configured grid or k")
        u = state.u
    elif kind == "proportional":
        w = _per_component(parse_floats(opts["weights"]), k, "weights")
        base = opts.get("base", "bump")
        scale = float(opts.get("height", 1.0)) if base != "barenblatt" else 1.0
        v = scale * _profile(base, opts, grid, cfg.t_start, cfg.exponents.m)
        u = w.reshape((-1,) + (1,) * grid.dims) * v[None]
    else:
        if kind == "barenblatt" and k != 1:
            raise ConfigError("barenblatt initial data is scalar; use kind = proportional for k > 1")
        heights = _per_component(parse_floats(opts.get("height", "1")), k, "height")
        v = _profile(kind, opts, grid, cfg.t_start, cfg.exponents.m)
        u = heights.reshape((-1,) + (1,) * grid.dims) * v[None]
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise ConfigError("initial data must be finite and nonnegative")
    return StateVector(grid, u, cfg.t_start)


def with_cells(cfg: ExperimentConfig, cells: int) -> Grid:
    g = cfg.grid
    return Grid(g.extent, (int(cells),) * g.dims, g.bc)


def simulate_config(cfg: ExperimentConfig, grid: Optional[Grid] = None, **overrides) -> Trajectory:
    solver = dataclasses.replace(cfg.solver, **overrides) if overrides else cfg.solver
    init = initial_state(cfg, grid)
    return simulate(init, solver, cfg.build_flux(), cfg.build_drift(), cfg.build_coupler(),
                    cfg.exponents, meta={"experiment": cfg.name})


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def _threshold(opts: CheckSpec, thresholds: dict, default_key: str) -> float:
    key = opts.get("threshold", default_key)
    if key not in thresholds:
        raise ConfigError(f"unknown threshold {key!r}")
    return float(thresholds[key])


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


def _check_mass(opts, cfg, traj, thr, extra):
    tol = _threshold(opts, thr, "mass_drift_conservative")
    series = [dg.mass_series(traj, i) for i in range(traj.k)]
    drift = max(s.max_drift for s in series)
    extra["series"] += series
    return CheckResult(opts.name, opts.kind, _status(drift <= tol), drift, tol,
                       {"per_component": [s.max_drift for s in series],
                        "relative": all(s.relative for s in series)})


def _check_clipped(opts, cfg, traj, thr, extra):
    tol = _threshold(opts, thr, "clipped_mass_fraction")
    run = traj
    if not cfg.solver.clip_negative:
        run = simulate_config(cfg, clip_negative=True)
    m0 = float(np.sum(run.states[0])) * run.grid.cell_volume
    clipped = float(sum(run.meta["clipped_mass"]))
    frac = clipped / m0 if m0 > 0 else clipped
    return CheckResult(opts.name, opts.kind, _status(frac <= tol), frac, tol,
                       {"clipped_mass": clipped, "initial_mass": m0, "rerun_with_clipping": run is not traj})


def _check_boundary(opts, cfg, traj, thr, extra):
    tol = _threshold(opts, thr, "boundary_mass_fraction")
    frac = dg.boundary_mass_fraction(traj)
    return CheckResult(opts.name, opts.kind, _status(frac < tol), frac, tol)


def _check_sup(opts, cfg, traj, thr, extra):
    tol = _threshold(opts, thr, "sup_monotone_tolerance")
    series = dg.sup_U_series(traj, cfg.build_coupler())
    extra["series"].append(series)
    inc = series.max_increase(start=int(opts.number("start", 0)))
    return CheckResult(opts.name, opts.kind, _status(inc <= tol), inc, tol)


def _check_k_hat(opts, cfg, traj, thr, extra):
    tol = _threshold(opts, thr, "k_hat_rate_relative")
    series = dg.sup_U_series(traj, cfg.build_coupler())
    t0s = opts.floats("t0")
    khat = [series.K_hat(t) for t in t0s]
    rate, amp = dg.fit_power_law(t0s, khat)
    n, m = cfg.grid.dims, cfg.exponents.m
    alpha = n / (n * (m - 1.0) + 2.0)
    rel = abs(rate - alpha) / alpha
    return CheckResult(opts.name, opts.kind, _status(rel <= tol), rel, tol,
                       {"t0": t0s, "K_hat": khat, "rate": rate, "expected_rate": alpha, "amplitude": amp})


def _check_oracle(opts, cfg, traj, thr, extra):
    order_min = _threshold(opts, thr, "oracle_order_min")
    err_max = float(thr[opts.get("error_threshold", "oracle_final_l1_per_mass")])
    if cfg.initial["kind"] != "barenblatt":
        raise ConfigError("oracle_convergence needs barenblatt initial data")
    mass = float(cfg.initial.get("mass", 1.0))
    params = BarenblattParams(cfg.exponents.m, cfg.grid.dims, mass)
    shift = barenblatt_time(cfg.initial, cfg.t_start) - cfg.t_start
    cells = [int(c) for c in opts.floats("cells", [cfg.grid.cells[0]])]
    errors = []
    for c in cells:
        run = traj if c == cfg.grid.cells[0] else simulate_config(cfg, with_cells(cfg, c))
        exact = barenblatt_value(run.grid.centers(), run.times[-1] + shift, params)
        errors.append(float(np.abs(run.states[-1][0] - exact).sum() * run.grid.cell_volume))
    orders = [math.log2(errors[j] / errors[j + 1]) for j in range(len(errors) - 1)]
    final = errors[-1] / mass
    ok = all(o >= order_min for o in orders) and final <= err_max
    return CheckResult(opts.name, opts.kind, _status(ok), min(orders) if orders else None, order_min,
                       {"cells": cells, "l1_errors": errors, "orders": orders,
                        "final_error_per_mass": final, "final_error_threshold": err_max})


def _check_proportional(opts, cfg, traj, thr, extra):
    tol = _threshold(opts, thr, "proportional_relative")
    if cfg.initial["kind"] != "proportional":
        raise ConfigError("proportional check needs proportional initial data")
    w = _per_component(parse_floats(cfg.initial["weights"]), traj.k, "weights")
    sup0 = float(np.max(traj.states[0].sum(axis=0)))
    dev = 0.0
    for u in traj.states:
        total = u.sum(axis=0)
        dev = max(dev, float(np.max(np.abs(u - w.reshape((-1,) + (1,) * traj.grid.dims) * total[None]))))
    rel = dev / sup0 if sup0 > 0 else dev
    return CheckResult(opts.name, opts.kind, _status(rel <= tol), rel, tol, {"max_deviation": dev})


def _check_harnack(opts, cfg, traj, thr, extra):
    tol = _threshold(opts, thr, "harnack_refinement_relative")
    i = int(opts.number("component", 0))
    pts = parse_points(opts.get("points"), cfg.grid.dims)
    rho, s, t = opts.number("rho"), opts.number("s"), opts.number("t")
    cells = [int(c) for c in opts.floats("cells", [cfg.grid.cells[0]])]
    constants = cfg.build_flux().constants
    gammas = {}
    records = []
    for c in cells:
        run = traj if c == cfg.grid.cells[0] else simulate_config(cfg, with_cells(cfg, c))
        row = []
        for p in pts:
            rec = dg.harnack_ratio(run, i, p, rho, s, t, cfg.exponents, constants)
            records.append({"cells": c, **rec.to_dict()})
            row.append(rec.gamma_fit)
        gammas[c] = row
    finite = all(math.isfinite(g) for row in gammas.values() for g in row)
    variation = 0.0
    if len(cells) > 1:
        fine = gammas[cells[-1]]
        for c in cells[:-1]:
            for a, b in zip(gammas[c], fine):
                variation = max(variation, abs(a - b) / abs(b) if b else (0.0 if a == b else math.inf))
    ok = finite and (variation <= tol if len(cells) > 1 else True)
    status = _status(ok) if len(cells) > 1 else (MEASURED if finite else FAIL)
    extra["records"][opts.name] = records
    return CheckResult(opts.name, opts.kind, status, variation, tol,
                       {"cells": cells, "gamma_fit": {str(c): g for c, g in gammas.items()}, "finite": finite})


def _check_oscillation(opts, cfg, traj, thr, extra):
    tol = _threshold(opts, thr, "oscillation_max_ratio")
    i = int(opts.number("component", 0))
    pts = parse_points(opts.get("points"), cfg.grid.dims)
    R0 = opts.number("R0")
    levels = int(opts.number("levels", 5))
    eps = opts.number("epsilon", 0.1)
    t0 = float(opts.get("t0", traj.times[-1]))
    decays = [dg.oscillation_decay(traj, i, p, R0, levels, cfg.exponents, t0, eps) for p in pts]
    ratios = [r for d in decays for r in d.ratios]
    worst = max(ratios) if ratios else 0.0
    ok = all(r < 1.0 for r in ratios) and worst <= tol
    extra["records"][opts.name] = [d.to_dict() for d in decays]
    return CheckResult(opts.name, opts.kind, _status(ok), worst, tol,
                       {"points": [list(p) for p in pts], "max_ratio_per_point": [d.max_ratio for d in decays],
                        "exact_continuity": [d.exact_continuity for d in decays]})


def _check_truncation(opts, cfg, traj, thr, extra):
    coupler = cfg.build_coupler()
    sup = max(dg.sup_U_series(traj, coupler).values)
    K_spec = opts.get("K", "auto")
    auto = str(K_spec).strip().lower() == "auto"
    K = max(2.0 * sup, 2.0 + 1e-9) if auto else float(K_spec)
    t0 = opts.number("t0")
    jmax = int(opts.number("jmax", 4))
    rec = dg.truncation_energy(traj, coupler, K, t0, jmax, cfg.exponents.m)
    extra["records"][opts.name] = rec.to_dict()
    if auto:
        vanish = all(a == 0.0 for a in rec.energies[1:])
        return CheckResult(opts.name, opts.kind, _status(vanish), max(rec.energies[1:], default=0.0), 0.0,
                           {"K": K, "energies": rec.energies, "resolved": rec.resolved})
    return CheckResult(opts.name, opts.kind, MEASURED, rec.energies, None,
                       {"K": K, "resolved": rec.resolved})


CHECKS = {
    "mass_conservation": _check_mass,
    "clipped_mass": _check_clipped,
    "boundary_guard": _check_boundary,
    "sup_monotone": _check_sup,
    "k_hat_rate": _check_k_hat,
    "oracle_convergence": _check_oracle,
    "proportional": _check_proportional,
    "harnack": _check_harnack,
    "oscillation_decay": _check_oscillation,
    "truncation": _check_truncation,
}


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def validation_report(cfg: ExperimentConfig):
    samples = generate_samples(cfg.exponents, cfg.validation_samples, cfg.seed)
    return validate_structure(cfg.build_flux(), cfg.build_drift(), cfg.build_coupler(), cfg.exponents, samples)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(dg._jsonable(obj), indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, out_dir=None, thresholds: Optional[dict] = None) -> RunResult:
    thr = thresholds or load_thresholds()
    out = Path(out_dir) if out_dir is not None else artifact_root() / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.to_ini())
    start = time.perf_counter()

    regime = classify_regime(cfg.exponents, cfg.build_flux().constants)
    _write_json(out / "regime.json", {"checks": [dataclasses.asdict(c) for c in regime.checks]})
    try:
        report = validation_report(cfg)
    except RegimeError as err:
        msg = f"structure rejected: {err}"
        (out / "summary.txt").write_text(msg + "\n")
        return RunResult(cfg, EXIT_STRUCTURE, [], None, out, time.perf_counter() - start, msg)
    (out / "validation.json").write_text(report.to_json() + "\n")
    if not report.passed and not cfg.waive_validation:
        failed = [r.condition for r in report.results if r.status == "fail"]
        msg = f"structure validation failed: {', '.join(failed)}"
        (out / "summary.txt").write_text(msg + "\n")
        return RunResult(cfg, EXIT_STRUCTURE, [], None, out, time.perf_counter() - start, msg)

    try:
        traj = simulate_config(cfg)
    except NumericalBlowup as err:
        if err.trajectory is not None:
            err.trajectory.save(out / "trajectory")
        msg = f"numerical blowup: {err}"
        (out / "summary.txt").write_text(msg + "\n")
        return RunResult(cfg, EXIT_BLOWUP, [], err.trajectory, out, time.perf_counter() - start, msg)
    traj.save(out / "trajectory")

    extra = {"series": [], "records": {}}
    results = []
    for opts in cfg.checks:
        results.append(CHECKS[opts.kind](opts, cfg, traj, thr, extra))
    elapsed = time.perf_counter() - start

    diag = out / "diagnostics"
    diag.mkdir(exist_ok=True)
    for s in extra["series"]:
        (diag / f"{s.name}.csv").write_text(s.to_csv())
    for name, rec in extra["records"].items():
        _write_json(diag / f"{name}.json", rec)

    summary = {
        "experiment": cfg.name,
        "steps": traj.meta.get("steps"),
        "backend": traj.meta.get("backend"),
        "snapshots": len(traj),
        "checks": [dataclasses.asdict(r) for r in results],
    }
    _write_json(out / "summary.json", summary)
    lines = [f"experiment {cfg.name}: {len(traj)} snapshots, {traj.meta.get('steps')} steps"]
    lines += [r.line() for r in results]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    code = EXIT_CHECK_FAILED if any(r.status == FAIL for r in results) else EXIT_OK
    return RunResult(cfg, code, results, traj, out, elapsed)


def run(config_path, out_dir=None) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as err:
        log.error("config error: %s", err)
        return EXIT_CONFIG
    try:
        return run_experiment(cfg, out_dir).exit_code
    except ConfigError as err:
        log.error("config error: %s", err)
        return EXIT_CONFIG


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------


@dataclass
class Comparison:
    norm: str
    times: list
    errors: list  # per snapshot, per component
    max_error: float
    nearest_snapshot: bool

    def to_csv(self) -> str:
        k = len(self.errors[0]) if self.errors else 0
        rows = ["t," + ",".join(f"error_{i + 1}" for i in range(k))]
        rows += [fmt(t) + "," + ",".join(fmt(v) for v in e) for t, e in zip(self.times, self.errors)]
        return "\n".join(rows) + "\n"


def compare(a: Trajectory, b: Trajectory, norm: str = "l1") -> Comparison:
    """Per-snapshot error between two trajectories on the same grid. When the
    snapshot times differ, each snapshot of ``a`` is matched with the nearest
    one of ``b`` and the result is flagged."""
    norm = norm.lower()
    if norm not in ("l1", "linf"):
        raise ValueError(f"norm must be l1 or linf, got {norm!r}")
    if a.grid != b.grid:
        raise ValueError("trajectories live on different grids")
    if a.k != b.k:
        raise ValueError("trajectories have different component counts")
    tb = b.time_array()
    exact = len(a) == len(b) and np.allclose(a.time_array(), tb, rtol=0, atol=1e-12)
    errors = []
    for j, (t, u) in enumerate(zip(a.times, a.states)):
        v = b.states[j] if exact else b.states[int(np.argmin(np.abs(tb - t)))]
        d = np.abs(u - v).reshape(a.k, -1)
        errors.append((d.sum(axis=1) * a.grid.cell_volume if norm == "l1" else d.max(axis=1)).tolist())
    worst = max((max(e) for e in errors), default=0.0)
    return Comparison(norm, list(a.times), errors, float(worst), not exact)
