"""Uniform cell-centered grids in one or two dimensions, flux-form stencils,
region selection and the snapshot/trajectory file format."""
from __future__ import annotations

import enum
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class BC(enum.IntEnum):
    ZERO_FLUX = 0
    DIRICHLET_ZERO = 1
    PERIODIC = 2

    @classmethod
    def parse(cls, name) -> "BC":
        if isinstance(name, BC):
            return name
        key = str(name).strip().lower().replace("-", "_")
        table = {
            "zeroflux": cls.ZERO_FLUX, "zero_flux": cls.ZERO_FLUX, "neumann": cls.ZERO_FLUX,
            "dirichletzero": cls.DIRICHLET_ZERO, "dirichlet_zero": cls.DIRICHLET_ZERO, "dirichlet": cls.DIRICHLET_ZERO,
            "periodic": cls.PERIODIC,
        }
        if key not in table:
            raise ValueError(f"unknown boundary condition {name!r}")
        return table[key]

    @property
    def label(self) -> str:
        return {0: "ZeroFlux", 1: "DirichletZero", 2: "Periodic"}[int(self)]


@dataclass(frozen=True)
class Grid:
    extent: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]
    bc: BC = BC.ZERO_FLUX

    def __post_init__(self):
        object.__setattr__(self, "extent", tuple((float(a), float(b)) for a, b in self.extent))
        object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))
        object.__setattr__(self, "bc", BC.parse(self.bc))
        if len(self.extent) != len(self.cells) or len(self.cells) not in (1, 2):
            raise ValueError("grid must be 1-D or 2-D with matching extent and cells")
        for (a, b), c in zip(self.extent, self.cells):
            if not b > a:
                raise ValueError(f"empty extent [{a}, {b}]")
            if c < 4:
                raise ValueError("need at least 4 cells per axis")

    @classmethod
    def box(cls, lo: float, hi: float, cells: int, dims: int = 1, bc=BC.ZERO_FLUX) -> "Grid":
        return cls(((lo, hi),) * dims, (cells,) * dims, bc)

    @property
    def dims(self) -> int:
        return len(self.cells)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((b - a) / c for (a, b), c in zip(self.extent, self.cells))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.extent]))

    def axis_centers(self, axis: int) -> np.ndarray:
        a, _ = self.extent[axis]
        h = self.h[axis]
        return a + h * (np.arange(self.cells[axis]) + 0.5)

    def axis_faces(self, axis: int) -> np.ndarray:
        a, _ = self.extent[axis]
        return a + self.h[axis] * np.arange(self.cells[axis] + 1)

    def centers(self) -> np.ndarray:
        """Cell-center coordinates, shape (*cells, dims)."""
        axes = [self.axis_centers(d) for d in range(self.dims)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def face_centers(self, axis: int) -> np.ndarray:
        """Coordinates of the faces normal to ``axis``, shape (*face_shape, dims)."""
        axes = [self.axis_faces(d) if d == axis else self.axis_centers(d) for d in range(self.dims)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def face_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.cells)
        s[axis] += 1
        return tuple(s)

    def to_dict(self) -> dict:
        return {
            "dims": self.dims,
            "extent": [list(e) for e in self.extent],
            "cells": list(self.cells),
            "h": list(self.h),
            "bc": self.bc.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(tuple(tuple(e) for e in d["extent"]), tuple(d["cells"]), BC.parse(d["bc"]))


# ---------------------------------------------------------------------------
# stencils
# ---------------------------------------------------------------------------


def pad(f: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """One ghost layer on each side of ``axis`` according to the boundary
    condition (edge copy, reflected-negated, or wrap)."""
    widths = [(0, 0)] * f.ndim
    widths[axis] = (1, 1)
    if grid.bc == BC.PERIODIC:
        return np.pad(f, widths, mode="wrap")
    g = np.pad(f, widths, mode="edge")
    if grid.bc == BC.DIRICHLET_ZERO:
        lo = [slice(None)] * f.ndim
        hi = [slice(None)] * f.ndim
        lo[axis] = slice(0, 1)
        hi[axis] = slice(-1, None)
        g[tuple(lo)] *= -1
        g[tuple(hi)] *= -1
    return g


def face_gradient(f: np.ndarray, grid: Grid) -> list[np.ndarray]:
    """Normal differences (f_right - f_left)/h on every face, one array per
    axis of shape ``grid.face_shape(axis)``."""
    out = []
    for axis in range(grid.dims):
        h = grid.h[axis]
        g = np.diff(pad(f, grid, axis), axis=axis) / h
        if grid.bc == BC.ZERO_FLUX:
            _zero_ends(g, axis)
        out.append(g)
    return out


def tangential_gradient(f: np.ndarray, grid: Grid, axis: int) -> list[np.ndarray]:
    """Full gradient vector on the faces normal to ``axis``: the normal
    component is the two-point difference, the others average the centered
    differences of the two adjacent cells."""
    comps = []
    for d in range(grid.dims):
        if d == axis:
            comps.append(np.diff(pad(f, grid, axis), axis=axis) / grid.h[axis])
            continue
        g = pad(f, grid, d)
        hi = [slice(None)] * f.ndim
        lo = [slice(None)] * f.ndim
        hi[d] = slice(2, None)
        lo[d] = slice(0, -2)
        centered = (g[tuple(hi)] - g[tuple(lo)]) / (2.0 * grid.h[d])
        c = pad(centered, grid, axis)
        a = [slice(None)] * f.ndim
        b = [slice(None)] * f.ndim
        a[axis] = slice(0, -1)
        b[axis] = slice(1, None)
        comps.append(0.5 * (c[tuple(a)] + c[tuple(b)]))
    return comps


def face_average(f: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    g = pad(f, grid, axis)
    a = [slice(None)] * f.ndim
    b = [slice(None)] * f.ndim
    a[axis] = slice(0, -1)
    b[axis] = slice(1, None)
    return 0.5 * (g[tuple(a)] + g[tuple(b)])


def _zero_ends(g: np.ndarray, axis: int) -> None:
    idx = [slice(None)] * g.ndim
    idx[axis] = 0
    g[tuple(idx)] = 0.0
    idx[axis] = -1
    g[tuple(idx)] = 0.0


def divergence(F: Sequence[np.ndarray], grid: Grid) -> np.ndarray:
    """Cell divergence of face fluxes: sum over axes of (F_{i+1/2} - F_{i-1/2})/h.
    Sums over the grid telescope to the boundary faces."""
    out = np.zeros(grid.shape)
    for axis, Fa in enumerate(F):
        out += np.diff(Fa, axis=axis) / grid.h[axis]
    return out


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def mask(self, grid: Grid) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        d2 = ((grid.centers() - c) ** 2).sum(axis=-1)
        return d2 <= self.radius ** 2

    def inside(self, grid: Grid) -> bool:
        return all(a <= c - self.radius and c + self.radius <= b
                   for (a, b), c in zip(grid.extent, self.center))


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def mask(self, grid: Grid) -> np.ndarray:
        x = grid.centers()
        return np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=-1)


@dataclass(frozen=True)
class Cylinder:
    """(x0, t0) + B_R x (-depth, 0]."""

    center: tuple[float, ...]
    t0: float
    radius: float
    depth: float
    clipped: bool = False

    def __post_init__(self):
        if not (self.radius > 0 and self.depth > 0):
            raise ValueError("cylinder needs positive radius and depth")

    @property
    def ball(self) -> Ball:
        return Ball(tuple(self.center), self.radius)

    def clip(self, grid: Grid, t_min: float) -> "Cylinder":
        clipped = self.clipped or not self.ball.inside(grid) or self.t0 - self.depth < t_min
        depth = min(self.depth, self.t0 - t_min) if self.t0 - self.depth < t_min else self.depth
        return Cylinder(self.center, self.t0, self.radius, depth, clipped)


def _mask(grid: Grid, region) -> np.ndarray:
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    if isinstance(region, np.ndarray):
        return region
    return region.mask(grid)


def integrate(f: np.ndarray, grid: Grid, region=None) -> float:
    """Midpoint rule over cells whose centers lie in ``region``."""
    if region is None:
        return float(f.sum() * grid.cell_volume)
    mask = _mask(grid, region)
    if not mask.any():
        warnings.warn("integration region contains no cell centers", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(f[mask].sum() * grid.cell_volume)


def extrema(f: np.ndarray, grid: Grid, region=None) -> tuple[float, float]:
    mask = _mask(grid, region)
    if not mask.any():
        raise ValueError("extrema over an empty region")
    vals = f[mask]
    return float(vals.min()), float(vals.max())


def boundary_layer_mask(grid: Grid) -> np.ndarray:
    """Cells adjacent to the domain boundary."""
    m = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dims):
        idx = [slice(None)] * grid.dims
        idx[axis] = [0, -1]
        m[tuple(idx)] = True
    return m


# ---------------------------------------------------------------------------
# state, trajectory, files
# ---------------------------------------------------------------------------


@dataclass
class StateVector:
    grid: Grid
    u: np.ndarray  # shape (k, *cells)
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim == self.grid.dims:
            self.u = self.u[None]
        if self.u.shape[1:] != self.grid.shape:
            raise ValueError(f"field shape {self.u.shape[1:]} does not match grid {self.grid.shape}")

    @property
    def k(self) -> int:
        return self.u.shape[0]

    def copy(self) -> "StateVector":
        return StateVector(self.grid, self.u.copy(), self.t)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(path, state: StateVector) -> None:
    """JSON header line, then one CSV block per component (``# u<i>`` line
    followed by row-major rows along the last axis)."""
    meta = dict(state.grid.to_dict(), k=state.k, time=fmt(state.t))
    lines = [json.dumps(meta, sort_keys=True)]
    nlast = state.grid.cells[-1]
    for i in range(state.k):
        lines.append(f"# u{i + 1}")
        rows = state.u[i].reshape(-1, nlast)
        lines.extend(",".join(fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> StateVector:
    text = Path(path).read_text().splitlines()
    meta = json.loads(text[0])
    grid = Grid.from_dict(meta)
    k = int(meta["k"])
    blocks: list[list[list[float]]] = []
    for line in text[1:]:
        if line.startswith("#"):
            blocks.append([])
        elif line.strip():
            blocks[-1].append([float(v) for v in line.split(",")])
    if len(blocks) != k:
        raise ValueError(f"expected {k} component blocks, found {len(blocks)}")
    u = np.array([np.asarray(b).reshape(grid.shape) for b in blocks])
    return StateVector(grid, u, float(meta["time"]))


@dataclass
class Trajectory:
    grid: Grid
    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    ledger: Optional[dict] = None

    def append(self, state: StateVector) -> None:
        if self.times and state.t < self.times[-1]:
            raise ValueError("trajectory times must be nondecreasing")
        self.times.append(float(state.t))
        self.states.append(np.array(state.u, dtype=float, copy=True))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def k(self) -> int:
        return self.states[0].shape[0]

    def state(self, idx: int) -> StateVector:
        return StateVector(self.grid, self.states[idx], self.times[idx])

    def time_array(self) -> np.ndarray:
        return np.asarray(self.times)

    def indices_in(self, t_lo: float, t_hi: float, open_lo: bool = False) -> np.ndarray:
        t = self.time_array()
        tol = 1e-12 * max(1.0, abs(t_hi))
        lo_ok = t > t_lo + tol if open_lo else t >= t_lo - tol
        return np.nonzero(lo_ok & (t <= t_hi + tol))[0]

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for idx in range(len(self)):
            write_snapshot(d / f"snap_{idx}.csv", self.state(idx))
        meta = dict(self.meta)
        meta["times"] = [fmt(t) for t in self.times]
        meta["grid"] = self.grid.to_dict()
        meta["k"] = self.k
        (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        if self.ledger is not None:
            write_ledger(d / "ledger.csv", self.ledger)
        return d

    @classmethod
    def load(cls, directory) -> "Trajectory":
        d = Path(directory)
        meta = json.loads((d / "meta.json").read_text())
        grid = Grid.from_dict(meta["grid"])
        traj = cls(grid, meta={k: v for k, v in meta.items() if k not in ("times", "grid", "k")})
        for idx in range(len(meta["times"])):
            traj.append(read_snapshot(d / f"snap_{idx}.csv"))
        return traj


def write_ledger(path, ledger: dict) -> None:
    cols = list(ledger.keys())
    nrows = len(ledger[cols[0]])
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in range(nrows):
            vals = []
            for c in cols:
                v = ledger[c][r]
                vals.append(str(int(v)) if c == "step" else fmt(v))
            fh.write(",".join(vals) + "\n")


def artifact_root() -> Path:
    return Path(os.environ.get("DEGENFLOW_OUT", "degenflow_out"))


def ball_volume(n: int, r: float) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n
