"""Parameters, exponent bookkeeping, couplers, flux/drift laws and the
structure-condition validator for the generalized parabolic system

    (u^i)_t = div( m U^{m-1} A(grad u^i, u^i, x, t) + B(u^i, x, t) ),  i = 1..k.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class RegimeError(ValueError):
    """Exponents outside the range an operation is defined for."""


# ---------------------------------------------------------------------------
# exponents
# ---------------------------------------------------------------------------


class Regime(enum.Enum):
    NONDEGENERATE = "nondegenerate"  # m = 1
    DEGENERATE = "degenerate"  # m > 1
    SINGULAR = "singular"  # m < 1


@dataclass(frozen=True)
class Exponents:
    n: int
    k: int
    m: float
    beta: tuple[float, ...]
    lam: tuple[float, ...]
    q: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "lam", tuple(float(v) for v in self.lam))
        if self.n < 1 or self.k < 1:
            raise DomainError(f"need n >= 1 and k >= 1, got n={self.n}, k={self.k}")
        if self.m <= 0:
            raise DomainError(f"m must be positive, got {self.m}")
        if len(self.beta) != self.k or len(self.lam) != self.k:
            raise DomainError("beta and lam must have length k")
        if any(b < 0 for b in self.beta):
            raise DomainError(f"beta_i must be >= 0, got {self.beta}")
        if any(v <= 0 for v in self.lam):
            raise DomainError(f"lambda_i must be > 0, got {self.lam}")

    @classmethod
    def uniform(cls, n, k, m, beta=1.0, lam=1.0, q=None):
        return cls(n=n, k=k, m=m, beta=(beta,) * k, lam=(lam,) * k, q=q)

    @property
    def beta_star(self) -> float:
        return min(self.beta)


@dataclass(frozen=True)
class DerivedExponents:
    m_i: tuple[float, ...]
    theta_i: tuple[float, ...]
    alpha0: tuple[float, ...]
    regime: Regime


def derive(exp: Exponents) -> DerivedExponents:
    # alpha0 and theta_i are computed from m_i as m_i - 1 and n(m_i - 1) + 2,
    # so those two identities hold exactly in floating point.
    m_i = tuple(b * (exp.m - 1.0) + 1.0 for b in exp.beta)
    alpha0 = tuple(mi - 1.0 for mi in m_i)
    theta_i = tuple(exp.n * (mi - 1.0) + 2.0 for mi in m_i)
    if exp.m == 1:
        regime = Regime.NONDEGENERATE
    elif exp.m > 1:
        regime = Regime.DEGENERATE
    else:
        regime = Regime.SINGULAR
    return DerivedExponents(m_i=m_i, theta_i=theta_i, alpha0=alpha0, regime=regime)


def critical_exponent(n: int) -> float:
    """Critical porous-medium exponent (n-2)/n."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return (n - 2) / n


def q_upper_bound(m: float, n: int, beta_star: float) -> float:
    """Upper end of the admissible drift exponent range,
    (m(1 + (1+m)/(mn)) - 1) * beta_star + 1."""
    return (m * (1.0 + (1.0 + m) / (m * n)) - 1.0) * beta_star + 1.0


def singular_mass_range(n: int, homogeneous: bool = False) -> tuple[float, float]:
    """Open interval of effective exponents m_i < 1 for which each component
    keeps its mass in the singular range. ``homogeneous`` selects the wider
    interval available when C2 = C4 = 0."""
    if n < 2:
        raise DomainError("singular mass range needs n >= 2")
    if homogeneous:
        lower = (n * n - n + 3 + math.sqrt(7 * n * n + 2 * n - 7)) / (n * n + 2 * n + 4)
    else:
        lower = (n * n + n + 4 + math.sqrt(2 * n * (7 * n + 11))) / (n * n + 5 * n + 8)
    return lower, 1.0


@dataclass
class ApplicabilityCheck:
    result: str
    component: int
    applies: bool
    violated: list[str] = field(default_factory=list)


@dataclass
class RegimeReport:
    derived: DerivedExponents
    checks: list[ApplicabilityCheck]

    def applies(self, result: str, component: int = 0) -> bool:
        for c in self.checks:
            if c.result == result and c.component == component:
                return c.applies
        raise KeyError(result)

    def violations(self, result: str, component: int = 0) -> list[str]:
        for c in self.checks:
            if c.result == result and c.component == component:
                return c.violated
        raise KeyError(result)


def classify_regime(exp: Exponents, constants: Optional["StructureConstants"] = None) -> RegimeReport:
    """Per component, decide which results have their exponent hypotheses
    met. Keys: ``bound`` (uniform bound of U), ``mass_m1``,
    ``mass_degenerate`` and ``mass_singular`` (mass conservation for m = 1,
    m > 1 and m < 1) and ``continuity``.

    ``constants`` is used for the drift gate (C5) and for the wider
    homogeneous singular interval (C2 = C4 = 0). Without it the drift is
    taken as absent and the inhomogeneous interval is used.
    """
    d = derive(exp)
    n, m = exp.n, exp.m
    c5 = constants.C5 if constants is not None else 0.0
    homogeneous = constants is not None and constants.C2 == 0 and constants.C4 == 0
    qb = q_upper_bound(m, n, exp.beta_star)
    drift_on = c5 > 0

    checks = []
    for i, b in enumerate(exp.beta):
        bad = []
        if not m > critical_exponent(n):
            bad.append(f"m > (n-2)/n = {critical_exponent(n):.17g}")
        if drift_on and (exp.q is None or not 1 < exp.q < qb):
            bad.append(f"1 < q < {qb:.17g}")
        checks.append(ApplicabilityCheck("bound", i, not bad, bad))

        bad = []
        if n < 2:
            bad.append("n >= 2")
        if m != 1:
            bad.append("m = 1")
        if drift_on:
            bad.append("C5 = 0")
        checks.append(ApplicabilityCheck("mass_m1", i, not bad, bad))

        bad = []
        if n < 2:
            bad.append("n >= 2")
        lower = 1.0 if b == 0 else max(1.0, 2.0 - 1.0 / b)
        if not m > lower:
            bad.append(f"m > max(1, 2 - 1/beta_i) = {lower:.17g}")
        if drift_on:
            bad.append("C5 = 0")
        checks.append(ApplicabilityCheck("mass_degenerate", i, not bad, bad))

        bad = []
        if n < 2:
            bad.append("n >= 2")
            checks.append(ApplicabilityCheck("mass_singular", i, False, bad))
        else:
            lo, hi = singular_mass_range(n, homogeneous)
            if not m < 1:
                bad.append("0 < m < 1")
            if not lo < d.m_i[i] < hi:
                bad.append(f"{lo:.17g} < m_i < 1")
            if drift_on:
                bad.append("C5 = 0")
            checks.append(ApplicabilityCheck("mass_singular", i, not bad, bad))

        bad = []
        if n < 2:
            bad.append("n >= 2")
        if not m > 1:
            bad.append("m > 1")
        if drift_on:
            q_lo = 0.5 * (m - 1.0) * exp.beta_star + 1.0
            if exp.q is None or not q_lo < exp.q < qb:
                bad.append(f"C5 = 0 or {q_lo:.17g} < q < {qb:.17g}")
        checks.append(ApplicabilityCheck("continuity", i, not bad, bad))
    return RegimeReport(derived=d, checks=checks)


# ---------------------------------------------------------------------------
# couplers and the flux/drift laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureConstants:
    c: float = 1.0
    C1: float = 1.0
    C2: float = 0.0
    C3: float = 1.0
    C4: float = 0.0
    C5: float = 0.0

    def __post_init__(self):
        if not 0 < self.c <= 1:
            raise DomainError(f"coercivity constant must satisfy 0 < c <= 1, got {self.c}")
        for name in ("C1", "C2", "C3", "C4", "C5"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")

    def in_unit_band(self) -> list[str]:
        """Names of constants in the open band (0, 1); zero means 'term absent'."""
        return [nm for nm in ("C1", "C2", "C3", "C4", "C5") if 0 < getattr(self, nm) < 1]


class Coupler:
    """Diffusion controller U(u^1, ..., u^k).

    ``evaluate`` is vectorized: ``u`` has shape (k, ...) and the result is
    ``(U, dU)`` with shapes (...) and (k, ...).
    """

    name = "coupler"
    # Sobolev membership U^m U_{u^i} in H_0^1 cannot be sampled; it is carried
    # as a declaration and echoed in validation reports.
    declares_A1 = True
    # set when dU is constant, so grad U_{u^i} = 0 and (A3) reduces to 0 >= 0
    constant_partials = False

    def evaluate(self, u):
        raise NotImplementedError

    def value(self, u):
        return self.evaluate(u)[0]


class SumCoupler(Coupler):
    name = "sum"
    constant_partials = True

    def evaluate(self, u):
        u = np.asarray(u, dtype=float)
        return u.sum(axis=0), np.ones_like(u)

    def value(self, u):
        return np.asarray(u, dtype=float).sum(axis=0)


class EuclideanNormCoupler(Coupler):
    name = "euclidean"

    def evaluate(self, u):
        u = np.asarray(u, dtype=float)
        U = np.sqrt((u * u).sum(axis=0))
        safe = np.where(U > 0, U, 1.0)
        # partials are undefined at the origin; 0 keeps them nonnegative
        dU = np.where(U > 0, u / safe, 0.0)
        return U, dU

    def value(self, u):
        u = np.asarray(u, dtype=float)
        return np.sqrt((u * u).sum(axis=0))


class WeightedPowerCoupler(Coupler):
    """U = sum_i lam_i (u^i)^beta_i. Each term is bounded by U, and with k = 1
    this is the single-component law U = lam u^beta."""

    name = "weighted_power"

    def __init__(self, lam: Sequence[float], beta: Sequence[float]):
        self.lam = np.asarray(lam, dtype=float)
        self.beta = np.asarray(beta, dtype=float)

    def _shape(self, a, ndim):
        return a.reshape((-1,) + (1,) * (ndim - 1))

    def evaluate(self, u):
        u = np.asarray(u, dtype=float)
        lam = self._shape(self.lam, u.ndim)
        beta = self._shape(self.beta, u.ndim)
        terms = lam * np.power(u, beta)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dU = np.where(u > 0, beta * terms / np.where(u > 0, u, 1.0), 0.0)
        # beta = 1 has a finite partial at u = 0
        dU = np.where((u == 0) & (beta == 1), lam, dU)
        return terms.sum(axis=0), dU


class CustomCoupler(Coupler):
    name = "custom"

    def __init__(self, func: Callable, declares_A1: bool = True, name: str = "custom"):
        self.func = func
        self.declares_A1 = declares_A1
        self.name = name

    def evaluate(self, u):
        U, dU = self.func(np.asarray(u, dtype=float))
        return np.asarray(U, dtype=float), np.asarray(dU, dtype=float)


def make_coupler(kind: str, exp: Optional[Exponents] = None) -> Coupler:
    kind = kind.lower()
    if kind == "sum":
        return SumCoupler()
    if kind in ("euclidean", "euclidean_norm", "norm"):
        return EuclideanNormCoupler()
    if kind in ("weighted_power", "power"):
        if exp is None:
            raise DomainError("weighted_power coupler needs exponents")
        return WeightedPowerCoupler(exp.lam, exp.beta)
    raise DomainError(f"unknown coupler {kind!r}")


def compute_U(coupler: Coupler, u) -> tuple[float, np.ndarray]:
    """U and its partials at a single point u in R^k_+."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise DomainError("compute_U takes one point (a length-k vector)")
    if np.any(u < 0):
        raise DomainError(f"components must be nonnegative, got {u.tolist()}")
    U, dU = coupler.evaluate(u)
    return float(U), np.asarray(dU, dtype=float)


class FluxLaw:
    """A(p, z, x, t). ``p`` and ``x`` have shape (..., n), ``z`` shape (...);
    returns shape (..., n)."""

    constants = StructureConstants()

    def __call__(self, p, z, x, t):
        raise NotImplementedError


class ScaledRotationFlux(FluxLaw):
    """A = a p + b p_perp with p_perp = (-p_y, p_x); in 1-D the rotation
    vanishes. Coercive with c = a and bounded with C3 = sqrt(a^2 + b^2)."""

    def __init__(self, a: float = 1.0, b: float = 0.0, constants: Optional[StructureConstants] = None):
        self.a = float(a)
        self.b = float(b)
        if constants is None:
            constants = StructureConstants(
                c=min(max(self.a, 1e-300), 1.0),
                C3=math.hypot(self.a, self.b),
            )
        self.constants = constants

    def __call__(self, p, z, x, t):
        p = np.asarray(p, dtype=float)
        out = self.a * p
        if self.b != 0 and p.shape[-1] == 2:
            perp = np.stack([-p[..., 1], p[..., 0]], axis=-1)
            out = out + self.b * perp
        return out


class IdentityFlux(ScaledRotationFlux):
    def __init__(self):
        super().__init__(1.0, 0.0, StructureConstants(c=1.0, C1=1.0, C2=0.0, C3=1.0, C4=0.0, C5=0.0))


class CustomFlux(FluxLaw):
    def __init__(self, func: Callable, constants: StructureConstants):
        self.func = func
        self.constants = constants

    def __call__(self, p, z, x, t):
        return np.asarray(self.func(p, z, x, t), dtype=float)


class DriftLaw:
    """B(z, x, t) with ``z`` shape (...) and ``x`` shape (..., n)."""

    C5 = 0.0
    q: Optional[float] = None

    def __call__(self, z, x, t):
        raise NotImplementedError

    def max_derivative(self, zmax: float) -> float:
        return 0.0


class NoDrift(DriftLaw):
    def __call__(self, z, x, t):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape)


class PowerDrift(DriftLaw):
    """B = C5 z^q e for a fixed unit direction e."""

    def __init__(self, C5: float, q: float, direction: Sequence[float]):
        e = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(e)
        if norm == 0:
            raise DomainError("drift direction must be nonzero")
        self.C5 = float(C5)
        self.q = float(q)
        self.direction = e / norm

    def __call__(self, z, x, t):
        z = np.asarray(z, dtype=float)
        mag = self.C5 * np.power(np.maximum(z, 0.0), self.q)
        return mag[..., None] * self.direction

    def max_derivative(self, zmax: float) -> float:
        return self.C5 * self.q * max(zmax, 0.0) ** (self.q - 1.0)


class CustomDrift(DriftLaw):
    def __init__(self, func: Callable, C5: float, q: Optional[float]):
        self.func = func
        self.C5 = float(C5)
        self.q = q

    def __call__(self, z, x, t):
        return np.asarray(self.func(z, x, t), dtype=float)


# ---------------------------------------------------------------------------
# structure validation
# ---------------------------------------------------------------------------


@dataclass
class Sample:
    p: np.ndarray
    z: float
    u: np.ndarray
    x: np.ndarray
    t: float


def generate_samples(exp: Exponents, count: int, seed: int = 0) -> list[Sample]:
    """Random samples plus the boundary cases z = 0, p = 0 and large |p|/z."""
    rng = np.random.default_rng(seed)
    n, k = exp.n, exp.k
    out = [
        Sample(np.zeros(n), 0.0, np.zeros(k), np.zeros(n), 0.0),
        Sample(np.zeros(n), 1.0, np.ones(k), np.zeros(n), 0.0),
        Sample(np.ones(n), 0.0, np.zeros(k), np.zeros(n), 0.0),
        Sample(np.full(n, 1e6), 1e-6, np.full(k, 1e-6), np.zeros(n), 0.0),
    ]
    while len(out) < count:
        p = rng.standard_normal(n) * 10.0 ** rng.uniform(-3, 3)
        z = float(10.0 ** rng.uniform(-6, 2))
        u = rng.uniform(0, 1, size=k) * 10.0 ** rng.uniform(-4, 2)
        x = rng.uniform(-5, 5, size=n)
        t = float(rng.uniform(0, 10))
        out.append(Sample(p, z, u, x, t))
    return out[:count]


@dataclass
class ConditionResult:
    condition: str
    status: str  # "pass", "fail", "skipped", "declared"
    tightest_constants: dict = field(default_factory=dict)
    failing_sample: Optional[int] = None
    note: str = ""

    def to_dict(self):
        d = {
            "condition": self.condition,
            "status": self.status,
            "tightest_constants": self.tightest_constants,
        }
        if self.failing_sample is not None:
            d["failing_sample"] = self.failing_sample
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class ValidationReport:
    results: list[ConditionResult]

    def __getitem__(self, condition: str) -> ConditionResult:
        for r in self.results:
            if r.condition == condition:
                return r
        raise KeyError(condition)

    @property
    def passed(self) -> bool:
        return all(r.status != "fail" for r in self.results)

    def to_json(self) -> str:
        return json.dumps([r.to_dict() for r in self.results], indent=2)


_REL = 1e-12  # round-off slack on inequality checks


def _leq(lhs: float, rhs: float) -> bool:
    return lhs <= rhs + _REL * max(1.0, abs(lhs), abs(rhs))


def validate_structure(
    flux: FluxLaw,
    drift: DriftLaw,
    coupler: Coupler,
    exp: Exponents,
    samples: Sequence[Sample],
) -> ValidationReport:
    """Check (A2)-(A7) at each sample against the constants the laws claim.

    Raises RegimeError when a drift is active and its exponent q lies outside
    (1, q_upper_bound). Violations are recorded, not raised; the first
    offending sample index is kept per condition.
    """
    if not samples:
        raise DomainError("validate_structure needs a nonempty sample set")
    const = flux.constants
    C5 = drift.C5
    if C5 > 0:
        qb = q_upper_bound(exp.m, exp.n, exp.beta_star)
        if drift.q is None or not 1 < drift.q < qb:
            raise RegimeError(f"drift exponent q={drift.q} outside (1, {qb:.17g}) required by the q-range bound")

    results = [ConditionResult("A1", "declared" if coupler.declares_A1 else "skipped",
                               note="declared, not checked")]

    # (A2)
    fail = None
    U0, _ = coupler.evaluate(np.zeros(exp.k))
    worst_C1 = 0.0
    if float(U0) != 0:
        fail = -1
    for idx, s in enumerate(samples):
        U, dU = coupler.evaluate(s.u)
        U = float(U)
        growth = float(np.sum(np.abs(dU * s.u)))
        if U > 0:
            worst_C1 = max(worst_C1, growth / U)
        ok = bool(np.all(dU >= 0)) and _leq(growth, const.C1 * U)
        if not ok and fail is None:
            fail = idx
    results.append(ConditionResult(
        "A2", "fail" if fail is not None else "pass", {"C1": worst_C1}, fail,
        "U(0) != 0" if fail == -1 else ""))

    # (A3), (A4) only where they reduce pointwise
    if coupler.constant_partials:
        results.append(ConditionResult("A3", "pass", {}, note="constant partials: grad U_{u^i} = 0"))
        fail = None
        c_obs, C2_req = math.inf, 0.0
        for idx, s in enumerate(samples):
            U = float(np.sum(s.u))
            if U > 0:
                parts = s.u / U
            else:
                parts = np.full(exp.k, 1.0 / exp.k)
            # proportional split of grad U among the components
            total = np.zeros(exp.n)
            for i in range(exp.k):
                total = total + flux(parts[i] * s.p, s.u[i], s.x, s.t)
            lhs = float(np.dot(s.p, total))
            pp = float(np.dot(s.p, s.p))
            if pp > 0:
                c_obs = min(c_obs, (lhs + const.C2 * U * U) / pp)
            if U > 0:
                C2_req = max(C2_req, (const.c * pp - lhs) / (U * U))
            if not _leq(const.c * pp - const.C2 * U * U, lhs) and fail is None:
                fail = idx
        results.append(ConditionResult("A4", "fail" if fail is not None else "pass",
                                       {"c": c_obs, "C2": max(C2_req, 0.0)}, fail))
    else:
        results.append(ConditionResult("A3", "skipped", note="not pointwise reducible for this coupler"))
        results.append(ConditionResult("A4", "skipped", note="not pointwise reducible for this coupler"))

    # (A5), (A6)
    fail5 = fail6 = None
    c_obs, C2_req, C3_req, C4_req = math.inf, 0.0, 0.0, 0.0
    for idx, s in enumerate(samples):
        A = np.asarray(flux(s.p, s.z, s.x, s.t), dtype=float)
        pp = float(np.dot(s.p, s.p))
        pn = math.sqrt(pp)
        dot = float(np.dot(A, s.p))
        an = float(np.linalg.norm(A))
        if pp > 0:
            c_obs = min(c_obs, (dot + const.C2 * s.z ** 2) / pp)
            C3_req = max(C3_req, (an - const.C4 * s.z) / pn)
        if s.z > 0:
            C2_req = max(C2_req, (const.c * pp - dot) / s.z ** 2)
            C4_req = max(C4_req, (an - const.C3 * pn) / s.z)
        if not _leq(const.c * pp - const.C2 * s.z ** 2, dot) and fail5 is None:
            fail5 = idx
        if not _leq(an, const.C3 * pn + const.C4 * s.z) and fail6 is None:
            fail6 = idx
    results.append(ConditionResult("A5", "fail" if fail5 is not None else "pass",
                                   {"c": c_obs, "C2": max(C2_req, 0.0)}, fail5))
    results.append(ConditionResult("A6", "fail" if fail6 is not None else "pass",
                                   {"C3": max(C3_req, 0.0), "C4": max(C4_req, 0.0)}, fail6))

    # (A7)
    fail = None
    C5_req = 0.0
    q = drift.q if drift.q is not None else 1.0
    for idx, s in enumerate(samples):
        Bn = float(np.linalg.norm(drift(s.z, s.x, s.t)))
        bound = s.z ** q
        if bound > 0:
            C5_req = max(C5_req, Bn / bound)
        if not _leq(Bn, C5 * bound) and fail is None:
            fail = idx
    results.append(ConditionResult("A7", "fail" if fail is not None else "pass", {"C5": C5_req}, fail))

    band = const.in_unit_band()
    if 0 < C5 < 1 and "C5" not in band:
        band.append("C5")
    if band:
        results.append(ConditionResult("constants", "pass", note="outside stated band [1, inf): " + ", ".join(band)))
    return ValidationReport(results)
