import math

import numpy as np
import pytest

from degenflow.diagnostics import mass_series
from degenflow.grid import Grid, StateVector, Trajectory
from degenflow.model import DomainError, Exponents, IdentityFlux, NoDrift, RegimeError, SumCoupler
from degenflow.oracles import (
    BarenblattParams,
    barenblatt_trajectory,
    barenblatt_value,
    heat_kernel_value,
    heat_trajectory,
    proportional_reduction,
    residual,
    sample_trajectory,
)

from .reference import barenblatt_constant


@pytest.mark.parametrize("m,n", [(2.0, 1), (2.0, 2), (3.0, 2), (1.5, 3), (0.95, 2), (0.8, 3), (0.7, 1)])
def test_barenblatt_constant_matches_beta_closed_form(m, n):
    for M in (1.0, 2.5):
        assert BarenblattParams(m, n, M).C == pytest.approx(barenblatt_constant(m, n, M), rel=1e-10)


def test_barenblatt_parameter_domain():
    with pytest.raises(RegimeError):
        BarenblattParams(1.0, 2)
    with pytest.raises(RegimeError):
        BarenblattParams(0.2, 3)
    with pytest.raises(DomainError):
        BarenblattParams(2.0, 1, M=0.0)
    with pytest.raises(DomainError):
        barenblatt_value(np.zeros(1), 0.0, BarenblattParams(2.0, 1))


def test_barenblatt_exponents():
    p = BarenblattParams(2.0, 2)
    assert p.alpha == 0.5
    assert p.kappa == pytest.approx(0.5 / 8)


def test_barenblatt_vanishes_at_front():
    p = BarenblattParams(2.0, 2)
    t = 0.3
    r = p.front_radius(t)
    assert barenblatt_value(np.array([r, 0.0]), t, p) == pytest.approx(0.0, abs=1e-15)
    assert barenblatt_value(np.array([0.0, 0.99 * r]), t, p) > 0
    assert barenblatt_value(np.array([1.01 * r, 0.0]), t, p) == 0.0
    assert p.sup(t) == pytest.approx(t ** -0.5 * p.C, rel=1e-14)
    assert BarenblattParams(0.9, 2).front_radius(1.0) == math.inf


@pytest.mark.parametrize("m", [2.0, 3.0])
def test_barenblatt_mass_is_constant_in_time(m):
    g = Grid.box(-3.0, 3.0, 600, dims=2)
    p = BarenblattParams(m, 2, 1.3)
    tr = barenblatt_trajectory(g, p, [0.05, 0.1])
    ms = mass_series(tr, 0)
    for v in ms.values:
        assert v == pytest.approx(1.3, rel=5e-3)
    fine = Grid.box(-3.0, 3.0, 10 ** 6)
    p1 = BarenblattParams(m, 1, 1.0)
    masses = [barenblatt_value(fine.centers(), t, p1).sum() * fine.h[0] for t in (0.05, 0.1, 0.2)]
    assert max(abs(v - 1.0) for v in masses) < 1e-8


def test_fast_diffusion_profile_mass():
    g = Grid.box(-60.0, 60.0, 60000)
    p = BarenblattParams(0.7, 1)
    assert barenblatt_value(g.centers(), 0.5, p).sum() * g.h[0] == pytest.approx(1.0, rel=1e-3)


def test_heat_kernel_examples():
    assert heat_kernel_value(np.zeros(2), 1 / (4 * math.pi), 2) == pytest.approx(1.0, rel=1e-15)
    t = 0.3
    peak = heat_kernel_value(np.zeros(2), t, 2)
    x = np.array([math.sqrt(4 * t * math.log(2)), 0.0])
    assert heat_kernel_value(x, t, 2) == pytest.approx(peak / 2, rel=1e-14)
    with pytest.raises(DomainError):
        heat_kernel_value(np.zeros(1), -1.0, 1)


@pytest.mark.parametrize("m", [1.0 + 1e-3, 1.0 - 1e-3])
@pytest.mark.parametrize("n", [1, 2])
def test_barenblatt_approaches_heat_kernel(m, n):
    t = 0.5
    r = np.linspace(0.0, 3.0, 301)
    x = np.zeros((r.size, n))
    x[:, 0] = r
    heat = heat_kernel_value(x, t, n)
    bb = barenblatt_value(x, t, BarenblattParams(m, n))
    keep = heat > 0.1 * heat.max()
    assert np.max(np.abs(bb[keep] / heat[keep] - 1)) < 0.01


def test_sample_trajectory_broadcasts_components():
    g = Grid.box(0.0, 1.0, 8)
    tr = sample_trajectory(lambda x, t: x[..., 0] * t, g, [1.0, 2.0], k=3)
    assert tr.k == 3 and len(tr) == 2
    np.testing.assert_allclose(tr.states[1][2], 2 * g.axis_centers(0))


def test_proportional_reduction():
    g = Grid.box(-2.0, 2.0, 64)
    scalar = barenblatt_trajectory(g, BarenblattParams(2.0, 1), [0.1, 0.2, 0.3])
    same = proportional_reduction([1.0], scalar)
    for a, b in zip(same.states, scalar.states):
        np.testing.assert_array_equal(a, b)
    three = proportional_reduction([0.2, 0.3, 0.5], scalar)
    assert three.k == 3
    for i, w in enumerate([0.2, 0.3, 0.5]):
        ms = mass_series(three, i)
        assert ms.max_drift <= 1e-3
        assert ms.values[0] == pytest.approx(w * mass_series(scalar, 0).values[0], rel=1e-15)
    with pytest.raises(DomainError):
        proportional_reduction([0.2, 0.3], scalar)
    with pytest.raises(DomainError):
        proportional_reduction([-0.5, 1.5], scalar)


def test_residual_of_equilibrium_is_zero():
    g = Grid.box(0.0, 1.0, 16, dims=2)
    tr = Trajectory(g)
    for t in (0.0, 0.1, 0.2):
        tr.append(StateVector(g, np.full((1, 16, 16), 0.4), t))
    res = residual(tr, IdentityFlux(), NoDrift(), SumCoupler(), Exponents.uniform(2, 1, 2.0))
    assert len(res) == 1 and res[0][1][0] == 0.0
    with pytest.raises(ValueError):
        residual(Trajectory(g, times=[0.0], states=[np.zeros((1, 16, 16))]), IdentityFlux(), NoDrift(),
                 SumCoupler(), Exponents.uniform(2, 1, 2.0))


def test_heat_kernel_solves_discrete_operator_to_second_order():
    exp = Exponents.uniform(1, 1, 1.0)
    norms = []
    for cells, delta in ((200, 4e-3), (400, 2e-3), (800, 1e-3)):
        g = Grid.box(-4.0, 4.0, cells)
        tr = heat_trajectory(g, [0.2 - delta, 0.2, 0.2 + delta])
        norms.append(residual(tr, IdentityFlux(), NoDrift(), SumCoupler(), exp)[0][1][0])
    orders = [math.log2(norms[j] / norms[j + 1]) for j in range(2)]
    assert min(orders) > 1.8


def test_barenblatt_residual_second_order_away_from_front():
    exp = Exponents.uniform(1, 1, 2.0)
    p = BarenblattParams(2.0, 1)
    norms = []
    for cells, delta in ((400, 4e-3), (800, 2e-3), (1600, 1e-3)):
        g = Grid.box(-2.0, 2.0, cells)
        tr = barenblatt_trajectory(g, p, [0.3 - delta, 0.3, 0.3 + delta])
        region = tr.states[1][0] > 0.1 * p.sup(0.3)
        norms.append(residual(tr, IdentityFlux(), NoDrift(), SumCoupler(), exp, region=region)[0][1][0])
    orders = [math.log2(norms[j] / norms[j + 1]) for j in range(2)]
    assert min(orders) > 1.8
