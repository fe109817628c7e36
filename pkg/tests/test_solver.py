import numpy as np
import pytest

from degenflow import kernels
from degenflow.grid import BC, Grid, StateVector
from degenflow.model import (
    CustomFlux,
    EuclideanNormCoupler,
    Exponents,
    IdentityFlux,
    NoDrift,
    PowerDrift,
    ScaledRotationFlux,
    SumCoupler,
    WeightedPowerCoupler,
)
from degenflow.oracles import BarenblattParams, barenblatt_value
from degenflow.solver import (
    NumericalBlowup,
    SingularCoefficientError,
    SolverConfig,
    face_coefficient,
    simulate,
    stable_dt,
    step,
)

from .reference import pme_step_1d

ID, ND, SUM = IdentityFlux(), NoDrift(), SumCoupler()


def bump(grid, center=0.0, radius=0.5):
    x = grid.centers() - center
    r2 = (x * x).sum(axis=-1)
    return np.maximum(1.0 - r2 / radius ** 2, 0.0) ** 2


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(cfl_safety=0.0)
    with pytest.raises(ValueError):
        SolverConfig(epsilon_reg=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(ledger_every=0)
    with pytest.raises(ValueError):
        SolverConfig(coefficient_mean="geometric")


def test_face_coefficient_examples():
    g = Grid.box(0.0, 1.0, 4)
    s = StateVector(g, np.array([[0.2, 0.4, 0.0, 0.0]]))
    (D,) = face_coefficient(s, SUM, 1.0)
    assert np.all(D == 1.0)
    (D,) = face_coefficient(s, SUM, 2.0)
    assert D[1] == pytest.approx(0.6, rel=1e-15)
    assert D[3] == 0.0
    # two components share the same coefficient through U
    s2 = StateVector(g, np.array([[0.1, 0.1, 0, 0], [0.1, 0.3, 0, 0]]))
    assert face_coefficient(s2, SUM, 2.0)[0][1] == pytest.approx(0.6, rel=1e-15)


def test_face_coefficient_harmonic_mean():
    g = Grid.box(0.0, 1.0, 4)
    s = StateVector(g, np.array([[0.2, 0.4, 0.0, 0.0]]))
    (D,) = face_coefficient(s, SUM, 2.0, SolverConfig(coefficient_mean="harmonic"))
    assert D[1] == pytest.approx(2.0 * 2 * 0.2 * 0.4 / 0.6, rel=1e-14)
    assert D[2] == 0.0


def test_face_coefficient_singular():
    g = Grid.box(0.0, 1.0, 4)
    s = StateVector(g, np.array([[0.2, 0.4, 0.0, 0.0]]))
    with pytest.raises(SingularCoefficientError):
        face_coefficient(s, SUM, 0.9, SolverConfig(epsilon_reg=0.0))
    (D,) = face_coefficient(s, SUM, 0.9, SolverConfig(epsilon_reg=1e-12))
    assert D[3] == pytest.approx(0.9 * 1e-12 ** -0.1)


def test_stable_dt_example():
    g = Grid.box(0.0, 1.0, 100)
    s = StateVector(g, np.random.default_rng(0).random((1, 100)))
    exp = Exponents.uniform(1, 1, 1.0)
    assert stable_dt(s, SolverConfig(cfl_safety=0.5), ID, ND, SUM, exp) == pytest.approx(2.5e-5, rel=1e-14)


def test_stable_dt_zero_state_and_drift_limit():
    g = Grid.box(0.0, 1.0, 100)
    exp = Exponents.uniform(1, 1, 2.0)
    assert stable_dt(StateVector(g, np.zeros((1, 100))), SolverConfig(), ID, ND, SUM, exp) > 1e100
    s = StateVector(g, np.full((1, 100), 2.0))
    drift = PowerDrift(50.0, 1.5, [1.0])
    cfg = SolverConfig(cfl_safety=0.5)
    dt = stable_dt(s, cfg, ID, drift, SUM, exp)
    assert dt == pytest.approx(min(0.5 * 1e-4 / (2 * 4.0), 0.5 * 0.01 / (50 * 1.5 * 2 ** 0.5)), rel=1e-12)


def test_step_fixed_points():
    g = Grid.box(-1.0, 1.0, 16, dims=2)
    exp = Exponents.uniform(2, 2, 2.0)
    zero = StateVector(g, np.zeros((2, 16, 16)))
    out, rep = step(zero, 1e-3, ID, ND, SUM, exp)
    assert np.all(out.u == 0.0) and out.t == 1e-3
    const = StateVector(g, np.full((2, 16, 16), 0.7))
    out, rep = step(const, 1e-3, ScaledRotationFlux(0.5, 1.5), ND, SUM, exp)
    np.testing.assert_array_equal(out.u, const.u)
    assert np.all(rep.clipped_mass == 0)


def test_heat_step_matches_loop_reference():
    g = Grid.box(0.0, 1.0, 32)
    u = np.random.default_rng(1).random((1, 32))
    exp = Exponents.uniform(1, 1, 1.0)
    dt = 1e-4
    out, _ = step(StateVector(g, u), dt, ID, ND, SUM, exp)
    ref = pme_step_1d(u.tolist(), g.h[0], dt, 1.0)
    np.testing.assert_allclose(out.u, ref, rtol=0, atol=1e-14)
    # and against u + dt * discrete Laplacian directly
    lap = np.zeros(32)
    lap[1:-1] = u[0, 2:] - 2 * u[0, 1:-1] + u[0, :-2]
    lap[0] = u[0, 1] - u[0, 0]
    lap[-1] = u[0, -2] - u[0, -1]
    np.testing.assert_allclose(out.u[0], u[0] + dt * lap / g.h[0] ** 2, rtol=0, atol=1e-14)


def test_coupled_step_matches_loop_reference():
    g = Grid.box(0.0, 1.0, 24)
    u = np.random.default_rng(2).random((2, 24))
    u[:, :6] = 0.0
    exp = Exponents.uniform(1, 2, 2.0)
    out, _ = step(StateVector(g, u), 2e-5, ID, ND, SUM, exp)
    np.testing.assert_allclose(out.u, pme_step_1d(u.tolist(), g.h[0], 2e-5, 2.0), rtol=0, atol=1e-14)


def test_step_clipping_records_mass():
    g = Grid.box(0.0, 1.0, 16)
    u = np.zeros((1, 16))
    u[0, 8] = 1.0
    exp = Exponents.uniform(1, 1, 1.0)
    out, rep = step(StateVector(g, u), 10 * 16 ** -2, ID, ND, SUM, exp)  # far past the stable step
    assert np.all(out.u >= 0) and rep.clipped_mass[0] > 0
    out2, rep2 = step(StateVector(g, u), 10 * 16 ** -2, ID, ND, SUM, exp, SolverConfig(clip_negative=False))
    assert out2.u.min() < 0 and rep2.clipped_mass[0] == 0
    assert out.u.sum() * g.h[0] == pytest.approx(1 / 16 + rep.clipped_mass[0], rel=1e-12)


def test_step_blowup_names_the_cell():
    g = Grid.box(0.0, 1.0, 8)
    u = np.ones((1, 8))
    u[0, 3] = np.inf
    with pytest.raises(NumericalBlowup, match="component 1 at cell"):
        step(StateVector(g, u), 1e-4, ID, ND, SUM, Exponents.uniform(1, 1, 1.0))


def test_simulate_t_end_zero():
    g = Grid.box(0.0, 1.0, 8)
    tr = simulate(StateVector(g, np.ones((1, 8))), SolverConfig(t_end=0.0), ID, ND, SUM,
                  Exponents.uniform(1, 1, 2.0))
    assert len(tr) == 1 and tr.times == [0.0]
    assert len(tr.ledger["t"]) == 1


def test_simulate_rejects_negative_data():
    g = Grid.box(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        simulate(StateVector(g, -np.ones((1, 8))), SolverConfig(t_end=0.1), ID, ND, SUM,
                 Exponents.uniform(1, 1, 2.0))


def test_simulate_snapshots_and_ledger():
    g = Grid.box(-1.0, 1.0, 64)
    exp = Exponents.uniform(1, 2, 2.0)
    u = np.stack([bump(g), 0.5 * bump(g, 0.2)])
    tr = simulate(StateVector(g, u), SolverConfig(t_end=0.05, snapshot_interval=0.01, clip_negative=False),
                  ID, ND, SUM, exp)
    np.testing.assert_allclose(tr.times, [0, 0.01, 0.02, 0.03, 0.04, 0.05], rtol=0, atol=1e-15)
    led = tr.ledger
    for col in ("step", "t", "dt", "mass_1", "mass_2", "clipped_mass", "boundary_flux", "sup_U"):
        assert col in led
    assert led["step"][-1] == tr.meta["steps"]
    assert np.all(np.abs(led["mass_1"] / led["mass_1"][0] - 1) <= 1e-12)
    assert led["sup_U"][-1] < led["sup_U"][0]


@pytest.mark.parametrize("bc", [BC.ZERO_FLUX, BC.PERIODIC])
def test_simulate_conserves_mass_with_drift(bc):
    g = Grid.box(-1.0, 1.0, 48, dims=2, bc=bc)
    exp = Exponents.uniform(2, 2, 1.5, q=1.5)
    u = np.stack([bump(g, np.array([0.3, 0.0])), 0.4 * bump(g)])
    tr = simulate(StateVector(g, u), SolverConfig(t_end=0.02, clip_negative=False), ScaledRotationFlux(0.5, 1.0),
                  PowerDrift(1.0, 1.5, [1.0, 1.0]), SUM, exp)
    vol = g.cell_volume
    for i in range(2):
        m = np.array([s[i].sum() * vol for s in tr.states])
        assert np.max(np.abs(m / m[0] - 1)) <= 1e-12


def _identity_custom():
    return CustomFlux(lambda p, z, x, t: np.asarray(p), IdentityFlux().constants)


@pytest.mark.parametrize("coupler", [SUM, EuclideanNormCoupler(), WeightedPowerCoupler([1.0, 0.5], [1.0, 2.0])])
def test_fused_and_generic_paths_agree(coupler):
    g = Grid.box(-1.0, 1.0, 40)
    exp = Exponents(1, 2, 2.0, (1.0, 2.0), (1.0, 0.5))
    u = np.stack([bump(g), 0.5 * bump(g, 0.3)])
    cfg = dict(t_end=0.01, snapshot_interval=0.005, clip_negative=True)
    runs = {}
    for name, flux, backend in [("fused", ID, "auto"), ("python", ID, "python"), ("generic", _identity_custom(), "auto")]:
        runs[name] = simulate(StateVector(g, u), SolverConfig(backend=backend, **cfg), flux, ND, coupler, exp)
    assert runs["generic"].meta["backend"] == "generic"
    assert runs["python"].meta["backend"] == "python"
    for name in ("python", "generic"):
        assert runs[name].times == runs["fused"].times
        for a, b in zip(runs[name].states, runs["fused"].states):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


@pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled extension not built")
def test_compiled_backend_is_used_by_default():
    g = Grid.box(-1.0, 1.0, 16)
    tr = simulate(StateVector(g, bump(g)[None]), SolverConfig(t_end=1e-3), ID, ND, SUM, Exponents.uniform(1, 1, 2.0))
    assert tr.meta["backend"] == "compiled"


def test_proportional_data_stays_proportional():
    g = Grid.box(-1.0, 1.0, 128)
    v = bump(g)
    exp = Exponents.uniform(1, 2, 2.0)
    tr = simulate(StateVector(g, np.stack([0.3 * v, 0.7 * v])), SolverConfig(t_end=0.05, snapshot_interval=0.01),
                  ID, ND, SUM, exp)
    for u in tr.states:
        assert np.max(np.abs(u[0] - (3 / 7) * u[1])) <= 1e-10 * v.max()


def test_radial_symmetry_is_preserved():
    g = Grid.box(-1.0, 1.0, 48, dims=2)
    exp = Exponents.uniform(2, 1, 2.0)
    tr = simulate(StateVector(g, bump(g)[None]), SolverConfig(t_end=0.01, snapshot_interval=0.005),
                  ID, ND, SUM, exp)
    for u in tr.states:
        f = u[0]
        for mirror in (f[::-1, :], f[:, ::-1], f.T):
            assert np.max(np.abs(mirror - f)) <= 1e-12


def test_singular_run_needs_regularization():
    g = Grid.box(-1.0, 1.0, 32)
    exp = Exponents.uniform(1, 1, 0.95)
    u = bump(g, radius=0.3)[None]
    with pytest.raises(SingularCoefficientError):
        simulate(StateVector(g, u), SolverConfig(t_end=1e-3, epsilon_reg=0.0), ID, ND, SUM, exp)
    tr = simulate(StateVector(g, u), SolverConfig(t_end=1e-3, epsilon_reg=1e-12), ID, ND, SUM, exp)
    assert tr.times[-1] == 1e-3


@pytest.mark.parametrize("backend", ["auto", "python"])
def test_blowup_returns_partial_trajectory(backend):
    g = Grid.box(0.0, 1.0, 8)
    u = np.ones((1, 8))
    u[0, 2] = np.inf
    with pytest.raises(NumericalBlowup) as info:
        simulate(StateVector(g, u), SolverConfig(t_end=0.1, backend=backend), ID, ND, SUM, Exponents.uniform(1, 1, 1.0))
    assert info.value.trajectory is not None and len(info.value.trajectory) >= 1


def test_barenblatt_start_tracks_oracle():
    g = Grid.box(-2.0, 2.0, 256)
    p = BarenblattParams(2.0, 1)
    x = g.centers()
    init = StateVector(g, barenblatt_value(x, 0.2, p)[None], 0.2)
    tr = simulate(init, SolverConfig(t_end=0.3), ID, ND, SUM, Exponents.uniform(1, 1, 2.0))
    err = np.abs(tr.states[-1][0] - barenblatt_value(x, 0.3, p)).sum() * g.h[0]
    assert err <= 4 * g.h[0]
