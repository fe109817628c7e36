import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenflow.model import (
    CustomFlux,
    DomainError,
    EuclideanNormCoupler,
    Exponents,
    IdentityFlux,
    NoDrift,
    PowerDrift,
    Regime,
    RegimeError,
    ScaledRotationFlux,
    StructureConstants,
    SumCoupler,
    WeightedPowerCoupler,
    classify_regime,
    compute_U,
    critical_exponent,
    derive,
    generate_samples,
    make_coupler,
    q_upper_bound,
    singular_mass_range,
    validate_structure,
)


# -- exponents --------------------------------------------------------------


def test_critical_exponent_examples():
    assert critical_exponent(2) == 0.0
    assert critical_exponent(3) == pytest.approx(1.0 / 3.0, rel=1e-15)
    assert critical_exponent(1) == -1.0
    with pytest.raises(DomainError):
        critical_exponent(0)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_q_upper_bound_at_m1_is_n_plus_2_over_n(n):
    assert q_upper_bound(1.0, n, 1.0) == pytest.approx((n + 2) / n, rel=1e-15)


def test_q_upper_bound_examples():
    assert q_upper_bound(2.0, 2, 0.0) == 1.0
    assert q_upper_bound(2.0, 2, 1.0) == pytest.approx(3.5, rel=1e-15)


def test_singular_mass_range_examples():
    lo, hi = singular_mass_range(2)
    assert lo == pytest.approx(10 / 11, rel=1e-15) and hi == 1.0
    lo, _ = singular_mass_range(2, homogeneous=True)
    assert lo == pytest.approx(5 / 6, rel=1e-15)
    lo, _ = singular_mass_range(3)
    assert lo == pytest.approx((16 + math.sqrt(192)) / 32, rel=1e-15)
    with pytest.raises(DomainError):
        singular_mass_range(1)


def test_exponents_reject_bad_input():
    with pytest.raises(DomainError):
        Exponents(2, 2, 1.0, (1.0,), (1.0, 1.0))
    with pytest.raises(DomainError):
        Exponents.uniform(2, 1, -1.0)
    with pytest.raises(DomainError):
        Exponents.uniform(2, 1, 2.0, lam=0.0)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 4), m=st.floats(0.05, 5.0), b=st.floats(0.0, 3.0))
def test_derived_identities_hold_exactly(n, m, b):
    d = derive(Exponents.uniform(n, 1, m, beta=b))
    mi = d.m_i[0]
    assert d.theta_i[0] == n * (mi - 1.0) + 2.0
    assert d.alpha0[0] == mi - 1.0
    assert mi == b * (m - 1.0) + 1.0
    assert d.theta_i[0] - 2.0 == pytest.approx(n * d.alpha0[0], rel=1e-12, abs=1e-15)
    expected = Regime.NONDEGENERATE if m == 1 else (Regime.DEGENERATE if m > 1 else Regime.SINGULAR)
    assert d.regime is expected


def test_classify_regime_examples():
    rep = classify_regime(Exponents.uniform(2, 1, 1.0))
    assert rep.derived.regime is Regime.NONDEGENERATE
    assert rep.applies("mass_m1")

    rep = classify_regime(Exponents.uniform(2, 1, 2.0))
    assert rep.derived.regime is Regime.DEGENERATE
    assert rep.applies("mass_degenerate")
    assert rep.applies("continuity")
    assert not rep.applies("mass_m1")

    rep = classify_regime(Exponents.uniform(2, 1, 0.95))
    assert rep.derived.m_i[0] == pytest.approx(0.95)
    assert rep.applies("mass_singular")
    assert rep.applies("bound")


def test_classify_regime_names_the_violated_condition():
    rep = classify_regime(Exponents.uniform(2, 1, 0.9))
    assert not rep.applies("mass_singular")
    assert any("m_i" in v for v in rep.violations("mass_singular"))
    rep = classify_regime(Exponents.uniform(3, 1, 0.2))
    assert not rep.applies("bound")
    with pytest.raises(KeyError):
        rep.applies("nope")


def test_classify_regime_homogeneous_interval_is_wider():
    exp = Exponents.uniform(2, 1, 0.85)
    assert not classify_regime(exp).applies("mass_singular")
    assert classify_regime(exp, StructureConstants()).applies("mass_singular")


# -- couplers ----------------------------------------------------------------


def test_compute_U_examples():
    U, dU = compute_U(SumCoupler(), [0.2, 0.3])
    assert U == 0.5 and dU.tolist() == [1.0, 1.0]
    U, dU = compute_U(EuclideanNormCoupler(), [3.0, 4.0])
    assert U == 5.0
    np.testing.assert_allclose(dU, [0.6, 0.8], rtol=1e-15)
    with pytest.raises(DomainError):
        compute_U(SumCoupler(), [0.1, -0.2])


@pytest.mark.parametrize("coupler", [SumCoupler(), EuclideanNormCoupler(),
                                     WeightedPowerCoupler([0.5, 2.0], [1.0, 2.0])])
def test_couplers_vanish_at_origin(coupler):
    U, dU = compute_U(coupler, [0.0, 0.0])
    assert U == 0.0
    assert np.all(dU >= 0)


@settings(max_examples=200, deadline=None)
@given(u=st.lists(st.floats(0.0, 100.0), min_size=1, max_size=4),
       data=st.data())
def test_weighted_power_terms_bounded_by_U(u, data):
    k = len(u)
    lam = data.draw(st.lists(st.floats(0.1, 5.0), min_size=k, max_size=k))
    beta = data.draw(st.lists(st.floats(0.0, 3.0), min_size=k, max_size=k))
    U, dU = compute_U(WeightedPowerCoupler(lam, beta), u)
    terms = np.asarray(lam) * np.power(np.asarray(u), np.asarray(beta))
    assert np.all(terms <= U * (1 + 1e-15) + 1e-300)
    assert np.all(dU >= 0)


@settings(max_examples=100, deadline=None)
@given(u=st.lists(st.floats(0.0, 1e3), min_size=2, max_size=4))
def test_vectorized_evaluate_matches_pointwise(u):
    for coupler in (SumCoupler(), EuclideanNormCoupler()):
        field = np.asarray(u)[:, None] * np.array([[1.0, 0.5, 0.0]])
        U, dU = coupler.evaluate(field)
        for j in range(3):
            Uj, dUj = compute_U(coupler, field[:, j])
            assert U[j] == Uj
            np.testing.assert_array_equal(dU[:, j], dUj)


def test_make_coupler():
    exp = Exponents(2, 2, 2.0, (1.0, 2.0), (1.0, 0.5))
    assert isinstance(make_coupler("sum"), SumCoupler)
    assert isinstance(make_coupler("euclidean"), EuclideanNormCoupler)
    wp = make_coupler("weighted_power", exp)
    assert compute_U(wp, [2.0, 2.0])[0] == 2.0 + 0.5 * 4.0
    with pytest.raises(DomainError):
        make_coupler("weighted_power")
    with pytest.raises(DomainError):
        make_coupler("bogus")


# -- flux and drift laws ----------------------------------------------------


def test_rotation_flux_constants_and_values():
    f = ScaledRotationFlux(0.5, 1.5)
    assert f.constants.c == 0.5
    assert f.constants.C3 == pytest.approx(math.hypot(0.5, 1.5))
    out = f(np.array([1.0, 2.0]), 0.0, np.zeros(2), 0.0)
    np.testing.assert_allclose(out, [0.5 - 3.0, 1.0 + 1.5])
    # the rotation part is orthogonal to p
    p = np.array([0.3, -0.7])
    assert float(np.dot(f(p, 0, 0, 0), p)) == pytest.approx(0.5 * float(p @ p), rel=1e-14)


def test_power_drift():
    d = PowerDrift(2.0, 1.5, [3.0, 4.0])
    np.testing.assert_allclose(d(4.0, np.zeros(2), 0.0), 2.0 * 8.0 * np.array([0.6, 0.8]))
    assert d.max_derivative(4.0) == pytest.approx(2.0 * 1.5 * 2.0)
    with pytest.raises(DomainError):
        PowerDrift(1.0, 1.5, [0.0, 0.0])


def test_structure_constants_domain():
    with pytest.raises(DomainError):
        StructureConstants(c=0.0)
    with pytest.raises(DomainError):
        StructureConstants(C3=-1.0)
    assert StructureConstants(C1=0.5, C3=2.0).in_unit_band() == ["C1"]


# -- validation -------------------------------------------------------------


def _samples(exp, count=500, seed=0):
    return generate_samples(exp, count, seed)


def test_generate_samples_is_seeded():
    exp = Exponents.uniform(2, 2, 1.0)
    a = _samples(exp, 50, seed=3)
    b = _samples(exp, 50, seed=3)
    assert len(a) == 50
    assert all(np.array_equal(x.p, y.p) and x.z == y.z for x, y in zip(a, b))


def test_identity_flux_passes():
    exp = Exponents.uniform(2, 2, 1.0)
    rep = validate_structure(IdentityFlux(), NoDrift(), SumCoupler(), exp, _samples(exp))
    assert rep.passed
    for cond in ("A2", "A3", "A4", "A5", "A6", "A7"):
        assert rep[cond].status == "pass"
    assert rep["A1"].status == "declared"
    assert rep["A5"].tightest_constants["c"] == pytest.approx(1.0, rel=1e-12)
    assert rep["A6"].tightest_constants["C3"] == pytest.approx(1.0, rel=1e-12)


def test_flipped_flux_fails_A5_with_sample_index():
    exp = Exponents.uniform(2, 1, 1.0)
    samples = _samples(exp)
    flipped = CustomFlux(lambda p, z, x, t: -np.asarray(p), IdentityFlux().constants)
    rep = validate_structure(flipped, NoDrift(), SumCoupler(), exp, samples)
    first_nonzero = next(j for j, s in enumerate(samples) if np.any(s.p != 0))
    assert rep["A5"].status == "fail"
    assert rep["A5"].failing_sample == first_nonzero
    assert not rep.passed


def test_drift_outside_q_range_is_a_regime_error():
    exp = Exponents.uniform(2, 1, 1.0, q=3.0)
    with pytest.raises(RegimeError):
        validate_structure(IdentityFlux(), PowerDrift(1.0, 3.0, [1.0, 0.0]), SumCoupler(), exp, _samples(exp))


def test_drift_inside_q_range_checks_A7():
    exp = Exponents.uniform(2, 1, 1.0, q=1.5)
    ok = validate_structure(IdentityFlux(), PowerDrift(1.0, 1.5, [1.0, 0.0]), SumCoupler(), exp, _samples(exp))
    assert ok["A7"].status == "pass"
    assert ok["A7"].tightest_constants["C5"] == pytest.approx(1.0, rel=1e-12)
    # a drift stronger than the C5 it claims
    from degenflow.model import CustomDrift
    liar = CustomDrift(lambda z, x, t: 2.0 * np.asarray(z) ** 1.5 * np.array([1.0, 0.0]), 1.0, 1.5)
    bad = validate_structure(IdentityFlux(), liar, SumCoupler(), exp, _samples(exp))
    assert bad["A7"].status == "fail"


def test_rotation_flux_needs_declared_C3():
    exp = Exponents.uniform(2, 2, 1.0)
    honest = ScaledRotationFlux(0.5, 1.5)
    assert validate_structure(honest, NoDrift(), SumCoupler(), exp, _samples(exp)).passed
    low = ScaledRotationFlux(0.5, 1.5, StructureConstants(c=0.5, C3=1.0))
    rep = validate_structure(low, NoDrift(), SumCoupler(), exp, _samples(exp))
    assert rep["A6"].status == "fail"


def test_euclidean_coupler_skips_pointwise_A3_A4():
    exp = Exponents.uniform(2, 2, 2.0)
    rep = validate_structure(IdentityFlux(), NoDrift(), EuclideanNormCoupler(), exp, _samples(exp))
    assert rep["A3"].status == "skipped" and rep["A4"].status == "skipped"
    assert rep.passed


def test_validate_needs_samples():
    with pytest.raises(DomainError):
        validate_structure(IdentityFlux(), NoDrift(), SumCoupler(), Exponents.uniform(2, 1, 1.0), [])


def test_report_json_round_trip():
    import json
    exp = Exponents.uniform(2, 1, 1.0)
    rep = validate_structure(IdentityFlux(), NoDrift(), SumCoupler(), exp, _samples(exp, 20))
    data = json.loads(rep.to_json())
    assert [d["condition"] for d in data] == ["A1", "A2", "A3", "A4", "A5", "A6", "A7"]
