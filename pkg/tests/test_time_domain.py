"""Tests for the matrix-surrogate harness and the truncation bound.

The truncated-operator reference value below was computed independently
with scipy.integrate.quad: each entry of the horizon integral was
evaluated by adaptive nested quadrature (outer integral over observation
time, inner integral over the source convolution), working directly from
eigendecompositions of the two generator matrices.  The Frobenius norm
of that entrywise-integrated matrix was frozen here; the package's
composite Gauss-Legendre assembly must reproduce it.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lapscat.errors import (
    DomainError,
    QuadratureError,
    SpectralParameterError,
    ValidationError,
)
from lapscat.time_domain import (
    LemmaBound,
    PulseProfile,
    SurrogateModel,
    assemble_F_ideal,
    assemble_F_truncated,
    cosine_family,
    eig_max,
    laplace_identity_residual,
    lemma_bound,
    make_random_surrogate,
    pulse_response,
    sine_family,
    verify_bound,
)

# Frozen first: Frobenius norm of the truncated operator at
# dim=6, lambda_bound=1, seed=11, bump pulse eps=0.3, lambda=4, horizon=1.3,
# from the adaptive nested-quadrature reference described above.
TRUNCATED_NORM_REFERENCE = 0.02014039290381836


def test_truncated_operator_matches_adaptive_quadrature_reference():
    model = make_random_surrogate(6, 1.0, 11)
    f = assemble_F_truncated(model, PulseProfile(0.3), 4.0, 1.3)
    norm = np.linalg.norm(f)
    assert abs(norm - TRUNCATED_NORM_REFERENCE) < 1e-9 * TRUNCATED_NORM_REFERENCE


def test_ideal_operator_is_masked_resolvent_difference():
    model = make_random_surrogate(9, 2.0, 4)
    lam = 7.0
    f = assemble_F_ideal(model, lam)
    eye = np.eye(model.dim)
    direct = np.linalg.inv(lam * eye - model.a_perturbed) - np.linalg.inv(
        lam * eye - model.a_free
    )
    idx = np.where(model.probe_mask)[0]
    block = np.zeros_like(direct)
    block[np.ix_(idx, idx)] = direct[np.ix_(idx, idx)]
    assert np.max(np.abs(f - block)) < 1e-12
    # unobserved rows and columns are exactly zero
    assert np.all(f[~model.probe_mask, :] == 0.0)
    assert np.all(f[:, ~model.probe_mask] == 0.0)


def test_ideal_operator_spectral_validation():
    model = make_random_surrogate(6, 1.0, 0)
    with pytest.raises(SpectralParameterError):
        assemble_F_ideal(model, 1.0)  # must strictly exceed the bound
    with pytest.raises(SpectralParameterError):
        assemble_F_ideal(model, 0.5)
    # a spectral parameter sitting on an eigenvalue is rejected even if
    # it clears the declared bound
    edge = SurrogateModel(
        a_perturbed=np.diag([1.0, -1.0, -2.0]),
        a_free=np.diag([-1.0, -1.0, -1.0]),
        lambda_bound=1.0,
        probe_mask=np.array([True, True, False]),
    )
    with pytest.raises(SpectralParameterError):
        assemble_F_ideal(edge, 1.0 + 1e-13)


def test_cosine_family_diagonal_branches():
    # negative eigenvalue oscillates, zero freezes at 1, positive grows
    a = np.diag([-4.0, 0.0, 0.25])
    t = 1.3
    c = cosine_family(a, t)
    expect = np.diag([math.cos(2.0 * t), 1.0, math.cosh(0.5 * t)])
    assert np.max(np.abs(c - expect)) < 1e-14 * math.cosh(0.5 * t)
    np.testing.assert_array_equal(cosine_family(a, 0.0), np.eye(3))
    with pytest.raises(DomainError):
        cosine_family(a, -0.1)


def test_sine_family_diagonal_branches():
    a = np.diag([-4.0, 0.0, 0.25])
    t = 1.3
    s = sine_family(a, t)
    expect = np.diag([math.sin(2.0 * t) / 2.0, t, math.sinh(0.5 * t) / 0.5])
    assert np.max(np.abs(s - expect)) < 1e-14 * math.sinh(0.5 * t) / 0.5
    np.testing.assert_array_equal(sine_family(a, 0.0), np.zeros((3, 3)))
    with pytest.raises(DomainError):
        sine_family(a, -0.1)


def test_sine_family_is_time_integral_of_cosine():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((5, 5))
    a = 0.5 * (a + a.T)
    t = 1.7
    gn, gw = np.polynomial.legendre.leggauss(60)
    nodes = 0.5 * t * (gn + 1.0)
    weights = 0.5 * t * gw
    acc = sum(w * cosine_family(a, ti) for ti, w in zip(nodes, weights))
    target = sine_family(a, t)
    assert np.linalg.norm(acc - target) < 1e-13 * np.linalg.norm(target)


@given(
    st.floats(min_value=0.0, max_value=3.0),
    st.floats(min_value=0.0, max_value=3.0),
)
@settings(max_examples=25, deadline=None)
def test_cosine_addition_identity(t, s):
    # Cos(t+s) = Cos(t)Cos(s) + A Sin(t)Sin(s), uniformly on mixed spectra
    a = _ADDITION_MATRIX
    lhs = cosine_family(a, t + s)
    rhs = cosine_family(a, t) @ cosine_family(a, s) + a @ sine_family(
        a, t
    ) @ sine_family(a, s)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(lhs), 1.0)


_ADDITION_RNG = np.random.default_rng(3)
_ADDITION_MATRIX = _ADDITION_RNG.standard_normal((5, 5))
_ADDITION_MATRIX = 0.5 * (_ADDITION_MATRIX + _ADDITION_MATRIX.T)


def test_propagator_norm_bounds():
    # with spectrum below b, ||Cos(t)|| <= cosh(sqrt(b) t) and the sine
    # family obeys the matching sinh bound (time up to 6)
    for seed in (0, 5, 9):
        model = make_random_surrogate(10, 1.0, seed)
        for which in ("perturbed", "free"):
            mat = model.matrix(which)
            sb = math.sqrt(max(eig_max(mat), 0.0))
            for t in np.linspace(0.05, 6.0, 12):
                cos_bound = math.cosh(sb * t)
                sin_bound = math.sinh(sb * t) / sb if sb > 0 else min(t, 1.0)
                assert np.linalg.norm(cosine_family(mat, t), 2) <= cos_bound * (
                    1.0 + 1e-10
                )
                assert np.linalg.norm(sine_family(mat, t), 2) <= sin_bound * (
                    1.0 + 1e-10
                )


def test_laplace_identity_residual_small():
    for seed in (0, 1, 2):
        model = make_random_surrogate(8, 1.0, seed)
        assert laplace_identity_residual(model.a_perturbed, 4.0) < 1e-10
        assert laplace_identity_residual(model.a_free, 4.0) < 1e-10
    model = make_random_surrogate(8, 1.0, 0)
    with pytest.raises(SpectralParameterError):
        laplace_identity_residual(model.a_perturbed, eig_max(model.a_perturbed))


def test_pulse_profile_support_and_mass():
    for kind in ("bump", "box"):
        for eps in (0.01, 0.3, 1.7):
            pulse = PulseProfile(eps, kind)
            assert abs(pulse.mass() - 1.0) < 1e-9
            x = np.array([-1e-9, eps, eps + 1e-9, 2 * eps])
            assert np.all(pulse(x) == 0.0)
            inside = np.linspace(eps * 0.1, eps * 0.9, 7)
            assert np.all(pulse(inside) >= 0.0)
            assert pulse(np.array([eps / 2])) > 0.0
    with pytest.raises(ValidationError):
        PulseProfile(0.0)
    with pytest.raises(ValidationError):
        PulseProfile(0.1, "triangle")


def test_lemma_constants_closed_form():
    # at lambda_bound=0 the hyperbolic factors collapse to rationals
    b = lemma_bound(9.0, 0.0, 4.0, 2.0, 0.5)
    assert b.c1 == 3.0
    assert b.c2 == 4.0
    assert b.c3 == 2.0
    expected = (
        3.0 * math.exp(-6.0)
        + 0.5 * (4.0 * (1.0 - math.exp(-1.5)) + 2.0 * math.exp(-1.5))
    ) / 3.0
    assert math.isclose(b.total, expected, rel_tol=1e-15)
    assert isinstance(b, LemmaBound)


def test_lemma_bound_monotonicity():
    totals_t = [lemma_bound(9.0, 0.0, 4.0, tc, 0.05).total for tc in (1.0, 2.0, 3.0, 4.0)]
    assert all(a > b for a, b in zip(totals_t, totals_t[1:]))
    totals_eps = [lemma_bound(9.0, 0.0, 4.0, 2.0, e).total for e in (0.01, 0.1, 0.3)]
    assert all(a < b for a, b in zip(totals_eps, totals_eps[1:]))
    totals_lam = [lemma_bound(lam, 0.0, 4.0, 2.0, 0.1).total for lam in (4.0, 9.0, 25.0)]
    assert all(a > b for a, b in zip(totals_lam, totals_lam[1:]))


def test_lemma_bound_validation():
    with pytest.raises(SpectralParameterError):
        lemma_bound(3.0, 0.0, 4.0, 2.0, 0.5)  # lambda below lambda_circ
    with pytest.raises(SpectralParameterError):
        lemma_bound(9.0, 4.0, 4.0, 2.0, 0.5)  # lambda_circ not past the bound
    with pytest.raises(ValidationError):
        lemma_bound(9.0, 0.0, 4.0, 0.4, 0.5)  # horizon shorter than the pulse
    with pytest.raises(ValidationError):
        lemma_bound(9.0, 0.0, 4.0, 2.0, 0.0)


def test_truncated_operator_validation():
    model = make_random_surrogate(6, 1.0, 11)
    pulse = PulseProfile(0.3)
    with pytest.raises(SpectralParameterError):
        assemble_F_truncated(model, pulse, 1.0, 1.3)
    with pytest.raises(DomainError):
        assemble_F_truncated(model, pulse, 4.0, 0.0)
    with pytest.raises(QuadratureError):
        assemble_F_truncated(model, pulse, 4.0, 1.3, quadrature_n=1)


def test_truncated_operator_vanishes_without_perturbation():
    same = np.diag([-1.0, -2.0, -3.0])
    model = SurrogateModel(
        a_perturbed=same,
        a_free=same,
        lambda_bound=0.0,
        probe_mask=np.array([True, True, True]),
    )
    f = assemble_F_truncated(model, PulseProfile(0.2), 4.0, 1.5)
    np.testing.assert_array_equal(f, np.zeros((3, 3)))
    np.testing.assert_array_equal(assemble_F_ideal(model, 4.0), np.zeros((3, 3)))


def test_truncation_error_decreases_with_horizon():
    model = make_random_surrogate(6, 1.0, 11)
    pulse = PulseProfile(0.3)
    ideal = assemble_F_ideal(model, 4.0)
    errs = [
        np.linalg.norm(ideal - assemble_F_truncated(model, pulse, 4.0, tc), 2)
        for tc in (1.0, 2.0, 4.0)
    ]
    assert errs[0] > errs[1] > errs[2]
    # each measured error sits under the closed-form bound
    for tc, err in zip((1.0, 2.0, 4.0), errs):
        assert err <= lemma_bound(4.0, 1.0, 4.0, tc, 0.3).total


def test_verify_bound_report():
    model = make_random_surrogate(6, 1.0, 11)
    report = verify_bound(model, [PulseProfile(0.1)], [4.0, 9.0], [1.0, 2.0])
    assert report["all_passed"] is True
    assert report["n_failed"] == 0
    assert report["n_cells"] == 4
    assert report["dim"] == 6
    for cell in report["cells"]:
        assert cell["passed"]
        assert cell["slack"] > 1.0
        assert cell["measured"] <= cell["bound"]


def test_pulse_response_basics():
    model = make_random_surrogate(6, 1.0, 11)
    pulse = PulseProfile(0.3)
    f = np.ones(6)
    assert np.all(pulse_response(model, pulse, f, 0.0) == 0.0)
    u = pulse_response(model, pulse, f, 1.0)
    assert u.shape == (6,)
    assert np.all(np.isfinite(u)) and np.linalg.norm(u) > 0.0
    with pytest.raises(DomainError):
        pulse_response(model, pulse, f, -1.0)
    with pytest.raises(DomainError):
        pulse_response(model, pulse, f, 1.0, which="scattered")


def test_random_surrogate_spectra_and_determinism():
    a = make_random_surrogate(12, 2.0, 7)
    b = make_random_surrogate(12, 2.0, 7)
    np.testing.assert_array_equal(a.a_perturbed, b.a_perturbed)
    np.testing.assert_array_equal(a.a_free, b.a_free)
    np.testing.assert_array_equal(a.probe_mask, b.probe_mask)
    c = make_random_surrogate(12, 2.0, 8)
    assert np.any(c.a_perturbed != a.a_perturbed)
    assert eig_max(a.a_perturbed) <= 2.0
    assert eig_max(a.a_free) <= -1.0  # strictly dissipative free generator
    assert 3 <= int(np.sum(a.probe_mask)) <= 12
    zero_bound = make_random_surrogate(10, 0.0, 3)
    assert eig_max(zero_bound.a_perturbed) <= -1.0
    with pytest.raises(ValidationError):
        make_random_surrogate(2, 1.0, 0)


def test_surrogate_model_validation():
    ok = np.diag([-1.0, -2.0])
    mask = np.array([True, False])
    with pytest.raises(ValidationError):
        SurrogateModel(np.diag([1.0, -1.0]), ok, 0.5, mask)  # exceeds bound
    with pytest.raises(ValidationError):
        SurrogateModel(ok, np.diag([0.5, -1.0]), 0.0, mask)  # free not dissipative
    with pytest.raises(ValidationError):
        SurrogateModel(ok, ok, 0.0, np.array([False, False]))
    with pytest.raises(ValidationError):
        SurrogateModel(np.array([[0.0, 1.0], [0.0, 0.0]]), ok, 0.0, mask)
