import math

import numpy as np
import pytest

from psum_embed.quadrature import adaptive_simpson
from psum_embed.specfun import INF, DomainError, rescale_constants
from psum_embed.transfer import (ConstructionError, Profile, build_transfer, concavity_violation,
                                 constant_profile, euclidean_disc_f, psum_profile, unit_profile)

A = 2.0 / math.sqrt(math.pi)


def test_closed_form_endpoints():
    f = euclidean_disc_f()
    assert f.value(0.0) == 0.0
    assert abs(f.value(A) - 1.0) < 1e-15
    assert f.derivative(0.0) == pytest.approx(A, rel=1e-15)
    assert f.fprime0 == pytest.approx(1.1283791670955126, rel=1e-15)


def test_closed_form_matches_arcsin_expression():
    f = euclidean_disc_f()
    t = np.linspace(0.0, A * (1 - 1e-9), 1000)
    printed = (2 / math.pi) * np.arcsin(np.sqrt(math.pi / 4) * t) + 0.5 * t * np.sqrt(4 / math.pi - t * t)
    np.testing.assert_allclose(f.value(t), printed, atol=1e-13)


def test_closed_form_domain_errors():
    f = euclidean_disc_f()
    for bad in (-1e-3, A + 1e-6, math.nan):
        with pytest.raises(DomainError):
            f.value(bad)


def test_quadrature_transfer_matches_closed_form():
    tf = build_transfer(psum_profile(2), unit_profile())
    f = euclidean_disc_f()
    t = np.linspace(0.0, A, 1000)
    assert np.max(np.abs(tf.value(t) - f.value(t))) < 1e-8
    assert abs(tf.value(A) - 1.0) < 1e-10
    assert tf.concave


def test_equal_profiles_give_identity():
    tf = build_transfer(unit_profile(), unit_profile())
    t = np.linspace(0.0, 1.0, 101)
    np.testing.assert_allclose(tf.value(t), t, atol=1e-15)
    np.testing.assert_allclose(tf.derivative(t), 1.0)


def test_constant_profiles_give_linear_map():
    tf = build_transfer(constant_profile(2.0, 0.5), unit_profile())
    t = np.linspace(0.0, 0.5, 101)
    np.testing.assert_allclose(tf.value(t), 2 * t, atol=1e-15)
    assert tf.fprime0 == 2.0


def test_unequal_integrals_rejected():
    with pytest.raises(ConstructionError):
        build_transfer(constant_profile(1.0, 0.5), unit_profile())


def test_non_concave_transfer_rejected_with_location():
    # g increasing makes f convex
    g = Profile(lambda t: 2.0 * np.asarray(t) + 0.0 + 1e-3, 1.0, name="ramp")
    h = constant_profile(g.total, 1.0)
    with pytest.raises(ConstructionError, match="t="):
        build_transfer(g, h)
    tf = build_transfer(g, h, check_concavity=False)
    assert not tf.concave


def test_profile_must_be_positive():
    with pytest.raises(DomainError):
        Profile(lambda t: np.asarray(t) - 0.5, 1.0)
    with pytest.raises(DomainError):
        Profile(lambda t: np.ones_like(t), 0.0)


@pytest.mark.parametrize("p", [1, 1.5, 2, 3, 4, 8])
def test_psum_profile_endpoint_and_unit_area(p):
    g = psum_profile(p)
    lam = rescale_constants(p).lam
    assert g.a == pytest.approx(lam, rel=1e-14)
    assert g(0.0) == pytest.approx(lam, rel=1e-14)
    ref = adaptive_simpson(g, 0.0, g.a, tol=1e-10)
    assert g.total == pytest.approx(1.0, abs=1e-9)
    assert ref == pytest.approx(1.0, abs=1e-7)


def test_psum_profile_at_two_is_disc():
    g = psum_profile(2)
    t = np.linspace(0.0, A, 200)
    np.testing.assert_allclose(g(t) ** 2, 4 / math.pi - t * t, atol=1e-14)


def test_psum_profile_rejects_infinity():
    with pytest.raises(DomainError):
        psum_profile(INF)


def test_printed_constant_variant():
    # agrees with the area-one profile at p = 2 and nowhere else on the grid
    assert psum_profile(2, printed_constant=True).total == pytest.approx(1.0, abs=1e-12)
    g3 = psum_profile(3, printed_constant=True)
    assert abs(g3.total - 1.0) > 1e-3
    with pytest.raises(ConstructionError):
        build_transfer(g3, unit_profile())


def test_psum_profile_rejects_mismatched_constants():
    with pytest.raises(ValueError):
        psum_profile(3, constants=rescale_constants(2))


@pytest.mark.parametrize("p", [1, 1.5, 2, 3])
def test_transfer_properties(p):
    g = psum_profile(p)
    h = unit_profile()
    tf = build_transfer(g, h)
    t = np.linspace(0.0, g.a, 1000)
    # differentiated defining identity
    np.testing.assert_allclose(tf.derivative(t) * h(tf.value(t)), g(t), atol=1e-8)
    assert concavity_violation(tf)[1] <= 1e-6
    inner = t[1:-1]
    assert np.all(tf.value(inner) / inner >= tf.derivative(inner) - 1e-9)
    assert np.all(np.diff(tf.value(t)) > 0)
    assert tf.value(0.0) == 0.0
    assert abs(tf.value(g.a) - 1.0) < 1e-10


def test_slope_uses_derivative_at_origin():
    tf = build_transfer(psum_profile(3), unit_profile())
    assert tf.slope(0.0) == tf.fprime0
    assert tf.slope(1e-9) == tf.fprime0
    assert tf.slope(1e-3) == pytest.approx(tf.value(1e-3) / 1e-3)


def test_profile_table_shape():
    tab = psum_profile(2).table(11)
    assert tab.shape == (11, 2)
    assert tab[0, 0] == 0.0 and tab[-1, 0] == pytest.approx(A)
