import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psum_embed.norms import (LqNorm, ProductNorm, PSumDomain, dual_norm_numeric,
                              dual_norm_numeric_many, euclidean,
                              make_lq_norm, parse_norm_spec, psum_norm, two_sum_norm)
from psum_embed.specfun import INF, DomainError

from conftest import shipped_oracles


def brute_force_lq(x, q, w):
    return float(sum(wi * abs(xi) ** q for xi, wi in zip(x, w)) ** (1.0 / q))


def test_euclidean_eval_and_grad():
    k = make_lq_norm(2, 2, [1, 1])
    assert k.eval([3.0, 4.0]) == pytest.approx(5.0, abs=1e-15)
    np.testing.assert_allclose(k.grad([3.0, 4.0]), [0.6, 0.8], atol=1e-15)


def test_l3_dual_of_ones():
    k = make_lq_norm(2, 3, [1, 1])
    assert k.dual_eval([1.0, 1.0]) == pytest.approx(2 ** (2 / 3), rel=1e-15)


def test_eval_matches_definition_including_weights(rng):
    for q in (1.2, 1.5, 2.0, 3.0, 7.0):
        w = rng.uniform(0.2, 3.0, 4)
        k = make_lq_norm(4, q, w)
        for x in rng.normal(size=(50, 4)):
            assert k.eval(x) == pytest.approx(brute_force_lq(x, q, w), rel=1e-13)


def test_eval_survives_extreme_scales():
    k = make_lq_norm(3, 3.0)
    for s in (1e-300, 1e-150, 1e150, 1e300):
        x = s * np.array([1.0, -2.0, 0.5])
        assert k.eval(x) / s == pytest.approx(brute_force_lq([1, -2, 0.5], 3.0, [1, 1, 1]), rel=1e-14)
        g = k.grad(x)
        assert np.all(np.isfinite(g))


def test_grad_at_origin_is_undefined():
    assert np.all(np.isnan(euclidean(3).grad(np.zeros(3))))
    assert euclidean(3).eval(np.zeros(3)) == 0.0


def test_grad_matches_finite_differences(rng):
    for k in shipped_oracles(3):
        for x in rng.normal(size=(20, 3)):
            h = 1e-6
            fd = [(k.eval(x + h * e) - k.eval(x - h * e)) / (2 * h) for e in np.eye(3)]
            np.testing.assert_allclose(k.grad(x), fd, atol=1e-7)


def test_dual_is_closed_form_conjugate_and_involutive():
    w = np.array([1.0, 2.0, 0.5])
    k = make_lq_norm(3, 1.5, w)
    d = k.dual()
    assert d.q == pytest.approx(3.0)
    np.testing.assert_allclose(d.weights, w ** (1 - 3.0))
    assert d.dual() is k


def test_dual_matches_supremum_by_enumeration():
    # n=2: the supremum over the unit sphere is approximated by a dense angle grid
    k = make_lq_norm(2, 1.5, [1.0, 2.0])
    theta = np.linspace(0, 2 * np.pi, 200_001)
    circle = np.column_stack([np.cos(theta), np.sin(theta)])
    sphere = circle / k.eval(circle)[:, None]
    for y in ([1.0, 0.0], [0.3, -0.7], [2.0, 5.0]):
        brute = float(np.max(sphere @ np.array(y)))
        assert k.dual_eval(y) == pytest.approx(brute, rel=1e-8)


def test_axis_extents_are_box_half_widths():
    k = make_lq_norm(2, 3.0, [1.0, 8.0])
    ext = k.axis_extents()
    # the box half-width of a weighted l_q ball along axis i is w_i^(-1/q)
    np.testing.assert_allclose(ext, [1.0, 0.5], rtol=1e-14)


def test_nonsmooth_distance():
    assert np.isinf(euclidean(2).nonsmooth_distance([0.0, 1.0]))
    assert make_lq_norm(2, 4.0).nonsmooth_distance([0.0, 1.0]) == np.inf
    assert make_lq_norm(2, 1.5).nonsmooth_distance([0.25, -1.0]) == 0.25


@pytest.mark.parametrize("q", [1.0, 0.5, INF])
def test_non_c1_exponent_rejected(q):
    with pytest.raises(DomainError):
        make_lq_norm(2, q)


def test_bad_weights_rejected():
    with pytest.raises(DomainError):
        make_lq_norm(2, 2.0, [1.0, 0.0])
    with pytest.raises(DomainError):
        make_lq_norm(2, 2.0, [1.0, -1.0])
    with pytest.raises(DomainError):
        make_lq_norm(2, 2.0, [1.0])


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        euclidean(2).eval([1.0, 2.0, 3.0])


def test_parse_norm_spec():
    k = parse_norm_spec("lq:3:1,2", 2)
    assert isinstance(k, LqNorm) and k.q == 3.0
    np.testing.assert_array_equal(k.weights, [1.0, 2.0])
    assert parse_norm_spec("lq:2", 4).dim == 4
    assert parse_norm_spec(k.name, 2).name == k.name
    for bad in ("l2", "lq:", "lq:x", "lq:2:1", "lq:1"):
        with pytest.raises((ValueError, DomainError)):
            parse_norm_spec(bad, 2)


def test_psum_norm_examples():
    k1 = euclidean(1)
    assert psum_norm(PSumDomain(k1, 2), [0.6], [0.8]) == pytest.approx(1.0, abs=1e-15)
    for k in shipped_oracles(2):
        assert psum_norm(PSumDomain(k, 3), np.zeros(2), np.zeros(2)) == 0.0
    k2 = euclidean(2)
    assert psum_norm(PSumDomain(k2, INF), [0.5, 0.0], [0.0, 0.9]) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        psum_norm(PSumDomain(k2, 2), [0.5, 0.0], [0.0, 0.9, 1.0])


def test_psum_membership_is_strict_and_scaled():
    dom = PSumDomain(euclidean(1), 2.0, scale=2.0)
    assert dom.contains([1.2], [1.5])
    assert not dom.contains([1.2], [1.6])
    assert not PSumDomain(euclidean(1), INF).contains([1.0], [0.0])
    assert dom.in_product([0.9], [-0.9]) and not dom.in_product([1.0], [0.0])


def test_psum_norm_decreases_in_p(rng):
    k = make_lq_norm(2, 3.0)
    x, y = rng.normal(size=(2, 100, 2))
    vals = [psum_norm(PSumDomain(k, p), x, y) for p in (1, 1.5, 2, 3, INF)]
    for a, b in zip(vals, vals[1:]):
        assert np.all(b <= a * (1 + 1e-15))


def test_product_norm_dual_is_conjugate_sum():
    k = make_lq_norm(2, 3.0)
    t = two_sum_norm(k)
    d = t.dual()
    assert isinstance(d, ProductNorm) and d.p == 2.0
    z = np.array([0.3, -0.2, 1.0, 0.5])
    expected = math.sqrt(k.dual_eval(z[:2]) ** 2 + k.eval(z[2:]) ** 2)
    assert d.eval(z) == pytest.approx(expected, rel=1e-15)
    assert ProductNorm(k, k.dual(), 1).dual().p == INF
    assert ProductNorm(k, k.dual(), INF).dual().p == 1.0


def test_product_grad_is_dual_unit():
    k = make_lq_norm(2, 1.5, [1.0, 3.0])
    t = two_sum_norm(k)
    z = np.array([0.3, -0.2, 1.0, 0.5])
    assert t.dual_eval(t.grad(z)) == pytest.approx(1.0, abs=1e-14)
    assert t.grad(z) @ z == pytest.approx(t.eval(z), rel=1e-14)


@pytest.mark.parametrize("p", [1.0, INF])
def test_product_grad_rejected_where_not_differentiable(p):
    with pytest.raises(DomainError):
        ProductNorm(euclidean(1), euclidean(1), p).grad(np.array([0.5, 0.5]))


def test_numeric_dual_examples():
    assert dual_norm_numeric(euclidean(2), [3.0, 4.0]).value == pytest.approx(5.0, rel=1e-10)
    assert dual_norm_numeric(make_lq_norm(2, 3.0), [1.0, 0.0]).value == pytest.approx(1.0, rel=1e-10)


def test_numeric_dual_matches_closed_form_on_random_targets(rng):
    for k in shipped_oracles(2):
        for y in rng.normal(size=(100, 2)):
            res = dual_norm_numeric(k, y, restarts=8, seed=1)
            assert res.value == pytest.approx(k.dual_eval(y), rel=1e-6)
            assert res.value <= k.dual_eval(y) * (1 + 1e-12)  # ascent values are attained
            assert k.eval(res.argmax) == pytest.approx(1.0, abs=1e-12)


def test_numeric_dual_two_sum_target():
    k = make_lq_norm(2, 3.0)
    target = np.array([0.4, -1.2, 0.7, 0.1])
    res = dual_norm_numeric(two_sum_norm(k), target)
    expected = math.sqrt(k.dual_eval(target[:2]) ** 2 + k.eval(target[2:]) ** 2)
    assert res.value == pytest.approx(expected, rel=1e-6)
    assert not res.low_confidence


def test_numeric_dual_is_deterministic():
    k = make_lq_norm(3, 1.5)
    y = np.array([0.5, 2.0, -1.0])
    a = dual_norm_numeric(k, y, seed=4)
    b = dual_norm_numeric(k, y, seed=4)
    assert a.value == b.value and np.array_equal(a.argmax, b.argmax)


finite_vecs = arrays(np.float64, 3, elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=200, deadline=None)
@given(finite_vecs, finite_vecs, st.floats(-50, 50), st.sampled_from([1.5, 2.0, 3.0, 6.5]))
def test_norm_axioms(x, y, t, q):
    k = make_lq_norm(3, q, [1.0, 0.5, 2.0])
    scale = 1.0 + k.eval(x) + k.eval(y)
    assert k.eval(t * x) == pytest.approx(abs(t) * k.eval(x), rel=1e-12, abs=1e-300)
    assert k.eval(x + y) <= k.eval(x) + k.eval(y) + 1e-12 * scale
    assert k.eval(-x) == k.eval(x)
    assert x @ y <= k.eval(x) * k.dual_eval(y) + 1e-12 * scale * (1 + k.dual_eval(y))


def test_batched_ascent_matches_single_targets(rng):
    k = two_sum_norm(make_lq_norm(2, 1.5, [1.0, 2.0]))
    ys = rng.normal(size=(6, 4))
    ys[2] = 0.0
    batch = dual_norm_numeric_many(k, ys, restarts=8, seeds=range(6))
    for i, y in enumerate(ys):
        single = dual_norm_numeric(k, y, restarts=8, seed=i)
        assert batch[i].value == single.value
        np.testing.assert_array_equal(batch[i].argmax, single.argmax)
    assert batch[2].value == 0.0
