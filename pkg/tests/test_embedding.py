import math

import numpy as np
import pytest

from psum_embed.embedding import (EmbeddingMap, PhasePoint, SingularJacobianError, embed_psum,
                                  lift, lift_array, psum_embedding, psum_source, radial_jacobian,
                                  radial_map)
from psum_embed.norms import euclidean, make_lq_norm
from psum_embed.sampling import SampleStream, sample_in_psum
from psum_embed.specfun import INF, DomainError, rescale_constants
from psum_embed.transfer import TransferFunction, build_transfer, euclidean_disc_f, unit_profile
from psum_embed.verify import finite_difference_jacobian, symplectic_residual

from conftest import shipped_oracles

A = 2.0 / math.sqrt(math.pi)


def disc_map(n):
    return EmbeddingMap(euclidean(n), euclidean_disc_f())


def test_radial_map_origin_and_axis():
    emb = disc_map(3)
    np.testing.assert_array_equal(radial_map(emb, np.zeros(3)), np.zeros(3))
    f = euclidean_disc_f()
    for t in (1e-3, 0.4, 1.0, A):
        np.testing.assert_allclose(radial_map(emb, [t, 0.0, 0.0]), [f.value(t), 0.0, 0.0], atol=1e-15)


def test_radial_map_boundary_goes_to_unit_sphere(rng):
    emb = disc_map(2)
    d = rng.normal(size=(50, 2))
    # one ulp inside, since rounding can put A d / |d| just past the endpoint
    x = A * (1 - 2e-16) * d / np.linalg.norm(d, axis=1)[:, None]
    np.testing.assert_allclose(np.linalg.norm(radial_map(emb, x), axis=1), 1.0, atol=1e-14)


def test_radial_map_rejects_outside():
    with pytest.raises(DomainError):
        radial_map(disc_map(2), [A, 0.01])


def test_near_origin_is_linear():
    emb = disc_map(2)
    x = np.array([3e-9, -4e-9])
    y = np.array([0.3, 0.7])
    np.testing.assert_allclose(radial_map(emb, x), A * x, rtol=1e-15)
    np.testing.assert_allclose(radial_jacobian(emb, x), A * np.eye(2))
    img = lift(emb, PhasePoint(x, y))
    np.testing.assert_allclose(img.y, y / A, rtol=1e-15)


def test_euclidean_jacobian_eigenstructure():
    emb = disc_map(3)
    f = euclidean_disc_f()
    x = np.array([0.3, -0.4, 0.5])
    r = np.linalg.norm(x)
    jac = radial_jacobian(emb, x)
    np.testing.assert_allclose(jac @ x, f.derivative(r) * x, rtol=1e-13)
    perp = np.array([0.4, 0.3, 0.0])
    np.testing.assert_allclose(jac @ perp, f.value(r) / r * perp, rtol=1e-13, atol=1e-15)


def test_momentum_along_position_scales_by_inverse_derivative():
    emb = disc_map(2)
    f = euclidean_disc_f()
    x = np.array([0.6, 0.2])
    img = lift(emb, PhasePoint(x, 0.5 * x))
    np.testing.assert_allclose(img.y, 0.5 * x / f.derivative(np.linalg.norm(x)), rtol=1e-13)


def test_zero_momentum_stays_on_zero_section(rng):
    for k in shipped_oracles(3):
        emb = psum_embedding(k, 1.5)
        x = rng.normal(size=(30, 3))
        x *= 0.9 * emb.transfer.a / k.eval(x)[:, None]
        img = lift(emb, PhasePoint(x, np.zeros_like(x)))
        np.testing.assert_array_equal(img.y, 0.0)
        np.testing.assert_allclose(img.x, radial_map(emb, x))


def test_lift_solves_transposed_jacobian(rng):
    for k in shipped_oracles(3):
        emb = psum_embedding(k, 3)
        x = rng.normal(size=(20, 3))
        x *= rng.uniform(0.05, 0.99, (20, 1)) * emb.transfer.a / k.eval(x)[:, None]
        y = rng.normal(size=(20, 3))
        w = lift(emb, PhasePoint(x, y)).y
        jac = radial_jacobian(emb, x)
        np.testing.assert_allclose(np.einsum("kji,kj->ki", jac, w), y, atol=1e-12)


def test_lift_is_exactly_symplectic_for_the_disc(rng):
    emb = disc_map(2)
    src = psum_source(euclidean(2), 2)
    z = sample_in_psum(src, SampleStream(5), 100).as_array()
    jac = finite_difference_jacobian(lambda s: lift_array(emb, s), z)
    assert np.max(symplectic_residual(jac)) < 1e-6


def test_singular_jacobian_is_reported():
    tf = euclidean_disc_f()
    bad = TransferFunction(a=tf.a, b=tf.b, f=tf.f, fprime=lambda t: -np.ones_like(t),
                           fprime0=tf.fprime0)
    emb = EmbeddingMap(euclidean(2), bad)
    with pytest.raises(SingularJacobianError):
        lift(emb, PhasePoint([0.3, 0.1], [0.0, 1.0]))
    with pytest.raises(SingularJacobianError):
        radial_jacobian(emb, np.array([0.3, 0.1]))


def test_endpoint_falls_back_to_dense_solve():
    # f'(a) = 0 at the boundary of the p-sum; the image must stay finite
    emb = disc_map(2)
    x = np.array([A * (1 - 1e-15), 0.0])
    img = lift(emb, PhasePoint(x, np.array([0.0, 0.3])))
    assert np.all(np.isfinite(img.y))


def test_embed_psum_examples():
    k = euclidean(2)
    eps = 1e-6
    img = embed_psum(k, 2, PhasePoint([A - eps, 0.0], [0.0, 0.0]))
    assert np.linalg.norm(img.x) == pytest.approx(euclidean_disc_f().value(A - eps), abs=1e-12)
    assert np.linalg.norm(img.x) < 1.0
    zero = embed_psum(k, 2, PhasePoint(np.zeros(2), np.zeros(2)))
    np.testing.assert_array_equal(zero.as_array(), 0.0)
    with pytest.raises(DomainError):
        embed_psum(k, INF, PhasePoint([0.1, 0.0], [0.0, 0.0]))
    with pytest.raises(DomainError):
        embed_psum(k, 2, PhasePoint([A, 0.0], [0.0, 0.0]))


def test_quadrature_and_closed_form_embeddings_agree(rng):
    k = euclidean(3)
    src = psum_source(k, 2)
    z = sample_in_psum(src, SampleStream(2), 2000)
    a = lift(psum_embedding(k, 2), z).as_array()
    b = lift(disc_map(3), z).as_array()
    np.testing.assert_allclose(a, b, atol=1e-7)


def test_images_are_distinct_for_distinct_sources():
    k = make_lq_norm(2, 1.5)
    z = sample_in_psum(psum_source(k, 1.5), SampleStream(9), 5000)
    img = lift(psum_embedding(k, 1.5), z).as_array()
    assert np.unique(np.round(z.as_array(), 12), axis=0).shape[0] == 5000
    assert np.unique(img, axis=0).shape[0] == 5000


def test_source_scale_is_lambda():
    k = make_lq_norm(2, 3)
    assert psum_source(k, 3).scale == rescale_constants(3).lam
    assert psum_embedding(k, 3).transfer.a == pytest.approx(rescale_constants(3).lam)


def test_phase_point_validation():
    with pytest.raises(ValueError):
        PhasePoint([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        PhasePoint.from_array([1.0, 2.0, 3.0])
    z = PhasePoint.from_array([1.0, 2.0, 3.0, 4.0])
    assert z.n == 2 and z.as_array().tolist() == [1.0, 2.0, 3.0, 4.0]


def test_corrupted_map_scales_momentum():
    emb = disc_map(1)
    z = PhasePoint([0.5], [0.5])
    assert lift(emb.corrupted(1.01), z).y[0] == pytest.approx(1.01 * lift(emb, z).y[0])


def test_identity_transfer_lift_is_identity(rng):
    emb = EmbeddingMap(make_lq_norm(3, 3), build_transfer(unit_profile(), unit_profile()))
    x = rng.normal(size=(10, 3))
    x *= 0.9 / emb.oracle.eval(x)[:, None]
    y = rng.normal(size=(10, 3))
    img = lift(emb, PhasePoint(x, y))
    np.testing.assert_allclose(img.x, x, atol=1e-15)
    np.testing.assert_allclose(img.y, y, atol=1e-14)
