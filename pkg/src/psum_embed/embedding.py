"""Radial diffeomorphism ``phi(x) = f(||x||) x / ||x||`` and its cotangent lift.

The lift ``e(x, y) = (phi(x), Dphi(x)^{-T} y)`` is symplectic for any
diffeomorphism ``phi``. Here

    Dphi(x) = (f/r) I + (f' - f/r) (x/r) grad N(x)^T,     r = ||x||,

a rank-one update of a multiple of the identity. Since
``<grad N(x), x/r> = 1`` its inverse transpose is available in closed form:

    Dphi(x)^{-T} y = (y - (1 - r f'/f) <x/r, y> grad N(x)) * r / f.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .norms import NormOracle, PSumDomain, psum_norm
from .specfun import INF, DomainError, parse_exponent, rescale_constants
from .transfer import NEAR_ZERO, TransferFunction, build_transfer, psum_profile, unit_profile

SHERMAN_MORRISON_FLOOR = 1e-12


class SingularJacobianError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PhasePoint:
    """Position ``x`` and momentum ``y``; arrays of shape ``(..., n)``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape:
            raise ValueError(f"x and y must have equal shapes, got {x.shape} and {y.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_array(cls, z) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        n, odd = divmod(z.shape[-1], 2)
        if odd:
            raise ValueError(f"phase vector must have even length, got {z.shape[-1]}")
        return cls(z[..., :n], z[..., n:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.y], axis=-1)

    @property
    def n(self) -> int:
        return self.x.shape[-1]


@dataclass(frozen=True)
class EmbeddingMap:
    """Cotangent lift of the radial map built from ``transfer`` and ``oracle``.

    ``momentum_scale`` multiplies the fibre image; values other than 1 break
    symplecticity on purpose and exist only as a negative control.
    """

    oracle: NormOracle
    transfer: TransferFunction
    momentum_scale: float = 1.0

    @property
    def n(self) -> int:
        return self.oracle.dim

    def corrupted(self, factor: float = 1.01) -> "EmbeddingMap":
        return EmbeddingMap(self.oracle, self.transfer, self.momentum_scale * factor)

    def _radius(self, x: np.ndarray) -> np.ndarray:
        r = self.oracle.eval(x)
        if np.any(r > self.transfer.a):
            raise DomainError(
                f"position norm {float(np.max(r))!r} exceeds transfer endpoint {self.transfer.a!r}")
        return r


def radial_map(emb: EmbeddingMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = emb._radius(x)
    return emb.transfer.slope(r)[..., None] * x


def radial_jacobian(emb: EmbeddingMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = emb._radius(x)
    n = emb.n
    eye = np.eye(n)
    small = r < NEAR_ZERO
    safe_r = np.where(small, 1.0, r)
    safe_x = np.where(small[..., None], 1.0, x)
    alpha = emb.transfer.slope(r)
    fp = emb.transfer.derivative(np.where(small, 0.0, r))
    if np.any(fp[~small] <= 0.0):
        raise SingularJacobianError("f'(||x||) <= 0: Dphi is singular")
    beta = np.where(small, 0.0, fp - alpha)
    u = safe_x / safe_r[..., None]
    v = emb.oracle.grad(safe_x)
    jac = alpha[..., None, None] * eye + beta[..., None, None] * u[..., :, None] * v[..., None, :]
    return np.where(small[..., None, None], emb.transfer.fprime0 * eye, jac)


def lift(emb: EmbeddingMap, z: PhasePoint) -> PhasePoint:
    """Image ``(phi(x), Dphi(x)^{-T} y)`` of a (batch of) phase point(s)."""
    x, y = z.x, z.y
    if x.shape[-1] != emb.n:
        raise ValueError(f"expected dimension {emb.n}, got {x.shape[-1]}")
    r = emb._radius(x)
    small = r < NEAR_ZERO
    safe_r = np.where(small, 1.0, r)
    safe_x = np.where(small[..., None], 1.0, x)
    alpha = emb.transfer.slope(r)
    fp = np.where(small, emb.transfer.fprime0, emb.transfer.derivative(np.where(small, 0.0, r)))
    if np.any(fp <= 0.0):
        raise SingularJacobianError("f'(||x||) <= 0: Dphi is singular")
    phi = alpha[..., None] * x
    u = safe_x / safe_r[..., None]
    v = emb.oracle.grad(safe_x)
    coef = np.where(small, 0.0, (fp - alpha) / fp)
    w = (y - (coef * np.einsum("...i,...i->...", u, y))[..., None] * v) / alpha[..., None]
    thin = ~small & (fp < SHERMAN_MORRISON_FLOOR)
    if np.any(thin):
        jac = radial_jacobian(emb, x[thin])
        w[thin] = np.linalg.solve(np.swapaxes(jac, -1, -2), y[thin][..., None])[..., 0]
    if emb.momentum_scale != 1.0:
        w = w * emb.momentum_scale
    return PhasePoint(phi, w)


def lift_array(emb: EmbeddingMap, z) -> np.ndarray:
    """:func:`lift` on stacked ``(x, y)`` vectors of shape ``(..., 2n)``."""
    return lift(emb, PhasePoint.from_array(z)).as_array()


@lru_cache(maxsize=32)
def _psum_transfer(p: float) -> TransferFunction:
    return build_transfer(psum_profile(p), unit_profile())


def psum_embedding(oracle: NormOracle, p) -> EmbeddingMap:
    """Embedding of ``lam(p) (K (+)_p K°)`` into ``K x K°``."""
    p = parse_exponent(p)
    if p == INF:
        raise DomainError("p = inf: the p-sum already equals K x K°, no embedding is built")
    return EmbeddingMap(oracle, _psum_transfer(p))


def psum_source(oracle: NormOracle, p) -> PSumDomain:
    """The domain ``lam(p) (K (+)_p K°)`` on which :func:`psum_embedding` acts."""
    return PSumDomain(oracle, p, rescale_constants(p).lam)


def embed_psum(oracle: NormOracle, p, z: PhasePoint) -> PhasePoint:
    emb = psum_embedding(oracle, p)
    lam = rescale_constants(p).lam
    nrm = psum_norm(PSumDomain(oracle, p), z.x, z.y)
    if np.any(nrm >= lam):
        raise DomainError(f"phase point outside lam(p)(K (+)_p K°): norm {float(np.max(nrm))!r} >= {lam!r}")
    return lift(emb, z)
