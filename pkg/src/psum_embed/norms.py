"""Norm oracles: evaluation, gradient, dual norm and dual gradient.

All oracle methods act on the last axis, so a batch of points is an array of
shape ``(..., dim)`` and scalar-valued methods return shape ``(...)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .specfun import INF, DomainError, format_exponent, parse_exponent

ORIGIN_EXCLUSION = 1e-12


class NormOracle:
    """A centrally symmetric norm on R^dim, C^1 away from the origin.

    Subclasses implement :meth:`eval`, :meth:`grad` and :meth:`dual`; the
    dual-norm methods delegate to the dual oracle.
    """

    dim: int
    smooth: bool = True
    name: str = "norm"

    def eval(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def dual(self) -> "NormOracle":
        raise NotImplementedError

    def dual_eval(self, y) -> np.ndarray:
        return self.dual().eval(y)

    def dual_grad(self, y) -> np.ndarray:
        return self.dual().grad(y)

    def nonsmooth_distance(self, x) -> np.ndarray:
        """Distance from ``x`` to the set (origin excluded) where the norm
        stops being real-analytic; ``inf`` when there is none."""
        x = self._check_dim(x)
        return np.full(x.shape[:-1], np.inf)

    def axis_extents(self) -> np.ndarray:
        """Half-widths of the smallest axis-aligned box containing the unit ball.

        ``max{|x_i| : ||x|| <= 1}`` is the dual norm of the basis vector e_i.
        """
        return np.asarray(self.dual_eval(np.eye(self.dim)), dtype=float)

    def _check_dim(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ValueError(
                f"{self.name}: expected last axis of length {self.dim}, got shape {x.shape}")
        return x


class LqNorm(NormOracle):
    """Weighted ``l_q`` norm ``(sum_i w_i |x_i|^q)^(1/q)`` with ``1 < q < inf``."""

    def __init__(self, n: int, q: float, weights=None):
        if int(n) != n or n < 1:
            raise DomainError(f"dimension must be a positive integer, got {n!r}")
        q = float(q)
        if not (1.0 < q < INF):
            raise DomainError(f"l_q oracle requires 1 < q < inf (C^1 norm), got q={q!r}")
        w = np.ones(int(n)) if weights is None else np.asarray(weights, dtype=float).copy()
        if w.shape != (int(n),):
            raise DomainError(f"expected {n} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise DomainError("weights must be finite and strictly positive")
        w.setflags(write=False)
        self.dim = int(n)
        self.q = q
        self.weights = w
        self.name = _lq_name(q, w)
        self._dual: LqNorm | None = None

    @property
    def conjugate_exponent(self) -> float:
        return self.q / (self.q - 1.0)

    def eval(self, x) -> np.ndarray:
        x = np.abs(self._check_dim(x))
        m = x.max(axis=-1, keepdims=True)
        safe = np.where(m > 0.0, m, 1.0)
        s = np.sum(self.weights * (x / safe) ** self.q, axis=-1)
        return m[..., 0] * s ** (1.0 / self.q)

    def grad(self, x) -> np.ndarray:
        # w_i |x_i|^(q-1) sign(x_i) / N(x)^(q-1), computed on x / max|x_i|
        x = self._check_dim(x)
        m = np.abs(x).max(axis=-1, keepdims=True)
        safe = np.where(m > 0.0, m, 1.0)
        u = x / safe
        s = np.sum(self.weights * np.abs(u) ** self.q, axis=-1, keepdims=True)
        nu = np.where(m > 0.0, s ** (1.0 / self.q), 1.0)
        g = self.weights * np.sign(u) * (np.abs(u) / nu) ** (self.q - 1.0)
        return np.where(m > 0.0, g, np.nan)

    def nonsmooth_distance(self, x) -> np.ndarray:
        # |t|^q is analytic at 0 only for even integer q
        x = self._check_dim(x)
        if self.q % 2.0 == 0.0:
            return np.full(x.shape[:-1], np.inf)
        return np.abs(x).min(axis=-1)

    def dual(self) -> "LqNorm":
        if self._dual is None:
            qd = self.conjugate_exponent
            self._dual = LqNorm(self.dim, qd, self.weights ** (1.0 - qd))
            self._dual._dual = self
        return self._dual

    def __repr__(self) -> str:
        return f"LqNorm({self.name!r})"


def make_lq_norm(n: int, q: float, weights=None) -> LqNorm:
    return LqNorm(n, q, weights)


def euclidean(n: int) -> LqNorm:
    return LqNorm(n, 2.0)


def _lq_name(q: float, w: np.ndarray) -> str:
    base = f"lq:{q:g}"
    if np.all(w == 1.0):
        return base
    return base + ":" + ",".join(f"{v:g}" for v in w)


_SPEC_RE = re.compile(r"^lq:([^:]+)(?::(.+))?$")


def parse_norm_spec(spec: str, n: int) -> LqNorm:
    """Parse ``"lq:<q>[:w1,w2,...]"`` into an oracle on R^n."""
    m = _SPEC_RE.match(spec.strip())
    if not m:
        raise ValueError(f"unrecognised norm spec {spec!r}; expected 'lq:<q>[:w1,...]'")
    try:
        q = float(m.group(1))
        weights = None
        if m.group(2):
            weights = [float(v) for v in m.group(2).split(",")]
    except ValueError as exc:
        raise ValueError(f"malformed norm spec {spec!r}: {exc}") from None
    return LqNorm(n, q, weights)


class ProductNorm(NormOracle):
    """``(||x||_A^p + ||y||_B^p)^(1/p)`` on ``R^n x R^m`` (max when ``p = inf``).

    The dual is the ``p'``-sum of the dual factors; for the pair
    ``(K-norm, dual norm)`` and ``p = 2`` this is ``sqrt(||x||_*^2 + ||y||^2)``.
    """

    def __init__(self, first: NormOracle, second: NormOracle, p):
        self.first = first
        self.second = second
        self.p = parse_exponent(p)
        self.dim = first.dim + second.dim
        self.smooth = first.smooth and second.smooth and 1.0 < self.p < INF
        self.name = f"({first.name})(+){format_exponent(self.p)}({second.name})"
        self._dual: ProductNorm | None = None

    def split(self, z):
        z = self._check_dim(z)
        return z[..., : self.first.dim], z[..., self.first.dim:]

    def eval(self, z) -> np.ndarray:
        x, y = self.split(z)
        return _combine(self.first.eval(x), self.second.eval(y), self.p)

    def grad(self, z) -> np.ndarray:
        x, y = self.split(z)
        a = self.first.eval(x)
        b = self.second.eval(y)
        total = _combine(a, b, self.p)
        if self.p == INF or self.p == 1.0:
            raise DomainError(f"{self.name} is not differentiable for p={self.p}")
        safe = np.where(total > 0.0, total, 1.0)
        ca = (a / safe) ** (self.p - 1.0)
        cb = (b / safe) ** (self.p - 1.0)
        gx = np.where((a > 0.0)[..., None], self.first.grad(np.where(
            (a > 0.0)[..., None], x, 1.0)), 0.0)
        gy = np.where((b > 0.0)[..., None], self.second.grad(np.where(
            (b > 0.0)[..., None], y, 1.0)), 0.0)
        g = np.concatenate([ca[..., None] * gx, cb[..., None] * gy], axis=-1)
        return np.where((total > 0.0)[..., None], g, np.nan)

    def dual(self) -> "ProductNorm":
        if self._dual is None:
            p = self.p
            pd = INF if p == 1.0 else (1.0 if p == INF else p / (p - 1.0))
            self._dual = ProductNorm(self.first.dual(), self.second.dual(), pd)
            self._dual._dual = self
        return self._dual


def _combine(a, b, p):
    if p == INF:
        return np.maximum(a, b)
    m = np.maximum(a, b)
    safe = np.where(m > 0.0, m, 1.0)
    return m * ((a / safe) ** p + (b / safe) ** p) ** (1.0 / p)


def two_sum_norm(oracle: NormOracle) -> ProductNorm:
    """``sqrt(||x||^2 + ||y||_*^2)``, the norm whose unit ball is ``K (+)_2 K°``."""
    return ProductNorm(oracle, oracle.dual(), 2.0)


@dataclass(frozen=True)
class PSumDomain:
    """The open set ``scale * (K (+)_p K°)`` in ``R^n x R^n``."""

    oracle: NormOracle
    p: float
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p", parse_exponent(self.p))
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise DomainError(f"scale must be positive and finite, got {self.scale!r}")

    @property
    def n(self) -> int:
        return self.oracle.dim

    def norm(self, x, y) -> np.ndarray:
        return psum_norm(self, x, y)

    def contains(self, x, y) -> np.ndarray:
        return self.norm(x, y) < self.scale

    def in_product(self, x, y) -> np.ndarray:
        """Membership in the open product ``K x K°`` (the embedding target)."""
        return (self.oracle.eval(x) < 1.0) & (self.oracle.dual_eval(y) < 1.0)

    def scaled(self, factor: float) -> "PSumDomain":
        return PSumDomain(self.oracle, self.p, self.scale * factor)


def psum_norm(domain: PSumDomain, x, y) -> np.ndarray:
    """``(||x||^p + ||y||_*^p)^(1/p)``, ignoring ``domain.scale``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"x and y must have equal shapes, got {x.shape} and {y.shape}")
    return _combine(domain.oracle.eval(x), domain.oracle.dual_eval(y), domain.p)


@dataclass
class AscentResult:
    value: float
    argmax: np.ndarray
    iterations: int
    low_confidence: bool = False
    values: np.ndarray = field(default_factory=lambda: np.empty(0))


def dual_norm_numeric(primal: NormOracle, y, restarts: int = 32, seed: int = 0,
                      tol: float = 1e-8, max_iter: int = 5000) -> AscentResult:
    """Lower bound on ``sup{<u, y> : N(u) <= 1}`` by multi-start ascent.

    Each restart walks on the unit sphere of ``primal``: step along the part
    of ``y`` tangent to the level set of N, then rescale back to ``N = 1``. A
    step is kept only if the objective increases, otherwise it is halved.
    Every iterate is feasible, so the returned value never overshoots.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (primal.dim,):
        raise ValueError(f"target must have shape ({primal.dim},), got {y.shape}")
    return dual_norm_numeric_many(primal, y[None], restarts, [seed], tol, max_iter)[0]


def dual_norm_numeric_many(primal: NormOracle, ys, restarts: int = 32, seeds=None,
                           tol: float = 1e-8, max_iter: int = 5000) -> list[AscentResult]:
    """:func:`dual_norm_numeric` for each row of ``ys``, iterated as one batch.

    Target ``i`` uses ``seeds[i]`` for its starting points, so the result for
    a target does not depend on which other targets share the batch.
    """
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 2 or ys.shape[1] != primal.dim:
        raise ValueError(f"targets must have shape (m, {primal.dim}), got {ys.shape}")
    m, dim = ys.shape
    seeds = [0] * m if seeds is None else list(seeds)
    starts = []
    for yi, si in zip(ys, seeds):
        u0 = np.random.default_rng(int(si)).standard_normal((restarts, dim))
        u0[0] = yi
        starts.append(u0)
    rows = m * restarts
    yy = np.repeat(ys, restarts, axis=0)
    ynorm = np.linalg.norm(yy, axis=1)
    zero = ynorm == 0.0
    u = np.concatenate(starts) if m else np.empty((0, dim))
    u[zero] = 1.0
    u /= primal.eval(u)[:, None]
    val = np.einsum("ij,ij->i", u, yy)
    start = val.copy()
    step = 1.0 / np.where(zero, 1.0, ynorm)
    active = ~zero
    iters = np.zeros(rows, dtype=int)
    for it in range(1, max_iter + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        iters[idx] = it
        ua, ya = u[idx], yy[idx]
        g = primal.grad(ua)
        coef = np.einsum("ij,ij->i", g, ya) / np.einsum("ij,ij->i", g, g)
        cand = ua + step[idx, None] * (ya - coef[:, None] * g)
        cand /= primal.eval(cand)[:, None]
        cval = np.einsum("ij,ij->i", cand, ya)
        better = cval > val[idx]
        acc = idx[better]
        move = np.linalg.norm(cand[better] - ua[better], axis=1)
        u[acc] = cand[better]
        val[acc] = cval[better]
        step[acc] *= 1.5
        rej = idx[~better]
        step[rej] *= 0.5
        active[acc[move < tol]] = False
        active[rej[step[rej] * ynorm[rej] < 1e-16]] = False
    out = []
    for i in range(m):
        sl = slice(i * restarts, (i + 1) * restarts)
        if zero[sl][0]:
            out.append(AscentResult(0.0, np.zeros(dim), 0, values=np.zeros(restarts)))
            continue
        v, uu = val[sl], u[sl]
        best = int(np.argmax(v))
        low = bool(np.all(v <= start[sl])) and not _is_stationary(primal, uu[best], ys[i])
        low = low or bool(active[sl].any())
        out.append(AscentResult(float(v[best]), uu[best].copy(), int(iters[sl].max()), low, v.copy()))
    return out


def _is_stationary(primal: NormOracle, u, y) -> bool:
    g = primal.grad(u)
    d = y - (g @ y / (g @ g)) * g
    return bool(np.linalg.norm(d) <= 1e-8 * np.linalg.norm(y))
