"""Radial transfer functions ``f: [0, a] -> [0, b]``.

A pair of profiles ``g`` on ``[0, a]`` and ``h`` on ``[0, b]`` with equal
integrals determines ``f`` by ``int_0^x g = int_0^f(x) h``. The sublevel set
``{(x, y) : ||y||_* <= g(||x||)}`` is carried by the radial lift of ``f``
into ``{||y||_* <= h(||x||)}``, provided ``f`` is concave.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .quadrature import CumulativeTable
from .specfun import INF, DomainError, RescaleConstants, parse_exponent, rescale_constants

NEAR_ZERO = 1e-8
CONCAVITY_STEP = 1e-4
CONCAVITY_TOL = 1e-6


class ConstructionError(ValueError):
    """The profiles do not define a valid (equal-area, concave) transfer."""


class Profile:
    """A continuous ``g: [0, a] -> [0, inf)``, positive on ``[0, a)``.

    ``func`` must accept numpy arrays. ``constant`` marks ``g`` as the
    constant ``func(0)``, which lets the cumulative be inverted exactly.
    """

    def __init__(self, func: Callable, a: float, name: str = "g", constant: bool = False):
        a = float(a)
        if not (a > 0.0 and math.isfinite(a)):
            raise DomainError(f"profile endpoint must be positive and finite, got {a!r}")
        self.func = func
        self.a = a
        self.name = name
        self.constant = constant
        grid = np.linspace(0.0, a, 2001)[:-1]
        vals = np.asarray(func(grid), dtype=float)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            bad = grid[~(vals > 0.0)][0] if np.any(~(vals > 0.0)) else float("nan")
            raise DomainError(f"profile {name} must be positive on [0, a); fails at t={bad:.6g}")
        self.value0 = float(vals[0])
        if constant:
            self._table = None
            self.total = self.value0 * a
        else:
            self._table = CumulativeTable(func, a)
            self.total = self._table.total
        if not (self.total > 0.0 and math.isfinite(self.total)):
            raise DomainError(f"profile {name} has invalid integral {self.total!r}")

    def __call__(self, t) -> np.ndarray:
        return np.asarray(self.func(np.asarray(t, dtype=float)), dtype=float)

    def cumulative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._table is None:
            return self.value0 * x
        return self._table(x)

    def inverse_cumulative(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if self._table is None:
            return c / self.value0
        return self._table.inverse(c)

    def table(self, points: int = 201) -> np.ndarray:
        """Sampled ``(t, g(t))`` rows for CSV export."""
        t = np.linspace(0.0, self.a, points)
        return np.column_stack([t, self(t)])

    def __repr__(self) -> str:
        return f"Profile({self.name!r}, a={self.a!r}, total={self.total!r})"


def constant_profile(value: float, b: float, name: str | None = None) -> Profile:
    value = float(value)
    return Profile(lambda t: np.full(np.shape(t), value), b,
                   name=name or f"const({value:g})", constant=True)


@dataclass(frozen=True)
class TransferFunction:
    """Increasing concave ``f`` with ``f(0) = 0``, ``f(a) = b``.

    ``f`` and ``fprime`` are vectorised callables; the public methods add the
    domain check and the removable singularity of ``f(t)/t`` at 0.
    """

    a: float
    b: float
    f: Callable
    fprime: Callable
    fprime0: float
    concave: bool = True
    name: str = "f"

    def _check(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.a) or np.any(np.isnan(t)):
            raise DomainError(f"{self.name}: argument outside [0, {self.a!r}]")
        return t

    def value(self, t) -> np.ndarray:
        return self.f(self._check(t))

    def derivative(self, t) -> np.ndarray:
        return self.fprime(self._check(t))

    def slope(self, t) -> np.ndarray:
        """``f(t)/t``, replaced by ``f'(0)`` below ``NEAR_ZERO``."""
        t = self._check(t)
        small = t < NEAR_ZERO
        safe = np.where(small, 1.0, t)
        return np.where(small, self.fprime0, self.f(safe) / safe)


def euclidean_disc_f() -> TransferFunction:
    """Closed-form transfer from the disc of area 4 onto the unit square fibre.

    ``f(x) = (2/pi) arcsin(sqrt(pi/4) x) + (x/2) sqrt(4/pi - x^2)`` on
    ``[0, 2/sqrt(pi)]`` with ``f'(x) = sqrt(4/pi - x^2)``.
    """
    a = 2.0 / math.sqrt(math.pi)

    def root(t):
        # sqrt(4/pi - t^2), factored so it vanishes exactly at t = a
        return np.sqrt(np.maximum((a - t) * (a + t), 0.0))

    def f(t):
        t = np.asarray(t, dtype=float)
        s = root(t)
        # arcsin(sqrt(pi/4) t) == atan2(t, s); this form keeps f(a) = 1 to rounding
        return (2.0 / math.pi) * np.arctan2(t, s) + 0.5 * t * s

    def fprime(t):
        return root(np.asarray(t, dtype=float))

    return TransferFunction(a=a, b=1.0, f=f, fprime=fprime, fprime0=a, name="euclidean_disc_f")


def build_transfer(g: Profile, h: Profile, check_concavity: bool = True) -> TransferFunction:
    """Solve ``int_0^x g = int_0^f(x) h`` for ``f`` and verify concavity."""
    if abs(g.total - h.total) > 1e-8 * g.total:
        raise ConstructionError(
            f"profiles must have equal integrals: int g = {g.total!r}, int h = {h.total!r}")
    b = h.a
    ratio = h.total / g.total

    def f(t):
        c = g.cumulative(t) * ratio
        return np.clip(h.inverse_cumulative(c), 0.0, b)

    def fprime(t):
        t = np.asarray(t, dtype=float)
        hv = h(f(t))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = g(t) / hv
        # f' -> 0 at the endpoint where g vanishes and h(b) may vanish too
        return np.where(hv > 0.0, out, 0.0)

    tf = TransferFunction(a=g.a, b=b, f=f, fprime=fprime, fprime0=g.value0 / h.value0,
                          name=f"transfer({g.name}->{h.name})")
    worst_t, worst = concavity_violation(tf)
    if check_concavity and worst > CONCAVITY_TOL:
        raise ConstructionError(
            f"transfer is not concave: f'' ~ {worst:.3e} > {CONCAVITY_TOL} at t={worst_t:.6g}")
    return replace(tf, concave=worst <= CONCAVITY_TOL)


def concavity_violation(tf: TransferFunction, points: int = 1000,
                        step: float = CONCAVITY_STEP) -> tuple[float, float]:
    """Largest central second difference of ``f`` on a grid in ``[step, a-step]``."""
    t = np.linspace(step, tf.a - step, points)
    d2 = (tf.f(t + step) - 2.0 * tf.f(t) + tf.f(t - step)) / (step * step)
    i = int(np.argmax(d2))
    return float(t[i]), float(d2[i])


def psum_profile(p, constants: RescaleConstants | None = None,
                 printed_constant: bool = False) -> Profile:
    """Fibre profile ``g(t) = (lam^p - t^p)^(1/p)`` on ``[0, lam]``.

    Its sublevel set is ``lam (K (+)_p K°)`` and ``int g = 1``, matching the
    constant profile 1 on ``[0, 1]``. With ``printed_constant`` the radicand
    uses ``1/rho`` in place of ``lam^p`` (the two agree only at ``p = 2``);
    that variant is kept for side-by-side comparison.
    """
    p = parse_exponent(p)
    if p == INF:
        raise DomainError("p = inf needs no embedding (the p-sum is the product)")
    if constants is None:
        constants = rescale_constants(p)
    elif constants.p != p:
        raise ValueError(f"constants are for p={constants.p}, not p={p}")
    c = 1.0 / constants.rho if printed_constant else constants.lam ** p
    a = c ** (1.0 / p)

    def g(t):
        t = np.asarray(t, dtype=float)
        return np.maximum(c - np.abs(t) ** p, 0.0) ** (1.0 / p)

    name = f"psum(p={p:g}{', printed' if printed_constant else ''})"
    return Profile(g, a, name=name)


def unit_profile() -> Profile:
    return constant_profile(1.0, 1.0, name="unit")
