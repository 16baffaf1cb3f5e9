"""Cumulative integrals of nonnegative profiles and their inverses.

A :class:`CumulativeTable` partitions ``[0, a]`` adaptively into panels on
which a fixed Gauss-Legendre rule is converged. ``F(x)`` is then the table
value at the panel start plus the same rule on ``[t_k, x]``, so ``F`` is
continuous across panel boundaries to rounding and smooth inside them.
"""

from __future__ import annotations

import numpy as np

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def gauss_legendre(func, lo, hi) -> np.ndarray:
    """Fixed 20-point rule on ``[lo, hi]``, vectorised over array endpoints."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t = mid[..., None] + half[..., None] * _GL_NODES
    return half * (func(t) @ _GL_WEIGHTS)


def adaptive_simpson(func, lo: float, hi: float, tol: float = 1e-12,
                     max_depth: int = 60) -> float:
    """Scalar adaptive Simpson quadrature with Richardson correction."""
    f = lambda t: float(func(np.asarray(t, dtype=float)))

    def simpson(a, fa, b, fb):
        m = 0.5 * (a + b)
        fm = f(m)
        return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb = f(lo), f(hi)
    m, fm, whole = simpson(lo, fa, hi, fb)
    total = 0.0
    stack = [(lo, fa, hi, fb, m, fm, whole, tol, 0)]
    while stack:
        a, fa, b, fb, m, fm, whole, eps, depth = stack.pop()
        lm, flm, left = simpson(a, fa, m, fm)
        rm, frm, right = simpson(m, fm, b, fb)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((a, fa, m, fm, lm, flm, left, 0.5 * eps, depth + 1))
            stack.append((m, fm, b, fb, rm, frm, right, 0.5 * eps, depth + 1))
    return total


class CumulativeTable:
    """``F(x) = int_0^x func`` on ``[0, a]`` for a nonnegative ``func``."""

    def __init__(self, func, a: float, tol: float = 1e-15, min_panels: int = 64,
                 max_panels: int = 200_000):
        self.func = func
        self.a = float(a)
        edges = np.linspace(0.0, self.a, min_panels + 1)
        pending = list(zip(edges[:-1], edges[1:]))
        leaves: list[tuple[float, float, float]] = []
        min_width = 1e-14 * self.a
        rough = float(np.sum(gauss_legendre(func, edges[:-1], edges[1:])))
        abs_tol = tol * max(abs(rough), 1e-300)
        while pending:
            lo = np.array([c[0] for c in pending])
            hi = np.array([c[1] for c in pending])
            mid = 0.5 * (lo + hi)
            whole = gauss_legendre(func, lo, hi)
            left = gauss_legendre(func, lo, mid)
            right = gauss_legendre(func, mid, hi)
            ok = (np.abs(whole - left - right) <= abs_tol) | (hi - lo <= min_width)
            pending = []
            for i in range(lo.size):
                if ok[i]:
                    leaves.append((lo[i], mid[i], left[i]))
                    leaves.append((mid[i], hi[i], right[i]))
                else:
                    pending.append((lo[i], mid[i]))
                    pending.append((mid[i], hi[i]))
            if len(leaves) + len(pending) > max_panels:
                raise RuntimeError("cumulative table did not converge; integrand too rough")
        leaves.sort()
        self.nodes = np.array([c[0] for c in leaves] + [self.a])
        increments = np.array([c[2] for c in leaves])
        self.values = np.concatenate([[0.0], np.cumsum(increments)])
        self.total = float(self.values[-1])

    @property
    def panels(self) -> int:
        return self.nodes.size - 1

    def _panel(self, x: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(k, 0, self.panels - 1)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self._panel(x)
        start = self.nodes[k]
        return self.values[k] + gauss_legendre(self.func, start, x)

    def inverse(self, c, tol: float = 1e-13) -> np.ndarray:
        """Solve ``F(s) = c`` by bisection inside the bracketing panel plus one
        Newton step. Requires ``func > 0`` on ``[0, a)`` so ``F`` is strictly
        increasing."""
        c = np.asarray(c, dtype=float)
        k = np.clip(np.searchsorted(self.values, c, side="right") - 1, 0, self.panels - 1)
        lo = self.nodes[k].copy()
        hi = self.nodes[k + 1].copy()
        base = self.values[k]
        width_tol = tol * max(self.a, 1.0)
        while True:
            wide = (hi - lo) > width_tol
            if not np.any(wide):
                break
            mid = 0.5 * (lo + hi)
            below = (base + gauss_legendre(self.func, self.nodes[k], mid)) < c
            lo = np.where(wide & below, mid, lo)
            hi = np.where(wide & ~below, mid, hi)
        s = 0.5 * (lo + hi)
        slope = np.asarray(self.func(s), dtype=float)
        resid = base + gauss_legendre(self.func, self.nodes[k], s) - c
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = s - resid / slope
        good = (slope > 0.0) & (newton >= self.nodes[k]) & (newton <= self.nodes[k + 1])
        return np.where(good, newton, s)
