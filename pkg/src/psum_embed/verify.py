"""Numerical checks of the embedding and the norm identities behind it.

Every check returns a :class:`VerificationReport`. Sampling is split into
fixed-size chunks, chunk ``i`` drawing from its own Philox substream, so the
result depends on ``(check, parameters, seed)`` only and not on ``workers``.
"""

from __future__ import annotations

import json
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingMap, PhasePoint, lift, lift_array, radial_jacobian, radial_map
from .norms import NormOracle, PSumDomain, dual_norm_numeric_many, two_sum_norm
from .sampling import (SampleStream, sample_in_product, sample_in_psum,
                       sample_nonzero, sample_on_norm_sphere)
from .specfun import (capacity_upper_bound, ehz_bounds, format_exponent,
                      parse_exponent, rescale_constants, volume_ratio)
from .transfer import CONCAVITY_TOL, TransferFunction, concavity_violation

SYMPLECTIC_TOL = 1e-6
FD_REL_STEP = 1e-6
# FD stencils are kept this many stencil radii away from where the norm is not smooth
SMOOTHNESS_MARGIN = 10.0
DUAL_GRADIENT_TOL = 1e-9
TWO_SUM_TOL = 1e-5
JNORM_WITNESS_TOL = 1e-9
JNORM_OVERSHOOT_TOL = 1e-6
JNORM_UNDERSHOOT_TOL = 1e-4
MC_SIGMAS = 3.0


@dataclass
class VerificationReport:
    name: str
    params: dict
    seed: int
    samples: int
    max_residual: float | None = None
    mean_residual: float | None = None
    violations: int = 0
    estimate: float | None = None
    std_error: float | None = None
    expected: float | None = None
    status: str = "PASS"
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "PASS"

    def to_dict(self, include_elapsed: bool = True) -> dict:
        out = {
            "name": self.name,
            "params": dict(sorted(self.params.items())),
            "seed": self.seed,
            "samples": self.samples,
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "violations": self.violations,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "expected": self.expected,
            "status": self.status,
            "details": dict(sorted(self.details.items())),
        }
        if include_elapsed:
            out["elapsed"] = self.elapsed
        return out

    def to_json(self, include_elapsed: bool = True) -> str:
        return dumps(self.to_dict(include_elapsed))

    def summary(self) -> str:
        parts = [f"{self.status} {self.name}"]
        parts += [f"{k}={_fmt(v, '.6g')}" for k, v in sorted(self.params.items())]
        if self.max_residual is not None:
            parts.append(f"max_residual={self.max_residual:.3e}")
        if self.estimate is not None:
            se = f"+-{self.std_error:.2g}" if self.std_error is not None else ""
            parts.append(f"estimate={self.estimate:.10g}{se}")
        if self.expected is not None:
            parts.append(f"expected={self.expected:.10g}")
        parts.append(f"violations={self.violations}")
        return " ".join(parts)


CSV_FIELDS = ("name", "norm", "p", "n", "seed", "samples", "max_residual", "mean_residual",
              "violations", "estimate", "std_error", "expected", "status")


def csv_row(report: VerificationReport) -> list[str]:
    d = report.to_dict(include_elapsed=False)
    vals = {**d, "norm": report.params.get("norm", ""), "p": report.params.get("p", ""),
            "n": report.params.get("n", "")}
    return [_fmt(vals[k]) for k in CSV_FIELDS]


def _fmt(v, spec: str = ".17g") -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if not math.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return format(v, spec)
    return str(v)


def dumps(obj) -> str:
    """Canonical JSON: insertion-ordered keys, floats at 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return '"' + _fmt(v) + '"'
        return format(v, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# -- chunked execution -------------------------------------------------------

def _chunk_streams(stream: SampleStream, tag: str, total: int, chunk: int):
    base = zlib.crc32(tag.encode()) << 32
    sizes = [chunk] * (total // chunk) + ([total % chunk] if total % chunk else [])
    return [(SampleStream(stream.seed, base ^ (stream.stream_id << 20) ^ i, stream.counter), m)
            for i, m in enumerate(sizes)]


def _run_chunks(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _as_stream(stream) -> SampleStream:
    if isinstance(stream, SampleStream):
        return stream
    return SampleStream(int(stream))


def _oracle_params(oracle: NormOracle, **extra) -> dict:
    return {"norm": oracle.name, "n": oracle.dim, **extra}


# -- finite differences -------------------------------------------------------

def finite_difference_jacobian(func, z, rel_step: float = FD_REL_STEP, order: int = 4) -> np.ndarray:
    """Central-difference Jacobian of a batched map ``R^d -> R^k``.

    The step at ``z`` is ``rel_step * (1 + |z|_2)`` rounded to the nearest
    power of two, which makes the stencil points ``z +- c h`` exact in
    floating point. ``order`` 2 uses the 3-point stencil, order 4 the
    5-point one. Returns shape ``(m, k, d)``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    m, d = z.shape
    h = _fd_step(z, rel_step)
    eye = np.eye(d)
    if order == 2:
        offsets, weights = (1.0, -1.0), (0.5, -0.5)
    elif order == 4:
        offsets, weights = (1.0, -1.0, 2.0, -2.0), (8 / 12, -8 / 12, -1 / 12, 1 / 12)
    else:
        raise ValueError(f"order must be 2 or 4, got {order}")
    stencil = np.concatenate([z[:, None, :] + (c * h)[:, None, None] * eye for c in offsets], axis=1)
    values = np.asarray(func(stencil.reshape(-1, d)))
    k = values.shape[-1]
    values = values.reshape(m, len(offsets), d, k)
    deriv = sum(w * values[:, i] for i, w in enumerate(weights)) / h[:, None, None]
    return np.swapaxes(deriv, 1, 2)


def symplectic_form(n: int) -> np.ndarray:
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def symplectic_residual(jac: np.ndarray) -> np.ndarray:
    """``|M^T Omega M - Omega|_F`` for a batch of ``2n x 2n`` matrices."""
    omega = symplectic_form(jac.shape[-1] // 2)
    r = np.swapaxes(jac, -1, -2) @ omega @ jac - omega
    return np.linalg.norm(r, axis=(-2, -1))


def _fd_step(z: np.ndarray, rel_step: float) -> np.ndarray:
    return 2.0 ** np.round(np.log2(rel_step * (1.0 + np.linalg.norm(z, axis=-1))))


def _stencil_reach(z: np.ndarray, rel_step: float, order: int) -> np.ndarray:
    return (2.0 if order == 4 else 1.0) * _fd_step(z, rel_step)


def _regular_interior(emb: EmbeddingMap, domain: PSumDomain, rng, size: int,
                      rel_step: float, order: int) -> tuple[np.ndarray, int]:
    """Uniform points of ``domain`` whose FD stencil stays on the smooth part
    of ``e``: inside the radial domain of the transfer and at least
    ``SMOOTHNESS_MARGIN`` stencil radii from the norm's non-smooth set."""
    lip = float(np.max(emb.oracle.eval(np.eye(emb.n))))
    kept, excluded, have = [], 0, 0
    while have < size:
        z = sample_in_psum(domain, rng, max(size - have, 16)).as_array()
        x = z[:, : emb.n]
        reach = _stencil_reach(z, rel_step, order)
        ok = (emb.oracle.nonsmooth_distance(x) >= SMOOTHNESS_MARGIN * reach) \
            & (emb.oracle.eval(x) + lip * reach < emb.transfer.a)
        excluded += int((~ok).sum())
        kept.append(z[ok])
        have += int(ok.sum())
    return np.concatenate(kept)[:size], excluded


# -- embedding checks ---------------------------------------------------------

def check_symplectic(emb: EmbeddingMap, domain: PSumDomain, samples: int = 1000, stream=0,
                     rel_step: float = FD_REL_STEP, order: int = 4, tol: float = SYMPLECTIC_TOL,
                     workers: int = 1, chunk: int = 250) -> VerificationReport:
    """``|M^T Omega M - Omega|_F`` for the FD Jacobian ``M`` of the lift."""
    t0 = time.perf_counter()
    stream = _as_stream(stream)

    def work(sub, m):
        rng = sub.generator()
        z, excluded = _regular_interior(emb, domain, rng, m, rel_step, order)
        try:
            jac = finite_difference_jacobian(lambda s: lift_array(emb, s), z, rel_step, order)
            res = symplectic_residual(jac)
        except (ArithmeticError, ValueError):
            res = np.array([_pointwise_residual(emb, zi, rel_step, order) for zi in z])
        return res, z, excluded

    parts = _run_chunks(work, _chunk_streams(stream, "symplectic", samples, chunk), workers)
    res = np.concatenate([p[0] for p in parts])
    pts = np.concatenate([p[1] for p in parts])
    bad = ~(res < tol)
    worst = int(np.nanargmax(np.where(np.isfinite(res), res, np.inf)))
    rep = VerificationReport(
        name="symplectic",
        params=_oracle_params(emb.oracle, p=format_exponent(domain.p), scale=domain.scale,
                              momentum_scale=emb.momentum_scale),
        seed=stream.seed, samples=int(res.size),
        max_residual=float(np.max(res)), mean_residual=float(np.mean(res)),
        violations=int(bad.sum()), expected=0.0,
        details={"fd_order": order, "fd_rel_step": rel_step, "tolerance": tol,
                 "excluded_nonsmooth": sum(p[2] for p in parts),
                 "worst_point": pts[worst].tolist()})
    rep.status = "PASS" if rep.violations == 0 else "FAIL"
    rep.elapsed = time.perf_counter() - t0
    return rep


def _pointwise_residual(emb, z, rel_step, order) -> float:
    try:
        jac = finite_difference_jacobian(lambda s: lift_array(emb, s), z[None], rel_step, order)
        return float(symplectic_residual(jac)[0])
    except (ArithmeticError, ValueError):
        return float("inf")


def check_jacobian(emb: EmbeddingMap, domain: PSumDomain, samples: int = 1000, stream=0,
                   tol: float = 1e-6, rel_step: float = FD_REL_STEP, order: int = 4,
                   workers: int = 1, chunk: int = 500) -> VerificationReport:
    """Closed-form ``Dphi`` against finite differences of ``phi`` (max-norm)."""
    t0 = time.perf_counter()
    stream = _as_stream(stream)

    def work(sub, m):
        z, _ = _regular_interior(emb, domain, sub.generator(), m, rel_step, order)
        x = z[:, : emb.n]
        fd = finite_difference_jacobian(lambda s: radial_map(emb, s), x, rel_step, order)
        return np.max(np.abs(fd - radial_jacobian(emb, x)), axis=(1, 2))

    err = np.concatenate(_run_chunks(work, _chunk_streams(stream, "jacobian", samples, chunk), workers))
    return _residual_report("jacobian", _oracle_params(emb.oracle, p=format_exponent(domain.p)),
                            stream, err, tol, t0)


def check_containment(emb: EmbeddingMap, source: PSumDomain, samples: int = 100_000, stream=0,
                      inflate: float = 1.0, workers: int = 1,
                      chunk: int = 25_000) -> VerificationReport:
    """Count images outside the open product ``K x K°``.

    Source points beyond the transfer's radial domain (possible only when
    ``inflate > 1``) have no image and count as violations.
    """
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    domain = source.scaled(inflate)
    oracle = emb.oracle

    def work(sub, m):
        z = sample_in_psum(domain, sub.generator(), m)
        r = oracle.eval(z.x)
        defined = r <= emb.transfer.a
        img = lift(emb, PhasePoint(z.x[defined], z.y[defined]))
        worst = np.full(m, np.inf)
        worst[defined] = np.maximum(oracle.eval(img.x), oracle.dual_eval(img.y))
        return worst, int((~defined).sum())

    parts = _run_chunks(work, _chunk_streams(stream, "containment", samples, chunk), workers)
    worst = np.concatenate([p[0] for p in parts])
    if samples == 0:
        worst = np.zeros(1)
    rep = VerificationReport(
        name="containment",
        params=_oracle_params(oracle, p=format_exponent(source.p), scale=source.scale,
                              inflate=inflate),
        seed=stream.seed, samples=samples,
        max_residual=float(np.max(worst)), mean_residual=float(np.mean(worst)),
        violations=int(np.sum(~(worst < 1.0))),
        details={"undefined_images": sum(p[1] for p in parts),
                 "statistic": "max(||phi(x)||, ||w||_*) per sample; must stay < 1"})
    rep.status = "PASS" if rep.violations == 0 else "FAIL"
    rep.elapsed = time.perf_counter() - t0
    return rep


def check_fiber_contraction(emb: EmbeddingMap, domain: PSumDomain, samples: int = 10_000,
                            stream=0, tol: float = 1e-9) -> VerificationReport:
    """``||Dphi^{-T} y||_* <= ||y||_* / f'(||x||)``; residual is the excess."""
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    z = sample_in_psum(domain, stream.generator(), samples)
    img = lift(emb, z)
    fp = emb.transfer.derivative(emb.oracle.eval(z.x))
    excess = emb.oracle.dual_eval(img.y) - emb.oracle.dual_eval(z.y) / fp
    return _excess_report("fiber_contraction", _oracle_params(emb.oracle, p=format_exponent(domain.p)),
                          stream, excess, tol, t0)


def check_lower_bound(emb: EmbeddingMap, domain: PSumDomain, samples: int = 10_000,
                      stream=0, tol: float = 1e-9) -> VerificationReport:
    """``||Dphi(x) h|| >= f'(||x||) ||h||`` for random directions ``h``."""
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    rng = stream.generator()
    z = sample_in_psum(domain, rng, samples)
    h = sample_nonzero(rng, samples, emb.n)
    jac = radial_jacobian(emb, z.x)
    dh = np.einsum("mij,mj->mi", jac, h)
    fp = emb.transfer.derivative(emb.oracle.eval(z.x))
    excess = fp * emb.oracle.eval(h) - emb.oracle.eval(dh)
    return _excess_report("lower_bound", _oracle_params(emb.oracle, p=format_exponent(domain.p)),
                          stream, excess, tol, t0)


def check_concavity(tf: TransferFunction, tol: float = CONCAVITY_TOL, points: int = 1000) -> VerificationReport:
    """Concavity grid check plus ``f(t)/t >= f'(t)`` and ``f(0)=0, f(a)=b``."""
    t0 = time.perf_counter()
    t_at, d2 = concavity_violation(tf, points)
    t = np.linspace(0.0, tf.a, points + 1)[1:-1]
    slope_gap = float(np.max(tf.derivative(t) - tf.slope(t)))
    ends = max(abs(float(tf.value(0.0))), abs(float(tf.value(tf.a)) - tf.b))
    violations = int(d2 > tol) + int(slope_gap > 1e-9) + int(ends > 1e-10)
    rep = VerificationReport(
        name="concavity", params={"transfer": tf.name}, seed=0, samples=points,
        max_residual=d2, violations=violations,
        details={"worst_t": t_at, "max_fprime_minus_slope": slope_gap, "endpoint_error": ends},
        status="PASS" if violations == 0 else "FAIL")
    rep.elapsed = time.perf_counter() - t0
    return rep


# -- volume ---------------------------------------------------------------------

def mc_volume(domain: PSumDomain, samples: int = 1_000_000, stream=0, workers: int = 1,
              chunk: int = 100_000) -> VerificationReport:
    """Monte Carlo estimate of ``Vol(K (+)_p K°) / Vol(K x K°)``.

    Points are uniform in ``K x K°``; the estimate is the fraction landing in
    the p-sum. PASS iff within three standard errors of :func:`volume_ratio`.
    """
    if 2 * domain.n > 12:
        raise ValueError("mc_volume supports 2n <= 12 only (rejection sampling cost)")
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    unit = PSumDomain(domain.oracle, domain.p, 1.0)

    def work(sub, m):
        z = sample_in_product(domain.oracle, sub.generator(), m)
        return int(np.count_nonzero(unit.contains(z.x, z.y)))

    hits = sum(_run_chunks(work, _chunk_streams(stream, "volume", samples, chunk), workers))
    est = hits / samples
    se = math.sqrt(est * (1.0 - est) / samples)
    expected = volume_ratio(domain.n, domain.p)
    dev = abs(est - expected)
    rep = VerificationReport(
        name="volume", params=_oracle_params(domain.oracle, p=format_exponent(domain.p)),
        seed=stream.seed, samples=samples, max_residual=dev, estimate=est, std_error=se,
        expected=expected, violations=int(dev > MC_SIGMAS * se),
        details={"sigmas": dev / se if se > 0 else (0.0 if dev == 0 else float("inf"))})
    rep.status = "PASS" if rep.violations == 0 else "FAIL"
    rep.elapsed = time.perf_counter() - t0
    return rep


# -- norm identities ------------------------------------------------------------

def _random_points(stream: SampleStream, samples: int, dim: int) -> np.ndarray:
    """Gaussian points with log-uniform radii spanning 1e-6 .. 1e6."""
    rng = stream.generator()
    x = sample_nonzero(rng, samples, dim)
    scale = 10.0 ** rng.uniform(-6, 6, size=(samples, 1))
    return x * scale


def check_dual_gradient(oracle: NormOracle, samples: int = 10_000, stream=0,
                        tol: float = DUAL_GRADIENT_TOL) -> VerificationReport:
    """``||grad N(x)||_* = 1`` for ``x != 0``."""
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    x = _random_points(stream, samples, oracle.dim)
    dev = np.abs(oracle.dual_eval(oracle.grad(x)) - 1.0)
    return _residual_report("dual_gradient", _oracle_params(oracle), stream, dev, tol, t0)


def check_euler_identity(oracle: NormOracle, samples: int = 10_000, stream=0,
                         tol: float = 1e-12) -> VerificationReport:
    """``<grad N(x), x> = N(x)``, measured relative to ``N(x)``."""
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    x = _random_points(stream, samples, oracle.dim)
    nx = oracle.eval(x)
    dev = np.abs(np.einsum("ij,ij->i", oracle.grad(x), x) - nx) / nx
    return _residual_report("euler_identity", _oracle_params(oracle), stream, dev, tol, t0)


def check_cauchy_schwarz(oracle: NormOracle, samples: int = 10_000, stream=0,
                         tol: float = 1e-12) -> VerificationReport:
    """``<x, y> <= ||x|| ||y||_*``; residual is the relative excess."""
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    rng = stream.generator()
    x = sample_nonzero(rng, samples, oracle.dim)
    y = sample_nonzero(rng, samples, oracle.dim)
    bound = oracle.eval(x) * oracle.dual_eval(y)
    excess = (np.einsum("ij,ij->i", x, y) - bound) / bound
    return _excess_report("cauchy_schwarz", _oracle_params(oracle), stream, excess, tol, t0)


def check_supremum_at_x(oracle: NormOracle, samples: int = 1000, probes: int = 1000,
                        stream=0) -> VerificationReport:
    """``<grad N(x), u>`` over the unit sphere peaks at ``u = x/||x||`` with value 1."""
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    rng = stream.generator()
    x = sample_nonzero(rng, samples, oracle.dim)
    g = oracle.grad(x)
    at_x = np.abs(np.einsum("ij,ij->i", g, x) / oracle.eval(x) - 1.0)
    u = sample_on_norm_sphere(oracle, 1.0, rng, probes)
    overshoot = np.max(g @ u.T, axis=1) - 1.0
    violations = int(np.sum(at_x > 1e-12)) + int(np.sum(overshoot > 1e-9))
    rep = VerificationReport(
        name="supremum_at_x", params=_oracle_params(oracle, probes=probes), seed=stream.seed,
        samples=samples, max_residual=float(np.max(at_x)), mean_residual=float(np.mean(at_x)),
        violations=violations, details={"max_probe_overshoot": float(np.max(overshoot))},
        status="PASS" if violations == 0 else "FAIL")
    rep.elapsed = time.perf_counter() - t0
    return rep


def check_lq_duality(oracle, samples: int = 10_000, stream=0, tol: float = 1e-12) -> VerificationReport:
    """Closed-form dual of a weighted ``l_q`` oracle against the ``l_q'``
    oracle with weights ``w^(1-q')`` built from scratch."""
    from .norms import LqNorm
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    qd = oracle.q / (oracle.q - 1.0)
    ref = LqNorm(oracle.dim, qd, oracle.weights ** (1.0 - qd))
    y = _random_points(stream, samples, oracle.dim)
    dev = np.abs(oracle.dual_eval(y) - ref.eval(y)) / ref.eval(y)
    return _residual_report("lq_duality", _oracle_params(oracle), stream, dev, tol, t0)


def check_two_sum_duality(oracle: NormOracle, samples: int = 100, stream=0, restarts: int = 32,
                          tol: float = TWO_SUM_TOL) -> VerificationReport:
    """Numeric dual of ``sqrt(||x||^2 + ||y||_*^2)`` against
    ``sqrt(||x||_*^2 + ||y||^2)``.

    The ascent is a lower bound, so the relative gap ``(closed - numeric) /
    closed`` must lie in ``[-1e-9, tol]``.
    """
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    rng = stream.generator()
    primal = two_sum_norm(oracle)
    n = oracle.dim
    targets = sample_nonzero(rng, samples, 2 * n)
    seeds = rng.integers(0, 2**63, size=samples)
    closed = np.sqrt(oracle.dual_eval(targets[:, :n]) ** 2 + oracle.eval(targets[:, n:]) ** 2)
    results = dual_norm_numeric_many(primal, targets, restarts=restarts, seeds=seeds)
    flagged = sum(r.low_confidence for r in results)
    gaps = (closed - np.array([r.value for r in results])) / closed
    bad = (gaps < -1e-9) | (gaps > tol)
    rep = VerificationReport(
        name="two_sum_duality", params=_oracle_params(oracle, restarts=restarts), seed=stream.seed,
        samples=samples, max_residual=float(np.max(np.abs(gaps))),
        mean_residual=float(np.mean(np.abs(gaps))), violations=int(bad.sum()),
        details={"min_gap": float(np.min(gaps)), "max_gap": float(np.max(gaps)),
                 "low_confidence": int(flagged), "tolerance": tol},
        status="PASS" if not bad.any() else "FAIL")
    rep.elapsed = time.perf_counter() - t0
    return rep


# -- operator norm of J ----------------------------------------------------------

def complex_structure(z: np.ndarray) -> np.ndarray:
    """``J(x, y) = (-y, x)`` on the last axis."""
    n = z.shape[-1] // 2
    return np.concatenate([-z[..., n:], z[..., :n]], axis=-1)


def _tangent(norm: NormOracle, u: np.ndarray, direction: np.ndarray) -> np.ndarray:
    g = norm.grad(u)
    coef = np.einsum("ij,ij->i", g, direction) / np.einsum("ij,ij->i", g, g)
    return direction - coef[:, None] * g


def bilinear_ascent(norm: NormOracle, restarts: int, rng, tol: float = 1e-10,
                    max_iter: int = 5000) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Maximise ``<Ju, v>`` over ``u, v`` on the unit sphere of ``norm``.

    Both factors move along their tangent gradients and are rescaled back to
    the sphere; steps that do not increase the objective are halved. All
    iterates are feasible, so the values are lower bounds.
    """
    u = sample_on_norm_sphere(norm, 1.0, rng, restarts)
    v = sample_on_norm_sphere(norm, 1.0, rng, restarts)
    val = np.einsum("ij,ij->i", complex_structure(u), v)
    step = np.ones(restarts)
    active = np.ones(restarts, dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        ua, va, s = u[idx], v[idx], step[idx, None]
        # d/du <Ju, v> = J^T v = -J v
        cu = ua + s * _tangent(norm, ua, -complex_structure(va))
        cv = va + s * _tangent(norm, va, complex_structure(ua))
        cu /= norm.eval(cu)[:, None]
        cv /= norm.eval(cv)[:, None]
        cval = np.einsum("ij,ij->i", complex_structure(cu), cv)
        better = cval > val[idx]
        acc = idx[better]
        move = np.linalg.norm(cu[better] - ua[better], axis=1) + np.linalg.norm(cv[better] - va[better], axis=1)
        u[acc], v[acc], val[acc] = cu[better], cv[better], cval[better]
        step[acc] *= 1.5
        rej = idx[~better]
        step[rej] *= 0.5
        active[acc[move < tol]] = False
        active[rej[step[rej] < 1e-16]] = False
    return val, u, v


def j_norm(oracle: NormOracle, restarts: int = 32, stream=0, witnesses: int = 100) -> VerificationReport:
    """``sup{<Ju, v> : u, v in T°}`` for ``T = K (+)_2 K°``.

    ``T°`` is the unit ball of ``sqrt(||x||_*^2 + ||y||^2)``. The exact
    witness ``u = (0, u_y)``, ``v = (grad N(u_y), 0)`` with ``||u_y|| = 1``
    gives ``<Jv, u> = 1``; the multi-start ascent must not exceed 1.
    """
    t0 = time.perf_counter()
    stream = _as_stream(stream)
    rng = stream.generator()
    polar = two_sum_norm(oracle).dual()
    uy = sample_on_norm_sphere(oracle, 1.0, rng, witnesses)
    u_w = np.concatenate([np.zeros_like(uy), uy], axis=1)
    v_w = np.concatenate([oracle.grad(uy), np.zeros_like(uy)], axis=1)
    membership = np.maximum(np.abs(polar.eval(u_w) - 1.0), np.abs(polar.eval(v_w) - 1.0))
    witness = np.einsum("ij,ij->i", complex_structure(v_w), u_w)
    wdev = np.abs(witness - 1.0)
    vals, _, _ = bilinear_ascent(polar, restarts, rng)
    best = float(np.max(vals))
    wit_ok = bool(np.all(wdev <= JNORM_WITNESS_TOL) and np.all(membership <= 1e-9))
    over_ok = best <= 1.0 + JNORM_OVERSHOOT_TOL
    under_ok = best >= 1.0 - JNORM_UNDERSHOOT_TOL
    rep = VerificationReport(
        name="jnorm", params=_oracle_params(oracle, restarts=restarts), seed=stream.seed,
        samples=restarts, max_residual=float(np.max(wdev)), estimate=best, expected=1.0,
        violations=int(not wit_ok) + int(not over_ok) + int(not under_ok),
        details={"witnesses": witnesses, "max_witness_deviation": float(np.max(wdev)),
                 "max_witness_membership_error": float(np.max(membership)),
                 "ascent_best": best, "ascent_min": float(np.min(vals)),
                 "convention": "J(x,y)=(-y,x); objective <Ju,v>"})
    rep.status = "PASS" if rep.violations == 0 else "FAIL"
    rep.elapsed = time.perf_counter() - t0
    return rep


# -- constants --------------------------------------------------------------------

def report_bounds(oracle_name: str, p, n: int) -> VerificationReport:
    """Capacity-bound constants for ``K (+)_p K°``; arithmetic only."""
    t0 = time.perf_counter()
    p = parse_exponent(p)
    c = rescale_constants(p)
    details = {
        "rho": c.rho,
        "lambda": c.lam,
        "capacity_upper_bound": capacity_upper_bound(p),
        "volume_ratio": volume_ratio(n, p),
    }
    if p == 2.0:
        lo, hi = ehz_bounds(n)
        details["ehz_lower"], details["ehz_upper"] = lo, hi
    if p >= 2.0:
        details["disc_gromov_width"] = 4.0 * c.rho
    consistency = abs(c.rho * c.lam ** 2 - 1.0)
    rep = VerificationReport(
        name="bounds", params={"norm": oracle_name, "p": format_exponent(p), "n": n}, seed=0,
        samples=0, max_residual=consistency, estimate=details["capacity_upper_bound"],
        violations=int(consistency > 1e-14), details=details)
    rep.status = "PASS" if rep.violations == 0 else "FAIL"
    rep.elapsed = time.perf_counter() - t0
    return rep


# -- helpers ------------------------------------------------------------------------

def _residual_report(name, params, stream, dev, tol, t0) -> VerificationReport:
    dev = np.asarray(dev, dtype=float)
    bad = ~(dev < tol)
    rep = VerificationReport(
        name=name, params=params, seed=stream.seed, samples=int(dev.size),
        max_residual=float(np.max(dev)), mean_residual=float(np.mean(dev)),
        violations=int(bad.sum()), details={"tolerance": tol},
        status="PASS" if not bad.any() else "FAIL")
    rep.elapsed = time.perf_counter() - t0
    return rep


def _excess_report(name, params, stream, excess, tol, t0) -> VerificationReport:
    excess = np.asarray(excess, dtype=float)
    bad = ~(excess <= tol)
    rep = VerificationReport(
        name=name, params=params, seed=stream.seed, samples=int(excess.size),
        max_residual=float(np.max(excess)), mean_residual=float(np.mean(excess)),
        violations=int(bad.sum()), details={"tolerance": tol},
        status="PASS" if not bad.any() else "FAIL")
    rep.elapsed = time.perf_counter() - t0
    return rep
