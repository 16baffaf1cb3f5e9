"""Reproducible uniform sampling in p-sum domains and on norm spheres.

Draws come from numpy's Philox generator, which is counter based: the key is
``(seed, stream_id)`` and ``counter`` is the block index the stream starts
at, so independent workers can own disjoint substreams without coordinating.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .embedding import PhasePoint
from .norms import ORIGIN_EXCLUSION, NormOracle, PSumDomain

_MASK64 = (1 << 64) - 1
BOUNDARY_EXCLUSION = 1e-12
MAX_PROPOSALS = 10_000_000
MIN_ACCEPTANCE = 1e-6


class DegenerateDomainError(RuntimeError):
    pass


@dataclass(frozen=True)
class SampleStream:
    seed: int
    stream_id: int = 0
    counter: int = 0

    def generator(self) -> np.random.Generator:
        key = ((self.stream_id & _MASK64) << 64) | (self.seed & _MASK64)
        return np.random.Generator(np.random.Philox(key=key, counter=self.counter))

    def substream(self, stream_id: int) -> "SampleStream":
        return replace(self, stream_id=stream_id, counter=0)

    def advanced(self, rng: np.random.Generator) -> "SampleStream":
        """The stream positioned after everything ``rng`` has consumed."""
        state = rng.bit_generator.state["state"]["counter"]
        used = int(state[0]) | (int(state[1]) << 64)
        return replace(self, counter=used + 1)


def as_generator(source) -> np.random.Generator:
    if isinstance(source, np.random.Generator):
        return source
    if isinstance(source, SampleStream):
        return source.generator()
    raise TypeError(f"expected SampleStream or numpy Generator, got {type(source).__name__}")


def _rejection(propose, accept, size: int, rng, batch: int) -> np.ndarray:
    out = []
    have = 0
    proposals = 0
    while have < size:
        cand = propose(rng, batch)
        proposals += batch
        keep = cand[accept(cand)]
        out.append(keep)
        have += keep.shape[0]
        if have < MIN_ACCEPTANCE * proposals and proposals >= MAX_PROPOSALS:
            raise DegenerateDomainError(
                f"acceptance rate {have / proposals:.2e} after {proposals} proposals")
        # grow batches once the acceptance rate is known
        rate = max(have / proposals, 1e-3)
        batch = int(min(max((size - have) / rate * 1.1, 1024), 1_000_000))
    return np.concatenate(out, axis=0)[:size]


def sample_in_ball(oracle: NormOracle, rng, size: int, radius: float = 1.0,
                   batch: int = 4096) -> np.ndarray:
    """Uniform points of the open ball ``{||x|| < radius}`` by box rejection."""
    rng = as_generator(rng)
    ext = radius * oracle.axis_extents()

    def propose(g, m):
        return g.uniform(-1.0, 1.0, size=(m, oracle.dim)) * ext

    return _rejection(propose, lambda c: oracle.eval(c) < radius, size, rng, batch)


def sample_in_psum(domain: PSumDomain, rng, size: int | None = None,
                   batch: int = 4096) -> PhasePoint:
    """Uniform points of ``domain`` by rejection from its bounding box.

    Points within relative distance ``1e-12`` of the boundary, or within
    ``1e-12`` of the origin in either factor, are rejected.
    """
    rng = as_generator(rng)
    n = domain.n
    s = domain.scale
    ext = np.concatenate([domain.oracle.axis_extents(), domain.oracle.dual().axis_extents()]) * s

    def propose(g, m):
        return g.uniform(-1.0, 1.0, size=(m, 2 * n)) * ext

    def accept(c):
        x, y = c[:, :n], c[:, n:]
        inside = domain.norm(x, y) < s * (1.0 - BOUNDARY_EXCLUSION)
        return inside & (np.linalg.norm(x, axis=1) > ORIGIN_EXCLUSION) \
            & (np.linalg.norm(y, axis=1) > ORIGIN_EXCLUSION)

    pts = _rejection(propose, accept, 1 if size is None else size, rng, batch)
    z = PhasePoint(pts[:, :n], pts[:, n:])
    return PhasePoint(z.x[0], z.y[0]) if size is None else z


def sample_in_product(oracle: NormOracle, rng, size: int, scale: float = 1.0) -> PhasePoint:
    """Uniform points of ``scale (K x K°)``, one rejection sampler per factor."""
    rng = as_generator(rng)
    x = sample_in_ball(oracle, rng, size, scale)
    y = sample_in_ball(oracle.dual(), rng, size, scale)
    return PhasePoint(x, y)


def sample_on_norm_sphere(oracle: NormOracle, radius: float, rng,
                          size: int | None = None) -> np.ndarray:
    """``radius * d / ||d||`` for Gaussian ``d``; full support, not uniform."""
    if not radius > 0.0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    rng = as_generator(rng)
    m = 1 if size is None else size
    d = rng.standard_normal((m, oracle.dim))
    tiny = np.linalg.norm(d, axis=1) < ORIGIN_EXCLUSION
    while np.any(tiny):
        d[tiny] = rng.standard_normal((int(tiny.sum()), oracle.dim))
        tiny = np.linalg.norm(d, axis=1) < ORIGIN_EXCLUSION
    u = radius * d / oracle.eval(d)[:, None]
    return u[0] if size is None else u


def sample_nonzero(rng, size: int, dim: int, spread: float = 1.0) -> np.ndarray:
    """Gaussian vectors with the ``1e-12`` ball around the origin removed."""
    rng = as_generator(rng)
    x = spread * rng.standard_normal((size, dim))
    tiny = np.linalg.norm(x, axis=1) <= ORIGIN_EXCLUSION
    while np.any(tiny):
        x[tiny] = spread * rng.standard_normal((int(tiny.sum()), dim))
        tiny = np.linalg.norm(x, axis=1) <= ORIGIN_EXCLUSION
    return x
