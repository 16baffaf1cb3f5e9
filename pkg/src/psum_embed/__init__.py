"""Symplectic embeddings of rescaled p-sums ``lam(p) (K (+)_p K°)`` into ``K x K°``."""

from .embedding import EmbeddingMap, PhasePoint, embed_psum, lift, psum_embedding, psum_source
from .norms import LqNorm, NormOracle, ProductNorm, PSumDomain, make_lq_norm, parse_norm_spec
from .specfun import INF, DomainError, gamma, rescale_constants, volume_ratio
from .transfer import build_transfer, euclidean_disc_f, psum_profile

__all__ = [
    "EmbeddingMap", "PhasePoint", "embed_psum", "lift", "psum_embedding", "psum_source",
    "LqNorm", "NormOracle", "ProductNorm", "PSumDomain", "make_lq_norm", "parse_norm_spec",
    "INF", "DomainError", "gamma", "rescale_constants", "volume_ratio",
    "build_transfer", "euclidean_disc_f", "psum_profile",
]

__version__ = "0.1.0"
