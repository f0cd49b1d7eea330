"""Dense vectors for design summaries and the inner-product math for MIPS.

Vectors come from a pluggable embedding provider or from a deterministic
local fallback (hashed bag-of-words) so the whole pipeline runs offline.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass
from typing import Protocol, Sequence

from .errors import FlowtuneError
from .hashing import hash_token

DEFAULT_FALLBACK_DIM = 256
MIN_FALLBACK_DIM = 8

SOURCE_PROVIDER = "provider"
SOURCE_LOCAL_FALLBACK = "local_fallback"

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmbeddingError(FlowtuneError):
    pass


class DimensionMismatchError(EmbeddingError):
    def __init__(self, expected: int, got: int, context: str = ""):
        suffix = f" ({context})" if context else ""
        super().__init__(f"embedding dim mismatch: expected {expected}, got {got}{suffix}")
        self.expected = expected
        self.got = got


class EmbeddingProvider(Protocol):
    """Anything that maps text to a fixed-length vector."""

    def embed(self, text: str) -> Sequence[float]: ...

    def fingerprint(self) -> str: ...


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    source: str  # provider | local_fallback

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise EmbeddingError("empty embedding vector")
        if self.source not in (SOURCE_PROVIDER, SOURCE_LOCAL_FALLBACK):
            raise EmbeddingError(f"unknown embedding source {self.source!r}")
        for v in self.values:
            if not math.isfinite(v):
                raise EmbeddingError(f"non-finite embedding entry {v!r}")

    @property
    def dim(self) -> int:
        return len(self.values)

    def norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.values))


def embed_text(
    provider: EmbeddingProvider, text: str, expected_dim: int | None = None
) -> EmbeddingVector:
    """Embed text via a provider, optionally enforcing a database dimension."""
    if not text.strip():
        raise EmbeddingError("cannot embed empty text")
    values = tuple(float(v) for v in provider.embed(text))
    vec = EmbeddingVector(values=values, source=SOURCE_PROVIDER)
    if expected_dim is not None and vec.dim != expected_dim:
        raise DimensionMismatchError(expected_dim, vec.dim, context="provider output")
    return vec


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs; everything else is a separator."""
    return _TOKEN_RE.findall(text.lower())


def local_fallback_embed(text: str, dim: int = DEFAULT_FALLBACK_DIM) -> EmbeddingVector:
    """Deterministic hashed bag-of-words embedding with unit L2 norm.

    Each token is hashed by a fixed 64-bit mix to a bucket in [0, dim);
    term counts accumulate and the vector is L2-normalized. Order-invariant
    by construction.
    """
    if dim < MIN_FALLBACK_DIM:
        raise EmbeddingError(f"fallback dim must be >= {MIN_FALLBACK_DIM}, got {dim}")
    tokens = tokenize(text)
    if not tokens:
        raise EmbeddingError("text has no tokens to embed")
    buckets = [0.0] * dim
    for tok in tokens:
        buckets[hash_token(tok) % dim] += 1.0
    norm = math.sqrt(math.fsum(v * v for v in buckets))
    return EmbeddingVector(
        values=tuple(v / norm for v in buckets), source=SOURCE_LOCAL_FALLBACK
    )


def inner_product(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimensionMismatchError(a.dim, b.dim, context="inner product")
    return math.fsum(x * y for x, y in zip(a.values, b.values))


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("cosine similarity undefined for zero vectors")
    return inner_product(a, b) / (na * nb)


def quantize_f32(vec: EmbeddingVector) -> EmbeddingVector:
    """Round entries to float32 precision (the database storage format).

    Databases store 32-bit floats; quantizing at insert keeps save/load a
    bit-exact round trip.
    """
    packed = struct.pack(f"<{vec.dim}f", *vec.values)
    values = struct.unpack(f"<{vec.dim}f", packed)
    return EmbeddingVector(values=values, source=vec.source)
