"""Seeded randomness, Haar-orthogonal sampling, and sphere concentration.

The generator is pinned to numpy's Philox (a named counter-based 64-bit
generator) keyed by (seed, stream), so every CSV artifact regenerates
bit-for-bit across platforms.  Independent tasks take distinct stream
counters; no generator is ever shared between tasks.

Haar sampling uses the Gaussian-QR construction with the R-diagonal sign
fix; without the sign fix plain QR is not Haar distributed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

RNG_ALGORITHM = "philox4x64"


@dataclass(frozen=True)
class SeededRng:
    """Reproducible RNG handle: (algorithm, 64-bit seed, stream counter)."""

    seed: int
    stream: int = 0
    algorithm: str = RNG_ALGORITHM

    def __post_init__(self):
        if self.algorithm != RNG_ALGORITHM:
            raise DomainError(f"RNG algorithm is pinned to {RNG_ALGORITHM}")
        if not 0 <= self.seed < 2**64 or not 0 <= self.stream < 2**64:
            raise DomainError("seed and stream must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream: int) -> "SeededRng":
        return SeededRng(seed=self.seed, stream=stream)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise DomainError("rng must be a SeededRng or numpy Generator")


def sample_orthogonal(d: int, T: int, rng) -> np.ndarray:
    """Haar-uniform d x T matrix with orthonormal columns."""
    if not d >= T >= 1:
        raise DomainError(f"need d >= T >= 1, got d={d}, T={T}")
    gen = _as_generator(rng)
    G = gen.standard_normal((d, T))
    Q, R = np.linalg.qr(G, mode="reduced")
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def uniform_sphere(d: int, n: int, rng) -> np.ndarray:
    """n uniform unit vectors in R^d, one per row."""
    if d < 1 or n < 1:
        raise DomainError("d and n must be positive")
    gen = _as_generator(rng)
    G = gen.standard_normal((n, d))
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def sphere_marginal_tail(d: int, alpha: float, n_samples: int, rng) -> float:
    """Empirical P(|v_1| > alpha) for v uniform on the unit sphere in R^d.

    The exact tail obeys P(|v_1| > alpha) <= 2 exp(-d alpha^2 / 2); callers
    compare the estimate to that envelope plus binomial slack.
    """
    if d < 2:
        raise DomainError("d must be >= 2")
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must be in (0, 1]")
    gen = _as_generator(rng)
    hits = 0
    remaining = n_samples
    chunk = max(1, min(n_samples, 10**7 // max(d, 1)))
    while remaining > 0:
        m = min(chunk, remaining)
        V = uniform_sphere(d, m, gen)
        hits += int(np.count_nonzero(np.abs(V[:, 0]) > alpha))
        remaining -= m
    return hits / n_samples


def sphere_tail_bound(d: int, alpha: float) -> float:
    """Concentration envelope 2 exp(-d alpha^2 / 2)."""
    return 2.0 * math.exp(-d * alpha**2 / 2.0)


def sphere_tail_exact_2d(alpha: float) -> float:
    """Closed-form 2-D marginal: P(|v_1| > alpha) = 1 - (2/pi) arcsin(alpha)."""
    return 1.0 - (2.0 / math.pi) * math.asin(alpha)
