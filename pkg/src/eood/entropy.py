"""Nonparametric differential-entropy estimation in nats.

Implements the classic Kozachenko-Leonenko k-nearest-neighbor estimator
under the Chebyshev (max-norm) metric:

    H ~= psi(N) - psi(k) + d*log(2) + (d/N) * sum_i log(eps_i)

where eps_i is the max-norm distance from point i to its k-th nearest
neighbor after a small additive jitter breaks duplicate coordinates.
Joint entropy concatenates the two matrices column-wise; conditional
entropy is H(prev, cur) - H(cur) computed on the *same* jittered
coordinates of `cur`, which makes the chain rule exact by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import AlignmentError, DomainError, InsufficientSamplesError

__all__ = [
    "SampleMatrix",
    "digamma",
    "knn_entropy",
    "joint_entropy",
    "conditional_entropy",
]


def digamma(x: float) -> float:
    """Digamma (psi) for real x > 0, absolute error below 1e-12.

    Uses the recurrence psi(x+1) = psi(x) + 1/x to shift the argument
    above 10, then de Moivre's asymptotic expansion.
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"digamma requires x > 0, got {x}")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    r = 1.0 / x
    value = math.log(x) - 0.5 * r
    r2 = r * r
    # Bernoulli-number tail: B2/2 x^-2, B4/4 x^-4, ...
    value -= r2 * (
        1.0 / 12.0
        - r2 * (1.0 / 120.0 - r2 * (1.0 / 252.0 - r2 * (1.0 / 240.0 - r2 * (1.0 / 132.0))))
    )
    return acc + value


@dataclass(frozen=True)
class SampleMatrix:
    """An (n_samples, dim) matrix of finite reals; rows are sample points."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise DomainError(f"SampleMatrix must be 2-D, got ndim={arr.ndim}")
        if arr.shape[0] < 2:
            raise InsufficientSamplesError(f"SampleMatrix needs >= 2 samples, got {arr.shape[0]}")
        if arr.shape[1] < 1:
            raise DomainError(f"SampleMatrix needs >= 1 dim, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("SampleMatrix contains non-finite values")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _values(points) -> np.ndarray:
    if isinstance(points, SampleMatrix):
        return points.values
    return SampleMatrix(points).values


def _jittered(x: np.ndarray, jitter_scale: float, rng: np.random.Generator | None) -> np.ndarray:
    if jitter_scale < 0:
        raise DomainError("jitter_scale must be >= 0")
    if jitter_scale == 0 or rng is None:
        return x
    # zero-mean uniform, amplitude = jitter_scale
    return x + rng.uniform(-jitter_scale, jitter_scale, size=x.shape)


def _kl_estimate(x: np.ndarray, k: int) -> float:
    """Kozachenko-Leonenko estimate on already-jittered points."""
    n, d = x.shape
    if k < 1:
        raise DomainError("k must be >= 1")
    if n <= k:  # the k-th neighbor besides the point itself must exist
        raise InsufficientSamplesError(f"need n_samples > k = {k}, got {n}")
    tree = cKDTree(x)
    # k+1 because each point is its own 0-distance neighbor
    dist, _ = tree.query(x, k=k + 1, p=np.inf)
    eps = dist[:, k]
    # duplicate rows that survive jitter would give log(0); floor keeps the
    # estimate finite without affecting any non-degenerate case
    eps = np.maximum(eps, np.finfo(np.float64).tiny)
    return digamma(n) - digamma(k) + d * math.log(2.0) + d * float(np.mean(np.log(eps)))


def knn_entropy(points, k: int, jitter_scale: float, rng: np.random.Generator | None) -> float:
    """Differential entropy (nats) of a point cloud."""
    x = _values(points)
    return _kl_estimate(_jittered(x, jitter_scale, rng), k)


def joint_entropy(a, b, k: int, jitter_scale: float, rng: np.random.Generator | None) -> float:
    """Entropy (nats) of the column-wise concatenation [a | b].

    Jitter is drawn for `b` first, then `a`, so a fresh stream with the
    same seed reproduces the exact `b` coordinates that knn_entropy(b)
    would use; conditional_entropy relies on this ordering.
    """
    xa, xb = _values(a), _values(b)
    if xa.shape[0] != xb.shape[0]:
        raise AlignmentError(f"sample counts differ: {xa.shape[0]} vs {xb.shape[0]}")
    xb = _jittered(xb, jitter_scale, rng)
    xa = _jittered(xa, jitter_scale, rng)
    return _kl_estimate(np.hstack([xa, xb]), k)


def conditional_entropy(prev, cur, k: int, jitter_scale: float, rng: np.random.Generator | None) -> float:
    """H(prev | cur) = H(prev, cur) - H(cur), in nats.

    Both terms are computed on the same jittered coordinates of `cur`
    (drawn before `prev`, matching joint_entropy), so
    conditional_entropy + knn_entropy(cur) equals joint_entropy up to
    float rounding when the three calls share a jitter stream seed.
    """
    xp, xc = _values(prev), _values(cur)
    if xp.shape[0] != xc.shape[0]:
        raise AlignmentError(f"sample counts differ: {xp.shape[0]} vs {xc.shape[0]}")
    xc = _jittered(xc, jitter_scale, rng)
    xp = _jittered(xp, jitter_scale, rng)
    return _kl_estimate(np.hstack([xp, xc]), k) - _kl_estimate(xc, k)
