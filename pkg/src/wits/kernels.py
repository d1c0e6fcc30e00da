"""Gaussian kernel specifications, Gram matrices, and bandwidth utilities.

Bandwidth convention: ``k_sigma(x, x') = exp(-||x - x'||^2 / sigma^2)``.
The exponent divides by ``sigma^2``, *not* ``2 sigma^2``.  Grids imported
from codebases using the other convention differ by a factor sqrt(2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

__all__ = [
    "Kernel",
    "as_sample",
    "as_point",
    "eval_kernel",
    "gram_matrix",
    "bandwidth_grid",
    "median_heuristic_bandwidth",
]


@dataclass(frozen=True)
class Kernel:
    """A positive-definite kernel, currently only the Gaussian family.

    Parameters
    ----------
    bandwidth : float
        The sigma in ``exp(-||x - x'||^2 / sigma^2)``; must be positive.
    family : str
        Kernel family name; only ``"gaussian"`` is supported.
    """

    bandwidth: float
    family: str = "gaussian"

    def __post_init__(self) -> None:
        if self.family != "gaussian":
            raise ValueError(f"unsupported kernel family: {self.family!r}")
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")


def as_sample(points) -> np.ndarray:
    """Validate and convert a point set to a float64 array of shape (n, d)."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"a sample must be 2-d (n, d), got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"empty sample of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample contains non-finite values")
    return arr


def as_point(x) -> np.ndarray:
    """Validate and convert a single point to a 1-d float64 vector."""
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("empty point")
    return arr


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def eval_kernel(kernel: Kernel, x, y) -> float:
    """Evaluate ``k(x, y)`` for two points; result lies in (0, 1]."""
    xv, yv = as_point(x), as_point(y)
    _check_same_dim(xv, yv)
    diff = xv - yv
    return float(np.exp(-(diff @ diff) / kernel.bandwidth**2))


def gram_matrix(kernel: Kernel, a, b=None) -> np.ndarray:
    """Gram matrix ``K[i, j] = k(a_i, b_j)``.

    When ``b`` is None (or the same array as ``a``) the symmetric matrix is
    computed once on the upper triangle and mirrored, so ``K == K.T`` holds
    exactly and the diagonal is exactly 1.
    """
    av = as_sample(a)
    if b is None or b is a:
        d2 = squareform(pdist(av, "sqeuclidean"))
        return np.exp(-d2 / kernel.bandwidth**2)
    bv = as_sample(b)
    _check_same_dim(av, bv)
    d2 = cdist(av, bv, "sqeuclidean")
    return np.exp(-d2 / kernel.bandwidth**2)


def bandwidth_grid(log10_min: float, log10_max: float, count: int) -> list[Kernel]:
    """``count`` Gaussian kernels with bandwidths log-spaced over
    ``[10**log10_min, 10**log10_max]``, endpoints included."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if log10_min > log10_max:
        raise ValueError("log10_min must be <= log10_max")
    return [Kernel(bandwidth=float(s)) for s in np.logspace(log10_min, log10_max, count)]


def median_heuristic_bandwidth(points) -> float:
    """Median of pairwise Euclidean distances over the pooled sample.

    Conventional default bandwidth when no candidate grid is supplied.
    """
    z = as_sample(points)
    if z.shape[0] < 2:
        raise ValueError("median heuristic needs at least 2 points")
    med = float(np.median(pdist(z)))
    if med <= 0.0:
        raise ValueError("all points identical; median distance is zero")
    return med
