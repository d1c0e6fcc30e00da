"""MMD estimators, the pairwise H-Gram, its asymptotic variance, and the
J selection criterion used to rank candidate kernels.
"""

from __future__ import annotations

import numpy as np

from .kernels import Kernel, as_sample, gram_matrix

__all__ = [
    "h_gram",
    "mmd_v_statistic",
    "mmd_u_statistic",
    "mmd_u_statistic_from_h",
    "sigma_h1_squared",
    "sigma_h1_squared_from_h",
    "j_criterion",
    "j_criterion_from_h",
]


def _paired(x, y) -> tuple[np.ndarray, np.ndarray]:
    xv, yv = as_sample(x), as_sample(y)
    if xv.shape[1] != yv.shape[1]:
        raise ValueError(f"dimension mismatch: {xv.shape[1]} vs {yv.shape[1]}")
    if xv.shape[0] != yv.shape[0]:
        raise ValueError(
            f"paired statistics need |X| == |Y|, got {xv.shape[0]} and {yv.shape[0]}"
        )
    return xv, yv


def mmd_v_statistic(kernel: Kernel, x, y) -> float:
    """Biased (V-statistic) estimate of the squared MMD.

    Equals ``mean(K_xx) + mean(K_yy) - 2 mean(K_xy)``, which is also the
    difference of means of the empirical witness ``mu_X - mu_Y`` evaluated
    on X and on Y.
    """
    xv, yv = as_sample(x), as_sample(y)
    if xv.shape[1] != yv.shape[1]:
        raise ValueError(f"dimension mismatch: {xv.shape[1]} vs {yv.shape[1]}")
    kxx = gram_matrix(kernel, xv)
    kyy = gram_matrix(kernel, yv)
    kxy = gram_matrix(kernel, xv, yv)
    return float(kxx.mean() + kyy.mean() - 2.0 * kxy.mean())


def h_gram(kernel: Kernel, x, y) -> np.ndarray:
    """Pairwise H matrix for equally sized samples.

    ``H[i, j] = k(x_i, x_j) + k(y_i, y_j) - k(x_i, y_j) - k(x_j, y_i)``;
    symmetric, with a generally nonzero diagonal.
    """
    xv, yv = _paired(x, y)
    kxx = gram_matrix(kernel, xv)
    kyy = gram_matrix(kernel, yv)
    kxy = gram_matrix(kernel, xv, yv)
    return kxx + kyy - kxy - kxy.T


def mmd_u_statistic_from_h(h: np.ndarray) -> float:
    n = h.shape[0]
    if n < 2:
        raise ValueError("U-statistic needs n >= 2")
    return float((h.sum() - np.trace(h)) / (n * (n - 1)))


def mmd_u_statistic(kernel: Kernel, x, y) -> float:
    """Unbiased (U-statistic) estimate of the squared MMD on paired samples:
    ``(1 / (n (n-1))) * sum_{i != j} H_ij``."""
    return mmd_u_statistic_from_h(h_gram(kernel, x, y))


def sigma_h1_squared_from_h(h: np.ndarray) -> float:
    n = h.shape[0]
    if n < 3:
        raise ValueError("variance estimate needs n >= 3")
    h0 = h.copy()
    np.fill_diagonal(h0, 0.0)
    row = h0.sum(axis=1)
    # sum over i of sum_{j != i, l != i, j != l} H_ij H_il
    cross = float((row @ row) - (h0 * h0).sum())
    first = cross / (n * (n - 1) * (n - 2))
    second = mmd_u_statistic_from_h(h) ** 2
    return max(4.0 * (first - second), 0.0)


def sigma_h1_squared(kernel: Kernel, x, y) -> float:
    """Plug-in estimate of the asymptotic variance of the U-statistic under
    the alternative, ``4 (E[H12 H13] - E[H12]^2)``, floored at zero."""
    return sigma_h1_squared_from_h(h_gram(kernel, x, y))


def j_criterion_from_h(h: np.ndarray, eps: float = 1e-8) -> float:
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return mmd_u_statistic_from_h(h) / float(
        np.sqrt(sigma_h1_squared_from_h(h) + eps)
    )


def j_criterion(kernel: Kernel, x, y, eps: float = 1e-8) -> float:
    """Kernel-selection criterion ``MMD_u^2 / sqrt(sigma_H1^2 + eps)``.

    ``eps`` guards degenerate denominators; with ``eps == 0`` the criterion
    is exactly invariant under positive rescaling of the kernel.
    """
    return j_criterion_from_h(h_gram(kernel, x, y), eps=eps)
