"""Stage-I model selection on the training split only.

``grid_search_cv`` picks (kernel, lambda) for the KFDA witness by
class-stratified cross-validation, scoring each candidate by the
signal-to-noise ratio of the fold-fitted witness on the held-out fold.
``select_kernel_by_j`` ranks candidate kernels for the MMD witness by the
J criterion computed on the training data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .kernels import Kernel, as_sample
from .mmd import j_criterion_from_h
from .witness import _solve_spd, center_rows, delta_vector

__all__ = [
    "ParamGrid",
    "CvReport",
    "default_bandwidths",
    "default_lambdas",
    "default_param_grid",
    "kfold_split",
    "grid_search_cv",
    "select_kernel_by_j",
]

#: Variance floor added to validation SNR denominators.
SCORE_VARIANCE_FLOOR = 1e-12


def default_bandwidths() -> list[float]:
    """Ten bandwidths log-spaced over [1e-3, 1e1]."""
    return [float(b) for b in np.logspace(-3.0, 1.0, 10)]


def default_lambdas() -> list[float]:
    """Five regularization strengths log-spaced over [1e-4, 1e3]."""
    return [float(l) for l in np.logspace(-4.0, 3.0, 5)]


@dataclass(frozen=True)
class ParamGrid:
    """Candidate kernels and ridge strengths for the KFDA witness."""

    kernels: tuple[Kernel, ...]
    lambdas: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.kernels) == 0 or len(self.lambdas) == 0:
            raise ValueError("grid must contain at least one kernel and one lambda")
        if any(l <= 0 for l in self.lambdas):
            raise ValueError("lambdas must be strictly positive")
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "lambdas", tuple(float(l) for l in self.lambdas))


def default_param_grid() -> ParamGrid:
    return ParamGrid(
        kernels=tuple(Kernel(b) for b in default_bandwidths()),
        lambdas=tuple(default_lambdas()),
    )


@dataclass(frozen=True)
class CvReport:
    """Cross-validation outcome: per-candidate fold scores, their means,
    and the selected candidate (ties go to larger lambda, then larger
    bandwidth)."""

    candidates: tuple[tuple[Kernel, float], ...]
    fold_scores: np.ndarray
    mean_scores: np.ndarray
    chosen_kernel: Kernel
    chosen_lambda: float
    seed: int


def kfold_split(x_train, y_train, folds: int, seed: int = 0):
    """Class-stratified k-fold partition of per-class indices.

    Returns a list of ``((x_fit_idx, y_fit_idx), (x_val_idx, y_val_idx))``
    tuples; every index appears in exactly one validation fold.
    """
    xv, yv = as_sample(x_train), as_sample(y_train)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if xv.shape[0] < folds or yv.shape[0] < folds:
        raise ValueError(
            f"each class needs at least {folds} points, got {xv.shape[0]} and {yv.shape[0]}"
        )
    rng = np.random.default_rng(seed)
    x_parts = np.array_split(rng.permutation(xv.shape[0]), folds)
    y_parts = np.array_split(rng.permutation(yv.shape[0]), folds)
    out = []
    for i in range(folds):
        x_val = np.sort(x_parts[i])
        y_val = np.sort(y_parts[i])
        x_fit = np.sort(np.concatenate([x_parts[j] for j in range(folds) if j != i]))
        y_fit = np.sort(np.concatenate([y_parts[j] for j in range(folds) if j != i]))
        out.append(((x_fit, y_fit), (x_val, y_val)))
    return out


def _snr_score(hx: np.ndarray, hy: np.ndarray, c: float) -> float:
    """Validation SNR with a variance floor; exactly constant witnesses
    score -inf instead of erroring."""
    if hx.size < 2 or hy.size < 2:
        return -np.inf
    pooled_var = hx.var(ddof=1) / c + hy.var(ddof=1) / (1.0 - c)
    if pooled_var <= 0.0:
        return -np.inf
    return float((hx.mean() - hy.mean()) / np.sqrt(pooled_var + SCORE_VARIANCE_FLOOR))


def _select_best(candidates, mean_scores) -> int:
    """Index of the best candidate; ties prefer larger lambda, then larger
    bandwidth (the smoother, more regularized model)."""
    return max(
        range(len(candidates)),
        key=lambda i: (mean_scores[i], candidates[i][1], candidates[i][0].bandwidth),
    )


def grid_search_cv(
    grid: ParamGrid,
    x_train,
    y_train,
    folds: int = 5,
    seed: int = 0,
    fold_indices=None,
) -> CvReport:
    """Exhaustive (kernel, lambda) search by stratified cross-validation.

    Per fold and candidate, the KFDA witness is fitted on the fold-fit
    portion and scored by its SNR on the fold-validation portion; the
    candidate with the best mean validation score wins.  ``fold_indices``
    overrides the seed-derived assignment with an explicit partition in
    ``kfold_split`` format.
    """
    xv, yv = as_sample(x_train), as_sample(y_train)
    if xv.shape[1] != yv.shape[1]:
        raise ValueError(f"dimension mismatch: {xv.shape[1]} vs {yv.shape[1]}")
    if fold_indices is None:
        fold_indices = kfold_split(xv, yv, folds, seed)
    else:
        folds = len(fold_indices)
    candidates = [(k, lam) for k in grid.kernels for lam in grid.lambdas]
    scores = np.full((len(candidates), folds), -np.inf)

    for fold_i, ((x_fit_i, y_fit_i), (x_val_i, y_val_i)) in enumerate(fold_indices):
        x_fit, y_fit = xv[x_fit_i], yv[y_fit_i]
        x_val, y_val = xv[x_val_i], yv[y_val_i]
        n_fit, m_fit = x_fit.shape[0], y_fit.shape[0]
        total_fit = n_fit + m_fit
        pooled_fit = np.vstack([x_fit, y_fit])
        pooled_val = np.vstack([x_val, y_val])
        d2_fit = squareform(pdist(pooled_fit, "sqeuclidean"))
        d2_val = cdist(pooled_val, pooled_fit, "sqeuclidean")
        delta = delta_vector(n_fit, m_fit)
        c_fit = n_fit / total_fit
        c_val = x_val.shape[0] / (x_val.shape[0] + y_val.shape[0])

        for k_i, kernel in enumerate(grid.kernels):
            gram = np.exp(-d2_fit / kernel.bandwidth**2)
            gram_val = np.exp(-d2_val / kernel.bandwidth**2)
            base = gram @ center_rows(gram, n_fit, m_fit, c_fit) / total_fit
            base = (base + base.T) / 2.0
            rhs = gram @ delta
            trace_scale = float(np.trace(gram)) / total_fit
            for l_i, lam in enumerate(grid.lambdas):
                cand_i = k_i * len(grid.lambdas) + l_i
                alpha, _ = _solve_spd(base + lam * gram, rhs, trace_scale)
                orientation = 1.0 if float(rhs @ alpha) >= 0.0 else -1.0
                values = orientation * (gram_val @ alpha)
                scores[cand_i, fold_i] = _snr_score(
                    values[: x_val.shape[0]], values[x_val.shape[0] :], c_val
                )

    mean_scores = scores.mean(axis=1)
    if not np.any(np.isfinite(mean_scores)):
        raise ValueError("every (kernel, lambda) candidate produced a degenerate witness")
    best = _select_best(candidates, mean_scores)
    return CvReport(
        candidates=tuple(candidates),
        fold_scores=scores,
        mean_scores=mean_scores,
        chosen_kernel=candidates[best][0],
        chosen_lambda=candidates[best][1],
        seed=seed,
    )


def select_kernel_by_j(
    kernels, x_train, y_train, eps: float = 1e-8
) -> tuple[Kernel, np.ndarray]:
    """Rank candidate kernels by the J criterion on the training split.

    Unbalanced classes are truncated to the common size (the split already
    randomizes order).  Ties prefer the larger bandwidth.
    """
    kernels = tuple(kernels)
    if not kernels:
        raise ValueError("need at least one candidate kernel")
    xv, yv = as_sample(x_train), as_sample(y_train)
    if xv.shape[1] != yv.shape[1]:
        raise ValueError(f"dimension mismatch: {xv.shape[1]} vs {yv.shape[1]}")
    q = min(xv.shape[0], yv.shape[0])
    if q < 3:
        raise ValueError("J criterion needs at least 3 points per class")
    xq, yq = xv[:q], yv[:q]
    d2_xx = squareform(pdist(xq, "sqeuclidean"))
    d2_yy = squareform(pdist(yq, "sqeuclidean"))
    d2_xy = cdist(xq, yq, "sqeuclidean")
    scores = np.empty(len(kernels))
    for i, kernel in enumerate(kernels):
        s2 = kernel.bandwidth**2
        k_xy = np.exp(-d2_xy / s2)
        h = np.exp(-d2_xx / s2) + np.exp(-d2_yy / s2) - k_xy - k_xy.T
        scores[i] = j_criterion_from_h(h, eps=eps)
    best = max(range(len(kernels)), key=lambda i: (scores[i], kernels[i].bandwidth))
    return kernels[best], scores
