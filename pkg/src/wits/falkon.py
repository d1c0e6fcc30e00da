"""Scalable approximate KFDA witness via Nystrom centers and preconditioned
conjugate gradient.

The witness is restricted to ``M`` uniformly subsampled centers and the
normal system

    (R_MZ R_MZ^T + (n+m) lambda K_MM) alpha = K_MZ delta,   R_MZ = K_MZ N,

is solved by CG after preconditioning with two M x M Cholesky factors built
from the centers alone.  ``N`` is the label-wise centering, applied
matrix-free, so nothing larger than ``(n+m) x M`` is ever allocated.

The returned factors T, A are lower triangular (``K_MM = T T^T``); the
algorithm's sandwich uses their transposes, so that with ``B = T^-T A^-T``
the operator identity ``B B^T = ((1/M) K_MM N_M K_MM + lambda K_MM)^-1``
holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .kernels import Kernel, as_sample, gram_matrix
from .witness import BASE_JITTER, MAX_ESCALATIONS, WitnessModel

__all__ = [
    "FalkonConfig",
    "FalkonResult",
    "select_centers",
    "falkon_preconditioner",
    "fda_falkon",
    "kfda_witness_nystrom",
]

#: CG stops early once the preconditioned residual drops below this factor
#: of the right-hand side norm.
CG_RTOL = 1e-10


@dataclass(frozen=True)
class FalkonConfig:
    """Settings for the approximate solver: number of Nystrom centers,
    CG iteration budget, ridge strength, and subsampling seed."""

    num_centers: int
    cg_iterations: int
    lam: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_centers < 1:
            raise ValueError("num_centers must be >= 1")
        if self.cg_iterations < 1:
            raise ValueError("cg_iterations must be >= 1")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True)
class FalkonResult:
    """Solver output: coefficients aligned with the selected centers, plus
    the preconditioned residual norms (index 0 is the initial residual)."""

    coefficients: np.ndarray
    centers: np.ndarray
    center_labels: np.ndarray
    residual_norms: np.ndarray


def _check_labels(labels, total: int) -> np.ndarray:
    lab = np.asarray(labels, dtype=np.int64).reshape(-1)
    if lab.shape[0] != total:
        raise ValueError(f"{lab.shape[0]} labels for {total} points")
    if not np.all(np.isin(lab, (-1, 1))):
        raise ValueError("labels must be +1 or -1")
    return lab


def select_centers(points, labels, num_centers: int, seed: int):
    """Uniform subsample of ``num_centers`` (point, label) pairs without
    replacement; deterministic for a fixed seed."""
    z = as_sample(points)
    lab = _check_labels(labels, z.shape[0])
    if num_centers > z.shape[0]:
        raise ValueError(f"cannot select {num_centers} centers from {z.shape[0]} points")
    idx = np.random.default_rng(seed).permutation(z.shape[0])[:num_centers]
    return z[idx], lab[idx]


def _center_by_labels(arr: np.ndarray, labels: np.ndarray, c: float | None) -> np.ndarray:
    """Apply the block centering ``N`` (or ``N_c`` when c is given) to the
    leading axis of ``arr``, grouping rows by label sign."""
    div_pos, div_neg = (1.0, 1.0) if c is None else (c, 1.0 - c)
    out = arr.astype(np.float64, copy=True)
    pos = labels > 0
    neg = ~pos
    if pos.any():
        out[pos] = (out[pos] - out[pos].mean(axis=0, keepdims=True)) / div_pos
    if neg.any():
        out[neg] = (out[neg] - out[neg].mean(axis=0, keepdims=True)) / div_neg
    return out


def _chol_lower_jittered(mat: np.ndarray, attempts: int = MAX_ESCALATIONS):
    jitter = BASE_JITTER * float(np.trace(mat)) / mat.shape[0]
    eye = np.eye(mat.shape[0])
    last_err: Exception | None = None
    for _ in range(attempts):
        try:
            return scipy.linalg.cholesky(mat + jitter * eye, lower=True)
        except scipy.linalg.LinAlgError as err:
            last_err = err
            jitter *= 10.0
    raise NumericalError(f"Cholesky failed after jitter escalation: {last_err}")


def falkon_preconditioner(
    centers, center_labels, kernel: Kernel, lam: float, c: float | None = None
):
    """Two-Cholesky preconditioner over the center subset.

    Returns lower-triangular (T, A) with ``K_MM + jitter = T T^T`` and
    ``(1/M) T^T N_M T + lambda I + jitter = A A^T``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    zm = as_sample(centers)
    lab = _check_labels(center_labels, zm.shape[0])
    num = zm.shape[0]
    k_mm = gram_matrix(kernel, zm)
    t_low = _chol_lower_jittered(k_mm)
    inner = t_low.T @ _center_by_labels(t_low, lab, c) / num + lam * np.eye(num)
    inner = (inner + inner.T) / 2.0
    a_low = _chol_lower_jittered(inner)
    return t_low, a_low


def _conjugate_gradient(apply_op, rhs: np.ndarray, max_iter: int, rtol: float = CG_RTOL):
    """Conjugate-direction solve of an SPD operator equation.

    Uses the conjugate-residual recurrence (the residual-minimizing member
    of the CG family; one operator application per iteration), so the
    returned residual norms are non-increasing on every solve.
    """
    x = np.zeros_like(rhs)
    r = rhs.copy()
    rhs_norm = float(np.linalg.norm(rhs))
    norms = [rhs_norm]
    if rhs_norm == 0.0:
        return x, np.asarray(norms)
    p = r.copy()
    op_r = apply_op(r)
    op_p = op_r.copy()
    r_op_r = float(r @ op_r)
    for it in range(max_iter):
        denom = float(op_p @ op_p)
        if denom <= 0.0 or r_op_r <= 0.0 or not np.isfinite(denom + r_op_r):
            raise NumericalError(
                f"iterative solve breakdown at iteration {it}: "
                f"(Ap, Ap)={denom}, (r, Ar)={r_op_r}"
            )
        step = r_op_r / denom
        x = x + step * p
        r = r - step * op_p
        norms.append(float(np.linalg.norm(r)))
        if norms[-1] < rtol * rhs_norm:
            break
        op_r = apply_op(r)
        r_op_r_new = float(r @ op_r)
        beta = r_op_r_new / r_op_r
        p = r + beta * p
        op_p = op_r + beta * op_p
        r_op_r = r_op_r_new
    return x, np.asarray(norms)


def fda_falkon(
    points,
    labels,
    kernel: Kernel,
    lam: float,
    num_centers: int,
    cg_iterations: int,
    seed: int = 0,
    c: float | None = None,
) -> FalkonResult:
    """Approximate KFDA coefficients over Nystrom centers.

    Runs ``cg_iterations`` steps of preconditioned CG on the normal system;
    ``c=None`` uses the unscaled centering N, a value in (0, 1) uses the
    c-scaled blocks (matching the exact solver's N_c at the same lambda, up
    to an overall scale).
    """
    z = as_sample(points)
    lab = _check_labels(labels, z.shape[0])
    if not (lab > 0).any() or not (lab < 0).any():
        raise ValueError("labels must contain both classes")
    if cg_iterations < 1:
        raise ValueError("cg_iterations must be >= 1")
    total = z.shape[0]
    n_pos = int((lab > 0).sum())
    n_neg = total - n_pos

    centers, center_labels = select_centers(z, lab, num_centers, seed)
    t_low, a_low = falkon_preconditioner(centers, center_labels, kernel, lam, c)
    k_mz = gram_matrix(kernel, centers, z)

    delta = np.empty(total)
    delta[lab > 0] = 1.0 / n_pos
    delta[lab < 0] = -1.0 / n_neg

    def solve_lower(mat, vec, transposed=False):
        return scipy.linalg.solve_triangular(mat, vec, lower=True, trans=1 if transposed else 0)

    ridge = lam * total

    def apply_op(beta: np.ndarray) -> np.ndarray:
        v = solve_lower(a_low, beta, transposed=True)
        w = solve_lower(t_low, v, transposed=True)
        u = _center_by_labels(k_mz.T @ w, lab, c)
        cvec = k_mz @ u
        return solve_lower(a_low, solve_lower(t_low, cvec) + ridge * v)

    rhs = solve_lower(a_low, solve_lower(t_low, k_mz @ delta))
    beta, residual_norms = _conjugate_gradient(apply_op, rhs, cg_iterations)
    alpha = solve_lower(t_low, solve_lower(a_low, beta, transposed=True), transposed=True)
    return FalkonResult(
        coefficients=alpha,
        centers=centers,
        center_labels=center_labels,
        residual_norms=residual_norms,
    )


def kfda_witness_nystrom(
    kernel: Kernel,
    lam: float,
    x_train,
    y_train,
    num_centers: int,
    cg_iterations: int,
    seed: int = 0,
    c: float | None = None,
) -> WitnessModel:
    """Nystrom-approximate KFDA witness; basis points are the selected
    centers and the orientation is fixed on the training means."""
    xv, yv = as_sample(x_train), as_sample(y_train)
    if xv.shape[1] != yv.shape[1]:
        raise ValueError(f"dimension mismatch: {xv.shape[1]} vs {yv.shape[1]}")
    pooled = np.vstack([xv, yv])
    labels = np.concatenate(
        [np.ones(xv.shape[0], dtype=np.int64), -np.ones(yv.shape[0], dtype=np.int64)]
    )
    result = fda_falkon(pooled, labels, kernel, lam, num_centers, cg_iterations, seed, c)
    values = gram_matrix(kernel, pooled, result.centers) @ result.coefficients
    gap = values[: xv.shape[0]].mean() - values[xv.shape[0] :].mean()
    orientation = 1 if gap >= 0.0 else -1
    return WitnessModel(
        basis=result.centers,
        coefficients=result.coefficients,
        kernel=kernel,
        orientation=orientation,
    )
