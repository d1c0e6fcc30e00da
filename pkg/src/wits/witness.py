"""Stage-I witness construction.

The MMD witness is the difference of empirical kernel mean embeddings on
the training split.  The regularized KFDA witness maximizes the empirical
signal-to-noise ratio over the RKHS and is obtained from the representer
linear system

    (K N_c K / (n_tr + m_tr) + lambda K) alpha = K delta,

where ``delta = (1/n_tr, ..., -1/m_tr, ...)`` and ``N_c`` is the
block-diagonal centering matrix ``diag(P_n / c, P_m / (1 - c))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .kernels import Kernel, as_sample, gram_matrix

__all__ = [
    "WitnessModel",
    "SplitRatio",
    "mmd_witness",
    "build_centering",
    "kfda_witness_exact",
    "evaluate_witness",
    "empirical_snr",
    "delta_vector",
    "solve_kfda_system",
]

#: Base relative jitter added to regularized kernel systems before Cholesky.
BASE_JITTER = 1e-10
#: Relative residual accepted for a KFDA solve.
SOLVE_RTOL = 1e-8
#: Jitter escalations (x10 each) attempted after the initial factorization.
MAX_ESCALATIONS = 3


@dataclass(frozen=True)
class WitnessModel:
    """A learned witness ``h(z) = orientation * sum_i coef_i k(basis_i, z)``.

    ``orientation`` in {+1, -1} is fixed at training time so the witness has
    the larger empirical mean on the X training sample.
    """

    basis: np.ndarray
    coefficients: np.ndarray
    kernel: Kernel
    orientation: int = 1

    def __post_init__(self) -> None:
        basis = as_sample(self.basis)
        coef = np.asarray(self.coefficients, dtype=np.float64).reshape(-1)
        if coef.shape[0] != basis.shape[0]:
            raise ValueError(
                f"{coef.shape[0]} coefficients for {basis.shape[0]} basis points"
            )
        if not np.all(np.isfinite(coef)):
            raise ValueError("non-finite witness coefficients")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        basis = basis.copy()
        coef = coef.copy()
        basis.flags.writeable = False
        coef.flags.writeable = False
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coefficients", coef)


@dataclass(frozen=True)
class SplitRatio:
    """Fraction of each sample assigned to Stage I; training sizes use the
    ceiling rule ``n_tr = ceil(r * n)``."""

    r: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.r < 1.0:
            raise ValueError(f"split ratio must lie in (0, 1), got {self.r}")

    def train_size(self, n: int) -> int:
        exact = self.r * n
        # snap to integer before ceiling so r=0.5, n=100 never yields 51
        if abs(exact - round(exact)) < 1e-9:
            return int(round(exact))
        return int(np.ceil(exact))


def evaluate_witness(witness: WitnessModel, points) -> np.ndarray:
    """Evaluate the witness at each point; returns a vector of length |points|."""
    z = as_sample(points)
    k_zb = gram_matrix(witness.kernel, z, witness.basis)
    return witness.orientation * (k_zb @ witness.coefficients)


def delta_vector(n: int, m: int) -> np.ndarray:
    """The vector with entries ``1/n`` (first block) and ``-1/m`` (second)."""
    return np.concatenate([np.full(n, 1.0 / n), np.full(m, -1.0 / m)])


def mmd_witness(kernel: Kernel, x_train, y_train) -> WitnessModel:
    """Witness ``mu_Xtr - mu_Ytr``: basis is the pooled training sample and
    the coefficients are the delta vector."""
    xv, yv = as_sample(x_train), as_sample(y_train)
    if xv.shape[1] != yv.shape[1]:
        raise ValueError(f"dimension mismatch: {xv.shape[1]} vs {yv.shape[1]}")
    basis = np.vstack([xv, yv])
    coef = delta_vector(xv.shape[0], yv.shape[0])
    return WitnessModel(basis=basis, coefficients=coef, kernel=kernel, orientation=1)


def build_centering(n: int, m: int, c: float) -> np.ndarray:
    """Block-diagonal ``diag(P_n / c, P_m / (1 - c))`` with idempotent
    ``P_l = I_l - (1/l) 1 1^T``."""
    if n < 1 or m < 1:
        raise ValueError("both blocks need at least one point")
    if not 0.0 < c < 1.0:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    out = np.zeros((n + m, n + m))
    out[:n, :n] = (np.eye(n) - np.full((n, n), 1.0 / n)) / c
    out[n:, n:] = (np.eye(m) - np.full((m, m), 1.0 / m)) / (1.0 - c)
    return out


def center_rows(mat: np.ndarray, n: int, m: int, c: float = 0.5) -> np.ndarray:
    """Apply the centering matrix ``diag(P_n/c, P_m/(1-c))`` to the rows of
    ``mat`` in O(rows x cols), without materializing it."""
    out = np.empty_like(mat, dtype=np.float64)
    out[:n] = (mat[:n] - mat[:n].mean(axis=0, keepdims=True)) / c
    out[n:] = (mat[n:] - mat[n:].mean(axis=0, keepdims=True)) / (1.0 - c)
    return out


def _solve_spd(system: np.ndarray, rhs: np.ndarray, trace_scale: float):
    """Cholesky solve with escalating jitter; returns (solution, jitter used).

    Raises NumericalError when the factorization keeps failing or the
    relative residual stays above SOLVE_RTOL.
    """
    rhs_norm = float(np.linalg.norm(rhs))
    jitter = BASE_JITTER * trace_scale
    eye = np.eye(system.shape[0])
    last_err: Exception | None = None
    for _ in range(MAX_ESCALATIONS + 1):
        try:
            cho = scipy.linalg.cho_factor(system + jitter * eye, lower=True)
            sol = scipy.linalg.cho_solve(cho, rhs)
        except scipy.linalg.LinAlgError as err:
            last_err = err
            jitter *= 10.0
            continue
        residual = np.linalg.norm((system + jitter * eye) @ sol - rhs)
        if rhs_norm == 0.0 or residual <= SOLVE_RTOL * rhs_norm:
            return sol, jitter
        jitter *= 10.0
    raise NumericalError(
        f"regularized kernel system not solvable (final jitter {jitter:.1e}): {last_err}"
    )


def solve_kfda_system(
    gram: np.ndarray, n: int, m: int, lam: float, c: float | None = None
) -> np.ndarray:
    """Solve ``(K N_c K / (n+m) + lambda K) alpha = K delta`` for a
    precomputed pooled Gram matrix whose first ``n`` rows are the X block."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    total = n + m
    if gram.shape != (total, total):
        raise ValueError(f"gram shape {gram.shape} does not match n+m={total}")
    if c is None:
        c = n / total
    if not 0.0 < c < 1.0:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    centered = center_rows(gram, n, m, c)
    system = gram @ centered / total + lam * gram
    system = (system + system.T) / 2.0
    rhs = gram @ delta_vector(n, m)
    trace_scale = float(np.trace(gram)) / total
    alpha, _ = _solve_spd(system, rhs, trace_scale)
    return alpha


def kfda_witness_exact(
    kernel: Kernel, lam: float, x_train, y_train, c: float | None = None
) -> WitnessModel:
    """Regularized KFDA witness from the exact representer system.

    ``c`` defaults to ``n_tr / (n_tr + m_tr)``.  The returned orientation
    makes the training mean difference nonnegative (which the quadratic form
    guarantees up to rounding).
    """
    xv, yv = as_sample(x_train), as_sample(y_train)
    if xv.shape[1] != yv.shape[1]:
        raise ValueError(f"dimension mismatch: {xv.shape[1]} vs {yv.shape[1]}")
    n, m = xv.shape[0], yv.shape[0]
    pooled = np.vstack([xv, yv])
    gram = gram_matrix(kernel, pooled)
    alpha = solve_kfda_system(gram, n, m, lam, c)
    train_gap = float(delta_vector(n, m) @ (gram @ alpha))
    orientation = 1 if train_gap >= 0.0 else -1
    return WitnessModel(
        basis=pooled, coefficients=alpha, kernel=kernel, orientation=orientation
    )


def empirical_snr(
    witness: WitnessModel, x, y, c: float | None = None, reg: float = 0.0
) -> float:
    """Empirical signal-to-noise ratio of a witness on a labeled pair of
    samples: ``(mean_X h - mean_Y h) / sqrt(var_X h / c + var_Y h / (1-c) + reg)``
    with unbiased sample variances.
    """
    if reg < 0:
        raise ValueError("reg must be >= 0")
    hx = evaluate_witness(witness, x)
    hy = evaluate_witness(witness, y)
    if hx.size < 2 or hy.size < 2:
        raise ValueError("SNR needs at least 2 points per sample")
    if c is None:
        c = hx.size / (hx.size + hy.size)
    if not 0.0 < c < 1.0:
        raise ValueError(f"c must lie in (0, 1), got {c}")
    pooled_var = hx.var(ddof=1) / c + hy.var(ddof=1) / (1.0 - c) + reg
    if pooled_var <= 0.0:
        raise ValueError("constant witness: zero pooled variance and reg=0")
    return float((hx.mean() - hy.mean()) / np.sqrt(pooled_var))
