"""Synthetic two-sample generators, CSV ingestion, and train/test splitting.

Both Blobs variants are mixtures of nine 2-d Gaussians centered on the grid
{0, 1, 2}^2.  Generators are pure functions of their parameters and seed;
the draw order is fixed and documented (per sample: component indices
first, then one standard-normal vector per point), so tests can replay it.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .kernels import as_sample
from .witness import SplitRatio

__all__ = [
    "TwoSample",
    "SplitData",
    "BLOBS_CENTERS",
    "BLOBS_BASE_COV",
    "LIU_P_COV",
    "liu_covariances",
    "blobs_rotated",
    "blobs_liu",
    "load_csv",
    "subsample_without_replacement",
    "split",
]

#: 3x3 grid of mixture centers.
BLOBS_CENTERS = np.array([[float(i), float(j)] for i in range(3) for j in range(3)])
BLOBS_CENTERS.flags.writeable = False

#: Shared anisotropic covariance of the rotated-blobs P distribution.
BLOBS_BASE_COV = np.diag([0.03, 0.01])
BLOBS_BASE_COV.flags.writeable = False

#: Isotropic per-blob covariance of the second Blobs variant's P.
LIU_P_COV = 0.03 * np.eye(2)
LIU_P_COV.flags.writeable = False


@dataclass(frozen=True)
class TwoSample:
    """A pair of samples (X from P, Y from Q) of equal dimension."""

    x: np.ndarray
    y: np.ndarray
    descriptor: str = ""

    def __post_init__(self) -> None:
        xv, yv = as_sample(self.x), as_sample(self.y)
        if xv.shape[1] != yv.shape[1]:
            raise ValueError(f"dimension mismatch: {xv.shape[1]} vs {yv.shape[1]}")
        object.__setattr__(self, "x", xv)
        object.__setattr__(self, "y", yv)


@dataclass(frozen=True)
class SplitData:
    """Disjoint train/test parts of a TwoSample under a split ratio."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    ratio: float


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _make_liu_covariances() -> np.ndarray:
    """Fixed per-blob anisotropic covariances for the Q mixture: eigenvalues
    in [0.01, 0.09] with random orientations, regenerated deterministically."""
    rng = np.random.default_rng(1860)
    covs = []
    for _ in range(9):
        eigenvalues = rng.uniform(0.01, 0.09, size=2)
        rot = _rotation(rng.uniform(0.0, math.pi))
        covs.append(rot @ np.diag(eigenvalues) @ rot.T)
    out = np.array(covs)
    out.flags.writeable = False
    return out


_LIU_Q_COVS = _make_liu_covariances()


def liu_covariances() -> np.ndarray:
    """The nine fixed Q covariance matrices of the second Blobs variant."""
    return _LIU_Q_COVS


def _sample_mixture(
    num: int, chol_factors: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw from the 9-center mixture: component indices, then unit normals."""
    comps = rng.integers(0, BLOBS_CENTERS.shape[0], size=num)
    noise = rng.standard_normal((num, 2))
    return BLOBS_CENTERS[comps] + np.einsum("nij,nj->ni", chol_factors[comps], noise)


def blobs_rotated(n: int, m: int, theta: float, seed: int = 0) -> TwoSample:
    """Blobs pair where Q's shared covariance is P's rotated by ``theta``.

    ``theta = 0`` draws both samples from P exactly (the null case).
    """
    if n < 1 or m < 1:
        raise ValueError("sample sizes must be positive")
    rng = np.random.default_rng(seed)
    chol_p = np.linalg.cholesky(BLOBS_BASE_COV)
    rot = _rotation(theta)
    chol_q = np.linalg.cholesky(rot @ BLOBS_BASE_COV @ rot.T)
    x = _sample_mixture(n, np.broadcast_to(chol_p, (9, 2, 2)), rng)
    y = _sample_mixture(m, np.broadcast_to(chol_q, (9, 2, 2)), rng)
    return TwoSample(x=x, y=y, descriptor=f"blobs-rotated(theta={theta:g})")


def blobs_liu(n: int, m: int, seed: int = 0, null: bool = False) -> TwoSample:
    """Blobs pair with isotropic P and per-blob anisotropic Q covariances.

    ``null = True`` draws both samples from P.
    """
    if n < 1 or m < 1:
        raise ValueError("sample sizes must be positive")
    rng = np.random.default_rng(seed)
    chol_p = np.linalg.cholesky(LIU_P_COV)
    x = _sample_mixture(n, np.broadcast_to(chol_p, (9, 2, 2)), rng)
    if null:
        y = _sample_mixture(m, np.broadcast_to(chol_p, (9, 2, 2)), rng)
    else:
        chol_q = np.linalg.cholesky(_LIU_Q_COVS)
        y = _sample_mixture(m, chol_q, rng)
    return TwoSample(x=x, y=y, descriptor=f"blobs-liu(null={null})")


def load_csv(path, columns=None, delimiter: str = ",") -> np.ndarray:
    """Load a numeric sample from a headed CSV file, one point per row.

    ``columns`` optionally selects a subset of 0-based column indices.
    Raises DataError with the file line and column of the first offending
    cell; the header row is line 1.
    """
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, a header row is required") from None
        width = len(header)
        if columns is not None:
            columns = list(columns)
            bad = [c for c in columns if not 0 <= c < width]
            if bad:
                raise DataError(f"{path}: column indices {bad} out of range for width {width}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataError(
                    f"{path}: line {line_no}: expected {width} fields, found {len(row)}"
                )
            picked = row if columns is None else [row[c] for c in columns]
            values = []
            for ci, cell in zip(
                range(width) if columns is None else columns, picked
            ):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: line {line_no}: column {ci}: not numeric: {cell!r}"
                    ) from None
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def subsample_without_replacement(sample, size: int, seed: int = 0) -> np.ndarray:
    """Uniform subset of ``size`` points in randomized order."""
    sv = as_sample(sample)
    if size > sv.shape[0]:
        raise ValueError(f"cannot draw {size} points from {sv.shape[0]}")
    if size < 1:
        raise ValueError("size must be >= 1")
    idx = np.random.default_rng(seed).permutation(sv.shape[0])[:size]
    return sv[idx]


def split(two_sample: TwoSample, ratio, seed: int = 0) -> SplitData:
    """Random per-class index partition with ``n_tr = ceil(r n)``."""
    if not isinstance(ratio, SplitRatio):
        ratio = SplitRatio(float(ratio))
    rng = np.random.default_rng(seed)
    parts = []
    for sample in (two_sample.x, two_sample.y):
        total = sample.shape[0]
        n_tr = ratio.train_size(total)
        if n_tr == 0 or n_tr == total:
            raise ValueError(
                f"split ratio {ratio.r} leaves an empty part for sample size {total}"
            )
        perm = rng.permutation(total)
        parts.append((sample[np.sort(perm[:n_tr])], sample[np.sort(perm[n_tr:])]))
    (x_train, x_test), (y_train, y_test) = parts
    return SplitData(
        x_train=x_train, y_train=y_train, x_test=x_test, y_test=y_test, ratio=ratio.r
    )
