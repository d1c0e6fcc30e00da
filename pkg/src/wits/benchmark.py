"""Monte-Carlo harness: runs the full two-stage pipeline repeatedly and
estimates rejection rates with binomial error bars.

Reproducibility contract: every trial derives its random streams from
``hash(master seed, trial index, role)``.  The data stream depends only on
the master seed and trial index, never on the method, so sweeps over
methods give paired comparisons on identical draws.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .datasets import TwoSample, blobs_liu, blobs_rotated, load_csv, split, \
    subsample_without_replacement
from .errors import ConfigError
from .falkon import kfda_witness_nystrom
from .kernels import Kernel, median_heuristic_bandwidth
from .model_selection import ParamGrid, grid_search_cv, select_kernel_by_j
from .testing import TestOutcome, asymptotic_witness_test, kfda_boot_test, \
    mmd_boot_test, permutation_witness_test
from .witness import kfda_witness_exact, mmd_witness

__all__ = [
    "METHODS",
    "WITNESS_METHODS",
    "BOOT_METHODS",
    "SWEEP_AXES",
    "ExperimentConfig",
    "PowerEstimate",
    "SweepRow",
    "derive_seed",
    "run_single_trial",
    "estimate_rejection_rate",
    "sweep",
    "write_results_csv",
    "RESULTS_COLUMNS",
]

WITNESS_METHODS = ("kfda-witness", "opt-mmd-witness")
BOOT_METHODS = ("mmd-boot", "kfda-boot")
METHODS = WITNESS_METHODS + BOOT_METHODS
DATASETS = ("blobs-rotated", "blobs-liu", "csv")
THRESHOLDS = ("permutation", "analytic")
SWEEP_AXES = ("split_ratio", "sample_size", "method", "lambda")

RESULTS_COLUMNS = (
    "method", "dataset", "n", "m", "r", "sigma", "lambda",
    "alpha", "B", "R", "rejection_rate", "std_err", "seed",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one rejection-rate experiment.

    ``bandwidths``/``lambdas`` switch Stage I to model selection; leaving
    them None fixes the kernel at ``sigma`` (median heuristic when None)
    and the ridge at ``lam``.  ``falkon_centers`` switches the KFDA fit to
    the Nystrom solver.
    """

    dataset: str = "blobs-rotated"
    n: int = 100
    m: int = 100
    theta: float = 0.0
    null: bool = False
    x_csv: str | None = None
    y_csv: str | None = None
    columns: tuple[int, ...] | None = None
    method: str = "kfda-witness"
    sigma: float | None = None
    lam: float = 1e-2
    bandwidths: tuple[float, ...] | None = None
    lambdas: tuple[float, ...] | None = None
    r: float = 0.5
    cv_folds: int = 5
    falkon_centers: int | None = None
    cg_iterations: int = 50
    alpha: float = 0.05
    num_permutations: int = 200
    threshold: str = "permutation"
    repetitions: int = 1
    seed: int = 0
    workers: int = 1

    def validate(self) -> None:
        problems = []
        if self.dataset not in DATASETS:
            problems.append(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.method not in METHODS:
            problems.append(f"method must be one of {METHODS}, got {self.method!r}")
        if self.threshold not in THRESHOLDS:
            problems.append(f"threshold must be one of {THRESHOLDS}, got {self.threshold!r}")
        if self.n < 1 or self.m < 1:
            problems.append(f"sample sizes must be positive, got n={self.n}, m={self.m}")
        if not 0.0 < self.alpha < 1.0:
            problems.append(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.r < 1.0:
            problems.append(f"r must lie in (0, 1), got {self.r}")
        if self.num_permutations < 1:
            problems.append("B must be >= 1")
        if self.repetitions < 1:
            problems.append("repetitions must be >= 1")
        if self.cv_folds < 2:
            problems.append("cv_folds must be >= 2")
        if self.lam <= 0:
            problems.append(f"lambda must be positive, got {self.lam}")
        if self.sigma is not None and self.sigma <= 0:
            problems.append(f"sigma must be positive, got {self.sigma}")
        if self.bandwidths is not None and (
            len(self.bandwidths) == 0 or any(b <= 0 for b in self.bandwidths)
        ):
            problems.append("bandwidths must be a nonempty list of positive reals")
        if self.lambdas is not None and (
            len(self.lambdas) == 0 or any(l <= 0 for l in self.lambdas)
        ):
            problems.append("lambdas must be a nonempty list of positive reals")
        if self.dataset == "csv" and (self.x_csv is None or self.y_csv is None):
            problems.append("csv dataset needs x_csv and y_csv paths")
        if self.falkon_centers is not None and self.falkon_centers < 1:
            problems.append("falkon_centers must be >= 1")
        if self.cg_iterations < 1:
            problems.append("cg_iterations must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class PowerEstimate:
    """Monte-Carlo rejection rate with binomial standard error."""

    rejection_rate: float
    std_err: float
    repetitions: int
    reject_count: int
    config_fingerprint: str


@dataclass(frozen=True)
class SweepRow:
    """One sweep point: the axis value plus its rejection-rate estimate."""

    axis: str
    value: float | str
    config: ExperimentConfig
    estimate: PowerEstimate


def derive_seed(master: int, *parts) -> int:
    """Stable (cross-run, cross-version) seed derivation via SHA-256."""
    text = "wits:" + str(int(master)) + ":" + ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little")


_CSV_CACHE: dict[tuple, np.ndarray] = {}


def _load_csv_cached(path: str, columns) -> np.ndarray:
    key = (os.path.abspath(path), columns)
    if key not in _CSV_CACHE:
        _CSV_CACHE[key] = load_csv(path, columns=columns)
    return _CSV_CACHE[key]


def _draw_data(config: ExperimentConfig, data_seed: int) -> TwoSample:
    if config.dataset == "blobs-rotated":
        return blobs_rotated(config.n, config.m, config.theta, data_seed)
    if config.dataset == "blobs-liu":
        return blobs_liu(config.n, config.m, data_seed, null=config.null)
    x_full = _load_csv_cached(config.x_csv, config.columns)
    y_full = _load_csv_cached(config.y_csv, config.columns)
    x = x_full if config.n >= x_full.shape[0] else subsample_without_replacement(
        x_full, config.n, derive_seed(data_seed, "x")
    )
    y = y_full if config.m >= y_full.shape[0] else subsample_without_replacement(
        y_full, config.m, derive_seed(data_seed, "y")
    )
    return TwoSample(x=x, y=y, descriptor=f"csv({config.x_csv}, {config.y_csv})")


def _resolve_kernel(config: ExperimentConfig, pooled) -> Kernel:
    if config.sigma is not None:
        return Kernel(config.sigma)
    return Kernel(median_heuristic_bandwidth(pooled))


def _fit_witness(config: ExperimentConfig, x_train, y_train, trial_seed_parts):
    if config.method == "opt-mmd-witness":
        if config.bandwidths is not None and len(config.bandwidths) > 1:
            kernels = [Kernel(b) for b in config.bandwidths]
            kernel, _ = select_kernel_by_j(kernels, x_train, y_train)
        elif config.bandwidths is not None:
            kernel = Kernel(config.bandwidths[0])
        else:
            kernel = _resolve_kernel(config, np.vstack([x_train, y_train]))
        return mmd_witness(kernel, x_train, y_train)

    if config.bandwidths is not None or config.lambdas is not None:
        kernels = (
            tuple(Kernel(b) for b in config.bandwidths)
            if config.bandwidths is not None
            else (_resolve_kernel(config, np.vstack([x_train, y_train])),)
        )
        lambdas = config.lambdas if config.lambdas is not None else (config.lam,)
        report = grid_search_cv(
            ParamGrid(kernels=kernels, lambdas=lambdas),
            x_train,
            y_train,
            folds=config.cv_folds,
            seed=derive_seed(config.seed, *trial_seed_parts, "cv"),
        )
        kernel, lam = report.chosen_kernel, report.chosen_lambda
    else:
        kernel = _resolve_kernel(config, np.vstack([x_train, y_train]))
        lam = config.lam

    if config.falkon_centers is not None:
        return kfda_witness_nystrom(
            kernel,
            lam,
            x_train,
            y_train,
            num_centers=min(config.falkon_centers, len(x_train) + len(y_train)),
            cg_iterations=config.cg_iterations,
            seed=derive_seed(config.seed, *trial_seed_parts, "falkon"),
        )
    return kfda_witness_exact(kernel, lam, x_train, y_train)


def run_single_trial(config: ExperimentConfig, trial_index: int) -> TestOutcome:
    """One draw of the full pipeline; deterministic in (config, trial_index)."""
    config.validate()
    data = _draw_data(config, derive_seed(config.seed, trial_index, "data"))
    seed_parts = (trial_index, config.method)
    test_seed = derive_seed(config.seed, *seed_parts, "test")

    if config.method in BOOT_METHODS:
        kernel = _resolve_kernel(config, np.vstack([data.x, data.y]))
        if config.method == "mmd-boot":
            outcome = mmd_boot_test(
                kernel, data.x, data.y, config.alpha, config.num_permutations, test_seed
            )
        else:
            outcome = kfda_boot_test(
                kernel, config.lam, data.x, data.y, config.alpha,
                config.num_permutations, test_seed,
            )
        return replace(outcome, method=config.method)

    parts = split(data, config.r, derive_seed(config.seed, *seed_parts, "split"))
    witness = _fit_witness(config, parts.x_train, parts.y_train, seed_parts)
    if config.threshold == "analytic":
        outcome = asymptotic_witness_test(witness, parts.x_test, parts.y_test, config.alpha)
    else:
        outcome = permutation_witness_test(
            witness, parts.x_test, parts.y_test, config.alpha,
            config.num_permutations, test_seed,
        )
    return replace(outcome, method=config.method)


def _trial_reject(args) -> tuple[int, bool]:
    config, index = args
    try:
        return index, run_single_trial(config, index).reject
    except Exception as err:
        data_seed = derive_seed(config.seed, index, "data")
        raise RuntimeError(
            f"trial {index} failed (master seed {config.seed}, data seed {data_seed}): {err}"
        ) from err


def _resolve_workers(requested: int) -> int:
    cap = os.environ.get("WITS_THREADS")
    workers = requested
    if cap is not None:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"WITS_THREADS must be an integer, got {cap!r}") from None
    return max(1, workers)


def estimate_rejection_rate(config: ExperimentConfig) -> PowerEstimate:
    """Run ``config.repetitions`` independent trials and report the
    rejection rate with its binomial standard error."""
    config.validate()
    reps = config.repetitions
    workers = _resolve_workers(config.workers)
    tasks = [(config, i) for i in range(reps)]
    if workers == 1:
        results = [_trial_reject(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, reps // (8 * workers))
            results = list(pool.map(_trial_reject, tasks, chunksize=chunk))
    count = sum(1 for _, rejected in results if rejected)
    rate = count / reps
    return PowerEstimate(
        rejection_rate=rate,
        std_err=float(np.sqrt(rate * (1.0 - rate) / reps)),
        repetitions=reps,
        reject_count=count,
        config_fingerprint=config.fingerprint(),
    )


def _apply_axis(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "split_ratio":
        return replace(config, r=float(value))
    if axis == "sample_size":
        return replace(config, n=int(value), m=int(value))
    if axis == "method":
        return replace(config, method=str(value))
    if axis == "lambda":
        return replace(config, lam=float(value), lambdas=None)
    raise ConfigError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")


def sweep(config: ExperimentConfig, axis: str, values) -> list[SweepRow]:
    """One rejection-rate estimate per axis value.  Trial data streams do
    not depend on the method, so method sweeps are paired."""
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for value in values:
        variant = _apply_axis(config, axis, value)
        rows.append(SweepRow(axis=axis, value=value, config=variant,
                             estimate=estimate_rejection_rate(variant)))
    return rows


def _result_record(config: ExperimentConfig, estimate: PowerEstimate) -> dict:
    # methods without a ridge leave lambda blank; CV-selected values are
    # trial-dependent and reported symbolically
    if config.method in ("opt-mmd-witness", "mmd-boot"):
        lam_repr = ""
    elif config.method == "kfda-witness" and config.lambdas is not None:
        lam_repr = "cv"
    else:
        lam_repr = f"{config.lam:g}"
    if config.bandwidths is not None and config.method in WITNESS_METHODS:
        sigma_repr = "grid"
    elif config.sigma is not None:
        sigma_repr = f"{config.sigma:g}"
    else:
        sigma_repr = "median"
    r_repr = f"{config.r:g}" if config.method in WITNESS_METHODS else ""
    return {
        "method": config.method,
        "dataset": config.dataset,
        "n": config.n,
        "m": config.m,
        "r": r_repr,
        "sigma": sigma_repr,
        "lambda": lam_repr,
        "alpha": config.alpha,
        "B": config.num_permutations,
        "R": estimate.repetitions,
        "rejection_rate": estimate.rejection_rate,
        "std_err": estimate.std_err,
        "seed": config.seed,
    }


def write_results_csv(rows, path) -> None:
    """Write (config, estimate) pairs as the stable results schema."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=RESULTS_COLUMNS)
        writer.writeheader()
        for row in rows:
            if isinstance(row, SweepRow):
                writer.writerow(_result_record(row.config, row.estimate))
            else:
                config, estimate = row
                writer.writerow(_result_record(config, estimate))
