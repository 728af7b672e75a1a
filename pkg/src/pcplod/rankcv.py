"""Rank selection by random entry hold-out cross-validation.

Each repeat re-marks a random 20% (configurable) of the observed entries as
missing, solves the decomposition at every candidate rank, and scores how
well L + S recovers the held-out values. The rank with the lowest mean
recovery error wins; ties go to the smaller rank. Repeats draw their masks
from independently split child seeds of the master seed, so the same mask
is used across ranks within a repeat and the whole report is reproducible
regardless of scheduling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from .data import MISSING, MaskedMatrix
from .errors import ConfigError, InsufficientDataError, NumericalError
from .solver import Decomposition, PcpConfig, solve

MIN_OBSERVED_FOR_HOLDOUT = 10


@dataclass(frozen=True)
class CvConfig:
    rank_grid: tuple[int, ...] = tuple(range(1, 11))
    holdout_fraction: float = 0.20
    repeats: int = 100
    seed: int = 0

    def __post_init__(self):
        grid = tuple(sorted(set(int(r) for r in self.rank_grid)))
        if not grid or grid[0] < 1:
            raise ConfigError("rank_grid must be a non-empty list of positive integers")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must lie in (0, 1)")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        object.__setattr__(self, "rank_grid", grid)


@dataclass(frozen=True)
class CvReport:
    ranks: tuple[int, ...]
    errors: np.ndarray  # (len(ranks), repeats) held-out recovery errors
    mean_error: np.ndarray
    sd_error: np.ndarray
    selected_rank: int
    seed: int


def holdout_mask(
    X: MaskedMatrix, fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, MaskedMatrix]:
    """Draw a uniform hold-out set over the observed entries.

    Returns (mask, corrupted): ``mask`` flags the held-out cells, and
    ``corrupted`` is a copy of X with those cells re-marked missing. Only
    observed entries are eligible; recovery error against a censored cell
    has no ground truth.
    """
    obs_flat = np.flatnonzero(X.status == 0)
    if obs_flat.size < MIN_OBSERVED_FOR_HOLDOUT:
        raise InsufficientDataError(
            f"only {obs_flat.size} observed entries; need at least {MIN_OBSERVED_FOR_HOLDOUT}"
        )
    count = int(round(fraction * obs_flat.size))
    if count < 1:
        raise InsufficientDataError("hold-out fraction selects no entries")
    chosen = obs_flat[rng.choice(obs_flat.size, size=count, replace=False)]
    mask = np.zeros(X.shape, dtype=bool)
    mask.flat[chosen] = True
    status = X.status.copy()
    status.flat[chosen] = MISSING
    corrupted = MaskedMatrix(X.values, status, X.delta, X.column_names, X.scale)
    return mask, corrupted


def _holdout_error(X, cfg, cv, rank, repeat, child_seed) -> float:
    rng = np.random.default_rng(child_seed)
    mask, corrupted = holdout_mask(X, cv.holdout_fraction, rng)
    try:
        dec: Decomposition = solve(corrupted, replace(cfg, r=rank))
    except NumericalError as exc:
        raise NumericalError(f"rank {rank}, repeat {repeat}: {exc}") from exc
    pred = dec.L + dec.S
    truth = X.values[mask]  # held-out cells were observed by construction
    return float(np.linalg.norm(truth - pred[mask]) / np.linalg.norm(truth))


def cv_select_rank(
    X: MaskedMatrix, cfg: PcpConfig, cv: CvConfig, n_jobs: int = 1
) -> CvReport:
    """Cross-validate the rank bound; deterministic under the master seed.

    ``cfg`` supplies everything but the rank, which is driven over the grid.
    Within a repeat the same corrupted copy is scored at every rank (masks
    depend only on the repeat's child seed), so per-(rank, repeat) tasks can
    run in parallel and reduce in a fixed order.
    """
    for r in cv.rank_grid:
        if r > min(X.shape):
            raise ConfigError(f"rank {r} exceeds min(n, p) = {min(X.shape)}")
    children = np.random.SeedSequence(cv.seed).spawn(cv.repeats)
    tasks = [
        (i, j, rank, children[j])
        for i, rank in enumerate(cv.rank_grid)
        for j in range(cv.repeats)
    ]
    if n_jobs == 1:
        results = [
            _holdout_error(X, cfg, cv, rank, j, seed) for (_, j, rank, seed) in tasks
        ]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_holdout_error)(X, cfg, cv, rank, j, seed)
            for (_, j, rank, seed) in tasks
        )
    errors = np.empty((len(cv.rank_grid), cv.repeats))
    for (i, j, _, _), err in zip(tasks, results):
        errors[i, j] = err
    mean = errors.mean(axis=1)
    sd = errors.std(axis=1, ddof=1) if cv.repeats > 1 else np.zeros(len(cv.rank_grid))
    best = float(mean.min())
    selected = min(r for r, m in zip(cv.rank_grid, mean) if m == best)
    return CvReport(
        ranks=cv.rank_grid,
        errors=errors,
        mean_error=mean,
        sd_error=sd,
        selected_rank=selected,
        seed=cv.seed,
    )


def write_cv_report(report: CvReport, detail_path, summary_path) -> None:
    """Write per-repeat errors and the per-rank summary as CSV."""
    from .data import fmt_float

    with open(detail_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "repeat", "error"])
        for i, rank in enumerate(report.ranks):
            for j in range(report.errors.shape[1]):
                writer.writerow([rank, j, fmt_float(report.errors[i, j])])
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "mean_error", "sd_error"])
        for i, rank in enumerate(report.ranks):
            writer.writerow(
                [rank, fmt_float(report.mean_error[i]), fmt_float(report.sd_error[i])]
            )
