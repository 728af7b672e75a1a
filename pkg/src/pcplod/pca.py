"""PCA baseline: detection-limit imputation, component retention by explained
variance, and truncated reconstruction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import MaskedMatrix
from .errors import ConfigError, DegenerateColumnError, DomainError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PcaModel:
    """Fitted PCA: column means, all right eigenvectors, scores, spectrum.

    ``k_selected`` is the smallest number of leading components whose
    cumulative variance share reaches the retention threshold.
    """

    means: np.ndarray  # (p,)
    rotation: np.ndarray  # (p, m) right eigenvectors, all m = min(n, p)
    scores: np.ndarray  # (n, m) coordinates on the components
    all_singular_values: np.ndarray  # (m,)
    k_selected: int

    @property
    def explained_share(self) -> np.ndarray:
        s2 = self.all_singular_values**2
        return s2 / s2.sum()


def impute_lod(X: MaskedMatrix) -> np.ndarray:
    """Dense copy with censored cells replaced by limit / sqrt(2).

    Missing cells (when present) get the column mean of the non-missing,
    already-imputed entries.
    """
    filled = np.where(X.observed, X.values, np.where(X.below_lod, X.delta / math.sqrt(2.0), np.nan))
    miss = X.missing
    if miss.any():
        for j in range(X.p):
            col_miss = miss[:, j]
            if not col_miss.any():
                continue
            known = filled[~col_miss, j]
            if known.size == 0:
                raise DegenerateColumnError(
                    f"column '{X.column_names[j]}' has no non-missing entries to impute from"
                )
            filled[col_miss, j] = known.mean()
    return filled


def fit_pca(M, variance_threshold: float = 0.80) -> PcaModel:
    """Center columns, factor, and pick the smallest k explaining the threshold.

    Variance shares are singular values squared over their total; the
    retention rule keeps the first k components whose cumulative share
    reaches ``variance_threshold``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 2:
        raise DomainError("PCA needs a 2-D matrix with at least two rows")
    if not np.isfinite(M).all():
        raise DomainError("PCA input must be finite (impute first)")
    if not 0.0 < variance_threshold <= 1.0:
        raise ConfigError("variance_threshold must lie in (0, 1]")
    means = M.mean(axis=0)
    centered = M - means
    U, s, Vt = np.linalg.svd(centered, full_matrices=False)
    total = float((s**2).sum())
    if total == 0.0:
        raise DomainError("zero total variance: all rows identical")
    cumshare = np.cumsum(s**2) / total
    # small slack so thresholds reachable only up to rounding still count
    k = int(np.searchsorted(cumshare, variance_threshold - 1e-12, side="left")) + 1
    k = min(k, s.size)
    return PcaModel(
        means=means,
        rotation=Vt.T,
        scores=U * s,
        all_singular_values=s,
        k_selected=k,
    )


def reconstruct(model: PcaModel, k: int) -> np.ndarray:
    """Rank-k reconstruction: leading scores times rotation, plus the means."""
    if not 1 <= k <= model.all_singular_values.size:
        raise ConfigError(f"k={k} out of range [1, {model.all_singular_values.size}]")
    return model.scores[:, :k] @ model.rotation[:, :k].T + model.means


def fit_on_masked(X: MaskedMatrix, variance_threshold: float = 0.80) -> tuple[PcaModel, np.ndarray]:
    """Impute a masked matrix, fit PCA, and return (model, reconstruction).

    The reconstruction is truncated at the retained component count.
    """
    if not X.below_lod.any() and not X.missing.any():
        log.info("input fully observed: no imputation performed")
        M = np.where(X.observed, X.values, 0.0)
    else:
        M = impute_lod(X)
    model = fit_pca(M, variance_threshold)
    return model, reconstruct(model, model.k_selected)
