"""Pattern extraction from the low-rank estimate, sparse-event
classification, and the evaluation metrics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import MaskedMatrix
from .errors import ConfigError, UndefinedMetricError
from .prox import effective_rank

DEGENERATE_GAP = 1e-8  # singular values closer than this are treated as tied


@dataclass(frozen=True)
class PatternModel:
    """Top-k SVD of a low-rank estimate, with variance shares."""

    left_vectors: np.ndarray  # n x k
    singular_values: np.ndarray  # (k,)
    right_vectors: np.ndarray  # p x k
    explained_share: np.ndarray  # (k,) of the total spectrum


@dataclass(frozen=True)
class SparseEventTable:
    """Per-entry event classification: +1 high, -1 low, 0 null.

    Thresholds are two standard deviations of the per-chemical residuals
    between observed data and the low-rank fit. Columns with fewer than two
    observed entries cannot supply a threshold and are excluded (kept null).
    """

    classification: np.ndarray  # n x p int8 in {-1, 0, +1}
    threshold: np.ndarray  # (p,) 2 * residual sd, NaN for excluded columns
    residual_sd: np.ndarray  # (p,)
    excluded_columns: tuple[int, ...]
    high_counts: np.ndarray  # (n,)
    low_counts: np.ndarray  # (n,)


@dataclass(frozen=True)
class SparsitySummary:
    nonnull_fraction: float
    event_histogram: np.ndarray  # counts indexed [low_events, high_events]
    capture_rate: float | None  # vs planted spikes, when provided


def extract_patterns(L, k: int) -> PatternModel:
    """Top-k SVD of the low-rank estimate (no centering: L is already the
    model's own signal estimate). Shares are relative to the full spectrum."""
    L = np.asarray(L, dtype=float)
    rank = effective_rank(L)
    if not 1 <= k <= rank:
        raise ConfigError(f"k={k} exceeds the effective rank {rank}")
    U, s, Vt = np.linalg.svd(L, full_matrices=False)
    total = float((s**2).sum())
    return PatternModel(
        left_vectors=U[:, :k],
        singular_values=s[:k],
        right_vectors=Vt[:k].T,
        explained_share=s[:k] ** 2 / total,
    )


def classify_sparse(S, X: MaskedMatrix, L) -> SparseEventTable:
    """Flag entries of S beyond two residual standard deviations per chemical.

    The residual sd per column is computed over observed entries only
    (population variance of X - L there); censored and missing cells never
    enter the threshold.
    """
    S = np.asarray(S, dtype=float)
    L = np.asarray(L, dtype=float)
    if S.shape != X.shape or L.shape != X.shape:
        raise ConfigError("S, X and L shapes must agree")
    obs = X.observed
    sd = np.full(X.p, np.nan)
    excluded = []
    for j in range(X.p):
        col_obs = obs[:, j]
        if int(col_obs.sum()) < 2:
            excluded.append(j)
            continue
        resid = X.values[col_obs, j] - L[col_obs, j]
        sd[j] = float(np.sqrt(np.var(resid)))
    threshold = 2.0 * sd
    classification = np.zeros(X.shape, dtype=np.int8)
    usable = ~np.isnan(threshold)
    t = np.where(usable, threshold, np.inf)
    classification[S > t[None, :]] = 1
    classification[S < -t[None, :]] = -1
    return SparseEventTable(
        classification=classification,
        threshold=threshold,
        residual_sd=sd,
        excluded_columns=tuple(excluded),
        high_counts=(classification == 1).sum(axis=1),
        low_counts=(classification == -1).sum(axis=1),
    )


def relative_error(truth, pred, mask=None) -> float:
    """Frobenius error over truth norm, optionally over an entry subset."""
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape:
        raise ConfigError("truth and pred shapes must agree")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != truth.shape:
            raise ConfigError("mask shape must agree with the matrices")
        truth = truth[mask]
        pred = pred[mask]
    denom = float(np.linalg.norm(truth))
    if denom == 0.0:
        raise UndefinedMetricError("relative error undefined: truth has zero norm")
    return float(np.linalg.norm(truth - pred)) / denom


def _top_vectors(M, k: int, side: str) -> tuple[np.ndarray, np.ndarray]:
    U, s, Vt = np.linalg.svd(np.asarray(M, dtype=float), full_matrices=False)
    vecs = U[:, :k] if side == "left" else Vt[:k].T
    return vecs, s


def eigenvector_error(
    truth_matrix,
    est_matrix,
    k: int,
    side: str = "left",
    alignment: str = "sign",
) -> float:
    """Relative Frobenius distance between the top-k singular vectors.

    ``alignment="sign"`` flips each estimated vector to match the sign of its
    inner product with the truth counterpart; ``"procrustes"`` applies the
    best orthogonal rotation instead (robust when singular values repeat).
    Near-ties in either spectrum trigger an ambiguity warning.
    """
    if side not in ("left", "right"):
        raise ConfigError("side must be 'left' or 'right'")
    if alignment not in ("sign", "procrustes"):
        raise ConfigError("alignment must be 'sign' or 'procrustes'")
    if k < 1:
        raise ConfigError("k must be >= 1")
    for name, M in (("truth", truth_matrix), ("estimate", est_matrix)):
        if effective_rank(M) < k:
            raise ConfigError(f"k={k} exceeds the rank of the {name} matrix")
    T, s_t = _top_vectors(truth_matrix, k, side)
    E, s_e = _top_vectors(est_matrix, k, side)
    for s in (s_t, s_e):
        upto = min(k + 1, s.size)
        if np.diff(s[:upto]).size and np.min(np.abs(np.diff(s[:upto]))) < DEGENERATE_GAP:
            warnings.warn(
                "nearly repeated singular values: vector comparison is ambiguous",
                RuntimeWarning,
                stacklevel=2,
            )
            break
    if alignment == "sign":
        signs = np.sign(np.einsum("ij,ij->j", T, E))
        signs[signs == 0] = 1.0
        E = E * signs[None, :]
    else:
        A, _, Bt = np.linalg.svd(E.T @ T)
        E = E @ (A @ Bt)
    return float(np.linalg.norm(T - E) / np.linalg.norm(T))


def sparsity_stats(S, table: SparseEventTable, sparse_truth=None) -> SparsitySummary:
    """Non-null fraction, the participant event histogram, and the capture
    rate of planted spikes when a truth matrix is supplied."""
    S = np.asarray(S, dtype=float)
    nonnull = float((table.classification != 0).mean())
    max_low = int(table.low_counts.max(initial=0))
    max_high = int(table.high_counts.max(initial=0))
    hist = np.zeros((max_low + 1, max_high + 1), dtype=int)
    for lo, hi in zip(table.low_counts, table.high_counts):
        hist[lo, hi] += 1
    capture = None
    if sparse_truth is not None:
        planted = np.asarray(sparse_truth, dtype=float) > 0
        if planted.any():
            captured = (table.classification == 1) & planted
            capture = float(captured.sum() / planted.sum())
    return SparsitySummary(
        nonnull_fraction=nonnull,
        event_histogram=hist,
        capture_rate=capture,
    )
