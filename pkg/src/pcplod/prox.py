"""Dense numerical kernels: truncated SVD, shrinkage, and the projections
used by the decomposition solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MaskedMatrix
from .errors import ConfigError, NumericalError


def truncated_svd(M, r: int):
    """Top-r singular triplets of M; returns (U, sigma, V) with V of shape p x r."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ConfigError("expected a 2-D matrix")
    if not 1 <= r <= min(M.shape):
        raise ConfigError(f"rank bound r={r} must lie in [1, {min(M.shape)}]")
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return U[:, :r], s[:r], Vt[:r].T


def effective_rank(M, rel_tol: float = 1e-9) -> int:
    """Number of singular values above rel_tol times the largest."""
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def soft_threshold(M, tau: float):
    """Elementwise sign(m) * max(|m| - tau, 0)."""
    if tau < 0:
        raise ConfigError("tau must be non-negative")
    M = np.asarray(M, dtype=float)
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def project_rank_nonneg(M, r: int, passes: int = 1):
    """Alternate rank-r truncation and clipping at zero, ending on the clip.

    The set {rank <= r} intersected with the non-negative orthant has no
    closed-form projection; alternating the two projections is a cheap
    heuristic whose output is exactly non-negative.
    """
    if passes < 1:
        raise ConfigError("passes must be >= 1")
    M = np.asarray(M, dtype=float)
    for _ in range(passes):
        U, s, V = truncated_svd(M, r)
        M = np.maximum((U * s) @ V.T, 0.0)
    return M


@dataclass(frozen=True)
class FeasibleSet:
    """Per-entry interval bounds for the data-fit term.

    Observed entries pin the fit to the recorded value (a singleton),
    censored entries allow anything from zero to the detection limit, and
    missing entries are unconstrained.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 2:
            raise ConfigError("lower/upper bounds must be 2-D arrays of equal shape")
        if np.any(lower > upper):
            raise ConfigError("interval bounds must satisfy lower <= upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_masked(cls, X: MaskedMatrix) -> "FeasibleSet":
        obs = X.observed
        blod = X.below_lod
        # NaN sentinels at censored/missing cells sit on unselected branches
        lower = np.where(obs, X.values, np.where(blod, 0.0, -np.inf))
        upper = np.where(obs, X.values, np.where(blod, X.delta, np.inf))
        return cls(lower, upper)

    @property
    def shape(self) -> tuple[int, int]:
        return self.lower.shape


def project_feasible(Y, C: FeasibleSet):
    """Clamp every entry of Y into its interval (observed values are fixed points)."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != C.shape:
        raise ConfigError("shape mismatch between Y and the feasible set")
    return np.clip(Y, C.lower, C.upper)


def lod_distance(Y, C: FeasibleSet) -> float:
    """Frobenius distance from Y to the feasible set.

    This is the censoring-aware data-fit penalty: observed entries
    contribute their residual, censored entries contribute nothing inside
    [0, limit] and the overshoot beyond either end otherwise, and missing
    entries contribute nothing. With no censored or missing entries it
    reduces to the plain Frobenius misfit.
    """
    Y = np.asarray(Y, dtype=float)
    return float(np.linalg.norm(Y - project_feasible(Y, C)))


def prox_distance(Y, C: FeasibleSet, t: float):
    """Proximal map of t times the distance to the feasible set.

    Moves Y toward its projection by at most t; exact because the distance
    function is the Euclidean distance to a convex set.
    """
    if t <= 0:
        raise ConfigError("step t must be positive")
    Y = np.asarray(Y, dtype=float)
    P = project_feasible(Y, C)
    d = float(np.linalg.norm(Y - P))
    if d <= t:
        return P
    return Y + (t / d) * (P - Y)
