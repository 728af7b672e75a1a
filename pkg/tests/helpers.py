"""Shared construction helpers for the test suite."""

import numpy as np

from pcplod.data import BELOW_LOD, MISSING, OBSERVED, MaskedMatrix


def observed_matrix(values, names=None) -> MaskedMatrix:
    """All-observed masked matrix from a dense non-negative array."""
    values = np.asarray(values, dtype=float)
    if names is None:
        names = [f"c{j + 1}" for j in range(values.shape[1])]
    return MaskedMatrix(
        values,
        np.full(values.shape, OBSERVED, dtype=np.int8),
        np.zeros(values.shape),
        names,
    )


def masked_matrix(values, status, delta=None, names=None) -> MaskedMatrix:
    """Masked matrix from dense arrays; delta defaults to zeros."""
    values = np.asarray(values, dtype=float)
    status = np.asarray(status, dtype=np.int8)
    if delta is None:
        delta = np.zeros(values.shape)
    if names is None:
        names = [f"c{j + 1}" for j in range(values.shape[1])]
    return MaskedMatrix(values, status, delta, names)


def random_rank_matrix(rng, n, p, r, nonneg=True):
    """Random exactly-rank-r product; non-negative factors by default."""
    if nonneg:
        W = rng.random((n, r)) + 0.1
        H = rng.random((r, p)) + 0.1
    else:
        W = rng.standard_normal((n, r))
        H = rng.standard_normal((r, p))
    return W @ H
