"""Synthetic exposure-mixture generator: patterned loadings, lognormal
scores, three noise structures, and quantile censoring.

Randomness uses numpy's seeded PCG64 generators with split child streams
(one per ingredient: loadings, scores, noise, spikes), so the same seed
reproduces the same dataset regardless of which ingredients a scenario uses.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import (
    BELOW_LOD,
    OBSERVED,
    MaskedMatrix,
    MatrixSchema,
    read_dense_csv,
    read_matrix_csv,
    write_masked_csv,
    write_matrix_csv,
)
from .errors import ConfigError, SchemaError

NOISE_KINDS = ("low", "high", "sparse")
NOISE_SD = {"low": 1.0, "high": 5.0, "sparse": 1.0}


@dataclass(frozen=True)
class SimScenario:
    """One cell of the simulation design.

    noise is one of "low" (Gaussian sd 1), "high" (Gaussian sd 5), or
    "sparse" (Gaussian sd 1 plus rare additive spikes). lod_quantile is the
    per-column empirical quantile below which values are recorded as
    censored. Spike probability and magnitude have no canonical values; the
    defaults here are exposed so studies can vary them.
    """

    n: int = 500
    p: int = 16
    r_true: int = 4
    noise: str = "low"
    lod_quantile: float = 0.25
    sparse_prob: float = 0.05
    sparse_magnitude_range: tuple[float, float] = (5.0, 15.0)
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.p < 8 or self.p % 8 != 0:
            raise ConfigError(f"p={self.p} must be a positive multiple of 8")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {NOISE_KINDS}")
        if not 0.0 <= self.lod_quantile < 1.0:
            raise ConfigError("lod_quantile must lie in [0, 1)")
        if not 0.0 <= self.sparse_prob <= 1.0:
            raise ConfigError("sparse_prob must lie in [0, 1]")
        lo, hi = self.sparse_magnitude_range
        if lo <= 0 or hi < lo:
            raise ConfigError("sparse_magnitude_range must satisfy 0 < lo <= hi")
        object.__setattr__(self, "sparse_magnitude_range", (float(lo), float(hi)))


@dataclass(frozen=True)
class SimDataset:
    """Generated truth plus the censored view handed to the methods."""

    loadings: np.ndarray  # r_true x p
    scores: np.ndarray  # n x r_true
    clean: np.ndarray  # scores @ loadings, before noise
    noisy: np.ndarray  # clean + noise (+ spikes), negatives zeroed
    sparse_truth: np.ndarray  # spike magnitudes, zero where no spike
    censored: MaskedMatrix
    seed: int
    meta: dict

    @property
    def shape(self) -> tuple[int, int]:
        return self.clean.shape


def gen_loadings(p: int, r_true: int, rng: np.random.Generator) -> np.ndarray:
    """Pattern-by-chemical loading matrix.

    Each of the four patterns gets p/8 chemicals loading exclusively on it
    (weight 1) and shares p/8 chemicals with each of its two neighbors in the
    cyclic pairing (1,2), (2,3), (3,4), (4,1), i.e. p/4 shared chemicals per
    pattern. A shared chemical splits its unit weight between its two
    patterns as (u, 1-u) with u uniform on (0, 1), so every column sums to 1.
    """
    if r_true != 4:
        raise ConfigError("the pairing scheme is defined for exactly 4 patterns")
    if p < 8 or p % 8 != 0:
        raise ConfigError(f"p={p} must be a positive multiple of 8")
    q = p // 8
    A = np.zeros((4, p))
    for k in range(4):
        A[k, k * q : (k + 1) * q] = 1.0
    pairs = ((0, 1), (1, 2), (2, 3), (3, 0))
    for m, (a, b) in enumerate(pairs):
        cols = slice(p // 2 + m * q, p // 2 + (m + 1) * q)
        u = rng.random(q)
        while (u == 0.0).any():  # keep both shares strictly positive
            u[u == 0.0] = rng.random(int((u == 0.0).sum()))
        A[a, cols] = u
        A[b, cols] = 1.0 - u
    return A


def _censor_columns(noisy: np.ndarray, q: float, column_names) -> MaskedMatrix:
    """Column-specific detection limit at the empirical q-quantile; entries
    strictly below their column's limit are recorded censored."""
    n, p = noisy.shape
    status = np.full((n, p), OBSERVED, dtype=np.int8)
    delta = np.zeros((n, p))
    if q > 0.0:
        k = min(int(round(q * n)), n - 1)
        lods = np.sort(noisy, axis=0)[k, :]
        below = noisy < lods[None, :]
        status[below] = BELOW_LOD
        delta[:] = lods[None, :]
    return MaskedMatrix(noisy, status, delta, column_names)


def default_column_names(p: int) -> tuple[str, ...]:
    return tuple(f"c{j + 1:02d}" for j in range(p))


def gen_dataset(s: SimScenario) -> SimDataset:
    """Generate one dataset for a scenario; deterministic under the seed."""
    k_load, k_score, k_noise, k_sparse = np.random.SeedSequence(s.seed).spawn(4)
    loadings = gen_loadings(s.p, s.r_true, np.random.default_rng(k_load))
    scores = np.random.default_rng(k_score).lognormal(mean=1.0, sigma=1.0, size=(s.n, s.r_true))
    clean = scores @ loadings

    noise = np.random.default_rng(k_noise).normal(0.0, NOISE_SD[s.noise], size=(s.n, s.p))
    sparse_truth = np.zeros((s.n, s.p))
    if s.noise == "sparse":
        g = np.random.default_rng(k_sparse)
        hits = g.random((s.n, s.p)) < s.sparse_prob
        magnitudes = g.uniform(*s.sparse_magnitude_range, size=(s.n, s.p))
        sparse_truth = np.where(hits, magnitudes, 0.0)

    noisy = np.maximum(clean + noise + sparse_truth, 0.0)
    censored = _censor_columns(noisy, s.lod_quantile, default_column_names(s.p))
    meta = {"kind": "simulation", **asdict(s)}
    meta["sparse_magnitude_range"] = list(s.sparse_magnitude_range)
    return SimDataset(
        loadings=loadings,
        scores=scores,
        clean=clean,
        noisy=noisy,
        sparse_truth=sparse_truth,
        censored=censored,
        seed=s.seed,
        meta=meta,
    )


def gen_demo_mixture(seed: int = 2001, n: int = 1000, p: int = 21) -> SimDataset:
    """Application-style synthetic mixture: three overlapping source patterns,
    chemical-specific detection limits, and occasional spike exposures.

    Shaped like a biomonitoring panel (one broad co-exposure pattern plus two
    chemical subgroups, detection frequencies varying by chemical); useful
    for exercising the full pipeline without any real measurements.
    """
    k_load, k_score, k_noise, k_sparse, k_lod = np.random.SeedSequence(seed).spawn(5)

    g = np.random.default_rng(k_load)
    r = 3
    loadings = np.zeros((r, p))
    loadings[0] = g.uniform(0.4, 1.0, p)  # broad co-exposure
    g1 = min(7, p)
    loadings[1, :g1] = g.uniform(0.5, 1.2, g1)  # first subgroup
    g2 = max(p - 7, 0)
    loadings[2, g2:] = g.uniform(0.4, 1.0, p - g2)  # second subgroup

    gs = np.random.default_rng(k_score)
    scores = np.column_stack(
        [
            gs.lognormal(1.0, 0.8, n),
            gs.lognormal(0.0, 0.7, n),
            gs.lognormal(-0.3, 0.6, n),
        ]
    )
    clean = scores @ loadings
    noise = np.random.default_rng(k_noise).normal(0.0, 0.5, size=(n, p))

    gsp = np.random.default_rng(k_sparse)
    hits = gsp.random((n, p)) < 0.03
    sparse_truth = np.where(hits, gsp.uniform(3.0, 10.0, size=(n, p)), 0.0)

    noisy = np.maximum(clean + noise + sparse_truth, 0.0)

    # chemical-specific censoring: detection frequency varies by column
    quantiles = np.random.default_rng(k_lod).uniform(0.02, 0.5, p)
    status = np.full((n, p), OBSERVED, dtype=np.int8)
    delta = np.zeros((n, p))
    for j in range(p):
        k = min(int(round(quantiles[j] * n)), n - 1)
        lod = np.sort(noisy[:, j])[k]
        below = noisy[:, j] < lod
        status[below, j] = BELOW_LOD
        delta[:, j] = lod
    censored = MaskedMatrix(noisy, status, delta, default_column_names(p))

    meta = {
        "kind": "demo-mixture",
        "n": n,
        "p": p,
        "r_true": r,
        "seed": seed,
        "lod_quantiles": [float(q) for q in quantiles],
    }
    return SimDataset(
        loadings=loadings,
        scores=scores,
        clean=clean,
        noisy=noisy,
        sparse_truth=sparse_truth,
        censored=censored,
        seed=seed,
        meta=meta,
    )


def write_dataset(ds: SimDataset, outdir) -> None:
    """Serialize a dataset as a directory of CSVs plus a JSON manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    names = ds.censored.column_names
    pattern_names = tuple(f"pattern{k + 1}" for k in range(ds.loadings.shape[0]))
    write_matrix_csv(ds.clean, outdir / "clean.csv", names)
    write_matrix_csv(ds.noisy, outdir / "noisy.csv", names)
    write_matrix_csv(ds.loadings, outdir / "loadings.csv", names)
    write_matrix_csv(ds.scores, outdir / "scores.csv", pattern_names)
    write_matrix_csv(ds.sparse_truth, outdir / "sparse_truth.csv", names)
    write_masked_csv(ds.censored, outdir / "censored.csv")
    manifest = dict(ds.meta)
    with open(outdir / "dataset.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset(path) -> SimDataset:
    """Load a dataset directory written by :func:`write_dataset`."""
    path = Path(path)
    with open(path / "dataset.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    clean, _ = read_dense_csv(path / "clean.csv")
    noisy, _ = read_dense_csv(path / "noisy.csv")
    loadings, _ = read_dense_csv(path / "loadings.csv")
    scores, _ = read_dense_csv(path / "scores.csv")
    sparse_truth, _ = read_dense_csv(path / "sparse_truth.csv")
    censored = read_matrix_csv(path / "censored.csv", MatrixSchema(sidecar=True))
    return SimDataset(
        loadings=loadings,
        scores=scores,
        clean=clean,
        noisy=noisy,
        sparse_truth=sparse_truth,
        censored=censored,
        seed=int(meta.get("seed", 0)),
        meta=meta,
    )


def read_input_matrix(path) -> MaskedMatrix:
    """Resolve a solver input: a dataset directory or a CSV file.

    Directories must contain ``censored.csv`` with its sidecars. Plain files
    are read with sidecars when present, else with the default schema.
    """
    path = Path(path)
    if path.is_dir():
        target = path / "censored.csv"
        if not target.exists():
            raise SchemaError(f"{path}: no censored.csv in dataset directory")
        return read_matrix_csv(target, MatrixSchema(sidecar=True))
    status_path = path.with_suffix(".status.csv")
    if status_path.exists():
        return read_matrix_csv(path, MatrixSchema(sidecar=True))
    return read_matrix_csv(path)
