"""Masked mixture matrices with detection-limit metadata, and CSV round-trip I/O.

A measurement matrix holds one status per cell: observed, censored below a
detection limit (with the limit recorded), or missing. All file artifacts are
UTF-8 comma-separated text with a header row; numeric cells are written with
enough digits to round-trip float64 exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateColumnError, DomainError, ParseError, SchemaError

OBSERVED = 0
BELOW_LOD = 1
MISSING = 2

STATUS_TOKENS = {"O": OBSERVED, "L": BELOW_LOD, "M": MISSING}
TOKEN_OF_STATUS = {OBSERVED: "O", BELOW_LOD: "L", MISSING: "M"}

LOD_TOKEN = "<LOD"
NA_TOKENS = ("NA", "NaN", "nan")


def fmt_float(x) -> str:
    """Format a float with 17 significant digits (trailing zeros trimmed).

    17 significant decimal digits uniquely determine a float64, so values
    survive a write/read cycle bit-exactly.
    """
    return format(float(x), ".17g")


@dataclass(frozen=True)
class MatrixSchema:
    """Declares how a matrix CSV encodes censored and missing cells.

    lod_row
        The first row after the header lists one detection limit per column;
        cells that are empty or hold the literal ``<LOD`` token are censored
        at that limit. ``NA`` cells are missing.
    sidecar
        Per-cell statuses and detection limits live in companion files
        ``<stem>.status.csv`` ({O, L, M} tokens) and ``<stem>.delta.csv``.
    columns
        Expected header, checked when given.
    """

    lod_row: bool = False
    sidecar: bool = False
    columns: tuple[str, ...] | None = None


@dataclass(frozen=True)
class MaskedMatrix:
    """n x p measurement matrix where each cell is observed, censored, or missing.

    ``values`` holds data only where ``status == OBSERVED``; everywhere else the
    cell is a NaN sentinel and is never read as data (the constructor enforces
    this, so two matrices that differ only in what garbage sat at censored or
    missing positions compare identical). ``delta`` holds the cell-specific
    detection limit; it is meaningful where ``status == BELOW_LOD`` and may
    carry bookkeeping values elsewhere. ``scale`` records per-column divisors
    applied by :func:`standardize_columns`.

    Instances are immutable after construction and safe to share across
    threads for reading.
    """

    values: np.ndarray
    status: np.ndarray
    delta: np.ndarray
    column_names: tuple[str, ...]
    scale: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        status = np.array(self.status, dtype=np.int8)
        delta = np.array(self.delta, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        n, p = values.shape
        if n < 1 or p < 1:
            raise ValueError("matrix must have at least one row and one column")
        if status.shape != values.shape or delta.shape != values.shape:
            raise ValueError("values, status and delta dimensions must agree")
        if not np.isin(status, (OBSERVED, BELOW_LOD, MISSING)).all():
            raise ValueError("status codes must be one of {OBSERVED, BELOW_LOD, MISSING}")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != p:
            raise ValueError(f"expected {p} column names, got {len(names)}")
        obs = status == OBSERVED
        v_obs = values[obs]
        if not np.isfinite(v_obs).all():
            raise DomainError("observed values must be finite")
        if (v_obs < 0).any():
            raise DomainError("observed values must be non-negative")
        if not np.isfinite(delta).all() or (delta < 0).any():
            raise SchemaError("detection limits must be finite and non-negative")
        if (delta[status == BELOW_LOD] <= 0).any():
            raise SchemaError("censored cells require a strictly positive detection limit")
        values[~obs] = np.nan  # sentinel: never read as data
        scale = self.scale
        if scale is not None:
            scale = np.array(scale, dtype=float)
            if scale.shape != (p,):
                raise ValueError(f"scale must have shape ({p},)")
            scale.setflags(write=False)
        for a in (values, status, delta):
            a.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "scale", scale)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def observed(self) -> np.ndarray:
        return self.status == OBSERVED

    @property
    def below_lod(self) -> np.ndarray:
        return self.status == BELOW_LOD

    @property
    def missing(self) -> np.ndarray:
        return self.status == MISSING


def _parse_float(token: str, path, row: int, name: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(
            f"{path}: data row {row}, column '{name}': malformed numeric cell {token!r}"
        ) from None


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file")
        rows = [row for row in reader]
    header = [h.strip() for h in header]
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ParseError(
                f"{path}: data row {i} has {len(row)} cells, expected {len(header)}"
            )
    return header, rows


def read_dense_csv(path) -> tuple[np.ndarray, tuple[str, ...]]:
    """Read a plain numeric CSV (header + rows). Empty/NA cells become NaN."""
    header, rows = _read_rows(path)
    out = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        for j, tok in enumerate(row):
            tok = tok.strip()
            if tok == "" or tok in NA_TOKENS:
                out[i, j] = np.nan
            else:
                out[i, j] = _parse_float(tok, path, i + 1, header[j])
    return out, tuple(header)


def write_matrix_csv(M, path, column_names=None) -> None:
    """Write a dense real matrix as CSV with full float64 precision.

    A write/read cycle reproduces the matrix exactly (statuses aside; use
    :func:`write_masked_csv` for matrices with censoring metadata).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if column_names is None:
        column_names = [f"x{j + 1}" for j in range(M.shape[1])]
    names = [str(c) for c in column_names]
    if len(names) != M.shape[1]:
        raise ValueError("column_names length must match the number of columns")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in M:
            writer.writerow([fmt_float(v) for v in row])


def _sidecar_paths(path) -> tuple[Path, Path]:
    path = Path(path)
    return path.with_suffix(".status.csv"), path.with_suffix(".delta.csv")


def write_masked_csv(X: MaskedMatrix, path) -> None:
    """Write a masked matrix as a values file plus status/delta sidecars.

    Observed cells carry the value; censored and missing cells are left
    empty. Statuses use the {O, L, M} tokens; the delta file stores the full
    detection-limit matrix.
    """
    path = Path(path)
    status_path, delta_path = _sidecar_paths(path)
    obs = X.observed
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(X.column_names)
        for i in range(X.n):
            writer.writerow(
                [fmt_float(X.values[i, j]) if obs[i, j] else "" for j in range(X.p)]
            )
    with open(status_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(X.column_names)
        for i in range(X.n):
            writer.writerow([TOKEN_OF_STATUS[int(s)] for s in X.status[i]])
    write_matrix_csv(X.delta, delta_path, X.column_names)


def _read_status_sidecar(path, names) -> np.ndarray:
    header, rows = _read_rows(path)
    if len(header) != len(names):
        raise SchemaError(f"{path}: status sidecar has {len(header)} columns, expected {len(names)}")
    status = np.empty((len(rows), len(header)), dtype=np.int8)
    for i, row in enumerate(rows):
        for j, tok in enumerate(row):
            tok = tok.strip()
            if tok not in STATUS_TOKENS:
                raise ParseError(
                    f"{path}: data row {i + 1}, column '{header[j]}': unknown status token {tok!r}"
                )
            status[i, j] = STATUS_TOKENS[tok]
    return status


def read_matrix_csv(path, schema: MatrixSchema | None = None) -> MaskedMatrix:
    """Read a measurement matrix, resolving censored and missing cells.

    With the default schema every cell must be a non-negative number except
    empty/``NA`` cells, which become missing. See :class:`MatrixSchema` for
    the detection-limit encodings.
    """
    schema = schema or MatrixSchema()
    path = Path(path)
    header, rows = _read_rows(path)
    if schema.columns is not None and tuple(header) != tuple(schema.columns):
        raise SchemaError(f"{path}: header {header} does not match declared columns")
    p = len(header)

    lods = None
    if schema.lod_row:
        if not rows:
            raise ParseError(f"{path}: missing detection-limit row")
        lod_tokens, rows = rows[0], rows[1:]
        lods = np.full(p, np.nan)
        for j, tok in enumerate(lod_tokens):
            tok = tok.strip()
            if tok != "" and tok not in NA_TOKENS:
                lods[j] = _parse_float(tok, path, 1, header[j])
    if not rows:
        raise ParseError(f"{path}: no data rows")

    n = len(rows)
    values = np.zeros((n, p))
    status = np.full((n, p), OBSERVED, dtype=np.int8)
    delta = np.zeros((n, p))

    if schema.sidecar:
        status_path, delta_path = _sidecar_paths(path)
        if not status_path.exists() or not delta_path.exists():
            raise SchemaError(f"{path}: sidecar files {status_path.name} / {delta_path.name} not found")
        status = _read_status_sidecar(status_path, header)
        if status.shape != (n, p):
            raise SchemaError(f"{status_path}: shape {status.shape} does not match values {n}x{p}")
        delta, _ = read_dense_csv(delta_path)
        if delta.shape != (n, p):
            raise SchemaError(f"{delta_path}: shape {delta.shape} does not match values {n}x{p}")
        if np.isnan(delta).any():
            raise SchemaError(f"{delta_path}: detection limits must be numeric")
        bad = (status == BELOW_LOD) & (delta <= 0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise SchemaError(
                f"{path}: data row {i + 1}, column '{header[j]}': censored cell with non-positive detection limit"
            )
        for i, row in enumerate(rows):
            for j, tok in enumerate(row):
                if status[i, j] != OBSERVED:
                    continue
                v = _parse_float(tok.strip(), path, i + 1, header[j])
                _check_observed(v, path, i + 1, header[j])
                values[i, j] = v
        return MaskedMatrix(values, status, delta, tuple(header))

    if lods is not None:
        # bookkeeping: broadcast valid column limits to the whole column
        valid = np.isfinite(lods) & (lods > 0)
        delta[:, valid] = lods[valid]
    for i, row in enumerate(rows):
        for j, tok in enumerate(row):
            tok = tok.strip()
            if tok in NA_TOKENS:
                status[i, j] = MISSING
            elif tok == LOD_TOKEN or (tok == "" and lods is not None):
                lod = lods[j] if lods is not None else np.nan
                if not np.isfinite(lod) or lod <= 0:
                    raise SchemaError(
                        f"{path}: data row {i + 1}, column '{header[j]}': censored cell "
                        "without a positive detection limit"
                    )
                status[i, j] = BELOW_LOD
                delta[i, j] = lod
            elif tok == "":
                status[i, j] = MISSING
            else:
                v = _parse_float(tok, path, i + 1, header[j])
                _check_observed(v, path, i + 1, header[j])
                values[i, j] = v
    return MaskedMatrix(values, status, delta, tuple(header))


def _check_observed(v: float, path, row: int, name: str) -> None:
    if not np.isfinite(v):
        raise DomainError(f"{path}: data row {row}, column '{name}': observed value must be finite")
    if v < 0:
        raise DomainError(f"{path}: data row {row}, column '{name}': negative observed value {v}")


def standardize_columns(X: MaskedMatrix) -> MaskedMatrix:
    """Divide each column by the sample sd of its observed entries.

    Detection limits are divided by the same factor so the censoring
    intervals stay consistent on the new scale. Columns are not centered:
    the data stay non-negative. Divisors accumulate into ``scale``.
    """
    obs = X.observed
    values = X.values.copy()
    delta = X.delta.copy()
    factors = np.empty(X.p)
    for j, name in enumerate(X.column_names):
        col = values[obs[:, j], j]
        if col.size < 2:
            raise DegenerateColumnError(
                f"column '{name}' has fewer than 2 observed entries"
            )
        sd = float(np.std(col, ddof=1))
        if sd == 0.0:
            raise DegenerateColumnError(
                f"column '{name}' has zero variance over observed entries"
            )
        factors[j] = sd
        values[obs[:, j], j] = col / sd
        delta[:, j] /= sd
    scale = factors if X.scale is None else X.scale * factors
    return MaskedMatrix(values, X.status, delta, X.column_names, scale=scale)
