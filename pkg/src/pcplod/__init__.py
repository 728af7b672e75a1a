"""Non-negative low-rank + sparse decomposition for mixture data with values
below detection limits, plus the surrounding study machinery: synthetic data
generation, rank cross-validation, a PCA baseline, pattern extraction, and
evaluation metrics.
"""

__version__ = "0.1.0"

from .data import (
    BELOW_LOD,
    MISSING,
    OBSERVED,
    MaskedMatrix,
    MatrixSchema,
    read_dense_csv,
    read_matrix_csv,
    standardize_columns,
    write_masked_csv,
    write_matrix_csv,
)
from .errors import (
    ConfigError,
    DegenerateColumnError,
    DomainError,
    InsufficientDataError,
    NumericalError,
    ParseError,
    SchemaError,
    ToolkitError,
    UndefinedMetricError,
)
from .metrics import (
    PatternModel,
    SparseEventTable,
    SparsitySummary,
    classify_sparse,
    eigenvector_error,
    extract_patterns,
    relative_error,
    sparsity_stats,
)
from .pca import PcaModel, fit_on_masked, fit_pca, impute_lod, reconstruct
from .prox import (
    FeasibleSet,
    effective_rank,
    lod_distance,
    project_feasible,
    project_rank_nonneg,
    prox_distance,
    soft_threshold,
    truncated_svd,
)
from .rankcv import CvConfig, CvReport, cv_select_rank, holdout_mask
from .simulate import (
    SimDataset,
    SimScenario,
    gen_dataset,
    gen_demo_mixture,
    gen_loadings,
    read_dataset,
    write_dataset,
)
from .solver import Decomposition, PcpConfig, SolverDiagnostics, objective, solve, solve_dense

__all__ = [
    "__version__",
    "BELOW_LOD",
    "MISSING",
    "OBSERVED",
    "MaskedMatrix",
    "MatrixSchema",
    "read_dense_csv",
    "read_matrix_csv",
    "standardize_columns",
    "write_masked_csv",
    "write_matrix_csv",
    "ConfigError",
    "DegenerateColumnError",
    "DomainError",
    "InsufficientDataError",
    "NumericalError",
    "ParseError",
    "SchemaError",
    "ToolkitError",
    "UndefinedMetricError",
    "PatternModel",
    "SparseEventTable",
    "SparsitySummary",
    "classify_sparse",
    "eigenvector_error",
    "extract_patterns",
    "relative_error",
    "sparsity_stats",
    "PcaModel",
    "fit_on_masked",
    "fit_pca",
    "impute_lod",
    "reconstruct",
    "FeasibleSet",
    "effective_rank",
    "lod_distance",
    "project_feasible",
    "project_rank_nonneg",
    "prox_distance",
    "soft_threshold",
    "truncated_svd",
    "CvConfig",
    "CvReport",
    "cv_select_rank",
    "holdout_mask",
    "SimDataset",
    "SimScenario",
    "gen_dataset",
    "gen_demo_mixture",
    "gen_loadings",
    "read_dataset",
    "write_dataset",
    "Decomposition",
    "PcpConfig",
    "SolverDiagnostics",
    "objective",
    "solve",
    "solve_dense",
]
