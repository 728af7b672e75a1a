"""Batch command-line front end: simulate, solve, pca, evaluate, report.

Every command writes a JSON manifest next to its outputs recording the full
configuration, seeds, and toolkit version; re-running a command with the
same configuration and seed reproduces all non-manifest outputs bit for bit.

Exit codes: 0 success, 2 usage/configuration/data errors, 3 numerical
failures, 4 I/O failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .data import (
    fmt_float,
    read_dense_csv,
    standardize_columns,
    write_matrix_csv,
)
from .errors import (
    ConfigError,
    DomainError,
    NumericalError,
    ParseError,
    SchemaError,
    ToolkitError,
)
from .metrics import (
    classify_sparse,
    eigenvector_error,
    extract_patterns,
    relative_error,
    sparsity_stats,
)
from .pca import fit_on_masked
from .prox import effective_rank
from .rankcv import CvConfig, cv_select_rank, write_cv_report
from .simulate import (
    NOISE_KINDS,
    SimScenario,
    gen_dataset,
    gen_demo_mixture,
    read_dataset,
    read_input_matrix,
    write_dataset,
)
from .solver import PcpConfig, solve

log = logging.getLogger(__name__)

GRID_SIZES = (16, 48)
GRID_QUANTILES = (0.25, 0.50, 0.75)
STRATA = ("overall", "above_lod", "below_lod")

TIDY_HEADER = ("p", "noise", "lod_quantile", "replicate", "method", "metric", "stratum", "value")


def _default_jobs() -> int:
    return int(os.environ.get("PCPLOD_JOBS", "1"))


def _write_manifest(outdir: Path, command: str, args: argparse.Namespace, extra: dict | None = None) -> None:
    config = {}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "command", "config"):
            continue
        if isinstance(val, Path):
            val = str(val)
        if isinstance(val, (list, tuple)):
            val = [str(v) if isinstance(v, Path) else v for v in val]
        config[key] = val
    manifest = {
        "command": command,
        "config": config,
        "version": __version__,
        "wall_time_s": time.perf_counter() - args._t0,
    }
    if extra:
        manifest.update(extra)
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_grid(text: str) -> tuple[int, ...]:
    text = text.strip()
    try:
        if "-" in text:
            lo, hi = text.split("-")
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"cannot parse rank grid {text!r}; use e.g. '1-10' or '2,4,6'") from None


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.demo_mixture:
        ds = gen_demo_mixture(seed=args.seed)
        write_dataset(ds, out)
        log.info("wrote demo mixture (%d x %d) to %s", ds.shape[0], ds.shape[1], out)
        return 0

    if args.grid:
        cells = [
            (p, noise, q)
            for p in GRID_SIZES
            for noise in NOISE_KINDS
            for q in GRID_QUANTILES
        ]
    else:
        cells = [(args.p, args.noise, args.lod_q)]
    n_datasets = len(cells) * args.replicates
    seeds = np.random.SeedSequence(args.seed).generate_state(n_datasets)
    written = []
    idx = 0
    for p, noise, q in cells:
        for rep in range(args.replicates):
            scenario = SimScenario(
                n=args.n,
                p=p,
                r_true=args.r_true,
                noise=noise,
                lod_quantile=q,
                sparse_prob=args.sparse_prob,
                sparse_magnitude_range=tuple(args.sparse_mag),
                seed=int(seeds[idx]),
            )
            ds = gen_dataset(scenario)
            if args.grid:
                rel = Path(f"p{p}_{noise}_q{int(round(q * 100))}") / f"rep{rep:03d}"
            else:
                rel = Path(f"rep{rep:03d}")
            write_dataset(ds, out / rel)
            written.append(str(rel))
            idx += 1
    _write_manifest(out, "simulate", args, {"datasets": written, "seeds": [int(s) for s in seeds]})
    log.info("wrote %d dataset(s) under %s", len(written), out)
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X = read_input_matrix(args.input)
    if args.standardize:
        X = standardize_columns(X)
    base = dict(lam=args.lam, mu=args.mu, rho=args.rho, tol=args.tol, max_iter=args.max_iter)

    extra: dict = {}
    if args.cv:
        grid = _parse_grid(args.cv_grid)
        cv = CvConfig(
            rank_grid=grid,
            holdout_fraction=args.cv_holdout,
            repeats=args.cv_repeats,
            seed=args.cv_seed,
        )
        template = PcpConfig(r=min(cv.rank_grid), **base)
        report = cv_select_rank(X, template, cv, n_jobs=args.jobs)
        write_cv_report(report, out / "cv_errors.csv", out / "cv_summary.csv")
        rank = report.selected_rank
        extra["cv_selected_rank"] = rank
        log.info("cross-validation selected rank %d", rank)
    elif args.rank is not None:
        rank = args.rank
    else:
        raise ConfigError("either --rank or --cv is required")

    cfg = PcpConfig(r=rank, **base)
    try:
        dec = solve(X, cfg)
    except NumericalError as exc:
        with open(out / "diagnostics_error.json", "w", encoding="utf-8") as fh:
            json.dump({"error": str(exc)}, fh, indent=2)
            fh.write("\n")
        raise

    write_matrix_csv(dec.L, out / "L.csv", X.column_names)
    write_matrix_csv(dec.S, out / "S.csv", X.column_names)
    with open(out / "diagnostics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "objective", "primal_residual"])
        for i in range(dec.iterations):
            writer.writerow(
                [
                    i + 1,
                    fmt_float(dec.objective_trace[i]),
                    fmt_float(dec.diagnostics.primal_residual_trace[i]),
                ]
            )
    lam, mu = cfg.resolved(X.n, X.p)
    extra.update(
        {
            "rank": rank,
            "lam": lam,
            "mu": mu,
            "iterations": dec.iterations,
            "converged": dec.converged,
            "effective_rank": dec.effective_rank,
        }
    )
    _write_manifest(out, "solve", args, extra)
    log.info(
        "solved %dx%d at rank %d: %d iterations, converged=%s",
        X.n, X.p, rank, dec.iterations, dec.converged,
    )
    return 0


# ---------------------------------------------------------------------------
# pca
# ---------------------------------------------------------------------------

def cmd_pca(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X = read_input_matrix(args.input)
    if args.standardize:
        X = standardize_columns(X)
    model, recon = fit_on_masked(X, args.variance)
    m = model.all_singular_values.size
    comp_names = tuple(f"comp{i + 1}" for i in range(m))
    write_matrix_csv(model.means[None, :], out / "means.csv", X.column_names)
    write_matrix_csv(model.rotation, out / "rotation.csv", comp_names)
    write_matrix_csv(model.scores, out / "scores.csv", comp_names)
    write_matrix_csv(model.all_singular_values[None, :], out / "singular_values.csv", comp_names)
    write_matrix_csv(recon, out / "reconstruction.csv", X.column_names)
    _write_manifest(out, "pca", args, {"k_selected": model.k_selected})
    log.info("pca retained %d of %d components", model.k_selected, m)
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _evaluate_dataset(path: Path, pcp_name: str, pca_name: str, strata: tuple[str, ...]) -> list[tuple]:
    ds = read_dataset(path)
    meta = ds.meta
    if meta.get("kind") != "simulation":
        raise ConfigError(f"{path}: evaluation needs simulated datasets with ground truth")
    key = (meta["p"], meta["noise"], meta["lod_quantile"], path.name)
    rows: list[tuple] = []

    def emit(method, metric, stratum, value):
        rows.append((*key, method, metric, stratum, fmt_float(value)))

    masks = {
        "overall": None,
        "above_lod": ds.censored.observed,
        "below_lod": ds.censored.below_lod,
    }

    def score(method: str, pred: np.ndarray, S: np.ndarray | None) -> None:
        if pred.shape != ds.clean.shape:
            raise ConfigError(f"{path}: {method} output shape {pred.shape} does not match data")
        for stratum in strata:
            mask = masks[stratum]
            if mask is not None and not mask.any():
                continue
            emit(method, "rel_error", stratum, relative_error(ds.clean, pred, mask))
        k = min(int(meta["r_true"]), effective_rank(ds.clean), effective_rank(pred))
        if k >= 1:
            for side in ("left", "right"):
                for align in ("sign", "procrustes"):
                    err = eigenvector_error(ds.clean, pred, k, side=side, alignment=align)
                    emit(method, f"eigen_{side}_{align}", "overall", err)
        if S is not None:
            table = classify_sparse(S, ds.censored, pred)
            stats = sparsity_stats(S, table, ds.sparse_truth)
            emit(method, "nonnull_fraction", "overall", stats.nonnull_fraction)
            if stats.capture_rate is not None:
                emit(method, "capture_rate", "overall", stats.capture_rate)

    found = False
    pcp_dir = path / pcp_name
    if (pcp_dir / "L.csv").exists():
        L, _ = read_dense_csv(pcp_dir / "L.csv")
        S, _ = read_dense_csv(pcp_dir / "S.csv")
        score("pcp", L, S)
        found = True
    pca_dir = path / pca_name
    if (pca_dir / "reconstruction.csv").exists():
        recon, _ = read_dense_csv(pca_dir / "reconstruction.csv")
        score("pca", recon, None)
        found = True
    if not found:
        raise ConfigError(f"{path}: no method outputs found under '{pcp_name}' or '{pca_name}'")
    return rows


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    strata = tuple(s.strip() for s in args.strata.split(","))
    for s in strata:
        if s not in STRATA:
            raise ConfigError(f"unknown stratum '{s}'; choose from {STRATA}")
    paths = [Path(d) for d in args.datasets]
    if args.jobs == 1:
        per_dataset = [_evaluate_dataset(d, args.pcp_name, args.pca_name, strata) for d in paths]
    else:
        per_dataset = Parallel(n_jobs=args.jobs)(
            delayed(_evaluate_dataset)(d, args.pcp_name, args.pca_name, strata) for d in paths
        )
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIDY_HEADER)
        for rows in per_dataset:
            writer.writerows(rows)
    _write_manifest(out, "evaluate", args, {"datasets": [str(p) for p in paths]})
    log.info("wrote metrics for %d dataset(s) to %s", len(paths), out / "metrics.csv")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args) -> int:
    if not args.metrics and not args.solve_dir:
        raise ConfigError("nothing to report: give --metrics files and/or --solve-dir")
    from . import report as rpt  # defer the matplotlib import

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    if args.metrics:
        df = rpt.load_metrics(args.metrics)
        written += [p.name for p in rpt.write_summary_tables(df, out)]
        for metric in ("rel_error", "eigen_left_sign", "eigen_right_sign"):
            if (df["metric"] == metric).any():
                p = rpt.plot_error_boxes(df, out / f"boxplot_{metric}.svg", metric)
                written.append(p.name)

    if args.solve_dir:
        if not args.data_dir:
            raise ConfigError("--solve-dir needs --data-dir for statuses and detection limits")
        solve_dir = Path(args.solve_dir)
        L, names = read_dense_csv(solve_dir / "L.csv")
        S, _ = read_dense_csv(solve_dir / "S.csv")
        X = read_input_matrix(args.data_dir)
        solve_manifest = {}
        manifest_path = solve_dir / "manifest.json"
        if manifest_path.exists():
            with open(manifest_path, encoding="utf-8") as fh:
                solve_manifest = json.load(fh)
        if solve_manifest.get("config", {}).get("standardize"):
            X = standardize_columns(X)
        rank = effective_rank(L)
        if args.components is not None:
            rank = min(args.components, rank)
        else:
            rank = min(int(solve_manifest.get("rank", rank)), rank)
        model = extract_patterns(L, rank)
        written.append(rpt.plot_patterns(model, names, out / "patterns.svg").name)
        write_matrix_csv(model.right_vectors.T, out / "pattern_loadings.csv", names)
        write_matrix_csv(model.explained_share[None, :], out / "explained_share.csv",
                         [f"comp{i + 1}" for i in range(rank)])
        written += ["pattern_loadings.csv", "explained_share.csv"]
        table = classify_sparse(S, X, L)
        written.append(rpt.plot_sparse_events(table, names, out / "sparse_events.svg").name)
        written.append(rpt.write_sparse_table(table, out / "sparse_table.csv").name)

    _write_manifest(out, "report", args, {"outputs": written})
    log.info("wrote %d report artifact(s) to %s", len(written), out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="pcplod",
        description="Low-rank + sparse decomposition for mixtures with detection limits",
    )
    parser.add_argument("--version", action="version", version=f"pcplod {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--config", type=Path, default=None,
                        help="JSON file of defaults mirroring the flags (CLI flags win)")
        sp.add_argument("--jobs", type=int, default=_default_jobs(),
                        help="parallel workers (or env PCPLOD_JOBS)")
        subparsers[name] = sp
        return sp

    sp = add("simulate", cmd_simulate, "generate synthetic datasets")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--p", type=int, default=16)
    sp.add_argument("--r-true", type=int, default=4)
    sp.add_argument("--noise", choices=NOISE_KINDS, default="low")
    sp.add_argument("--lod-q", type=float, default=0.25)
    sp.add_argument("--sparse-prob", type=float, default=0.05)
    sp.add_argument("--sparse-mag", type=float, nargs=2, default=[5.0, 15.0],
                    metavar=("LO", "HI"))
    sp.add_argument("--replicates", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--grid", action="store_true",
                    help="run the full scenario grid: {16,48} x {low,high,sparse} x {25,50,75}%%")
    sp.add_argument("--demo-mixture", action="store_true",
                    help="write the bundled application-style 1000x21 mixture")

    sp = add("solve", cmd_solve, "decompose a dataset into L + S")
    sp.add_argument("input", type=Path, help="dataset directory or matrix CSV")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--rank", type=int, default=None)
    sp.add_argument("--cv", action="store_true", help="select the rank by cross-validation")
    sp.add_argument("--cv-grid", default="1-10")
    sp.add_argument("--cv-repeats", type=int, default=100)
    sp.add_argument("--cv-holdout", type=float, default=0.20)
    sp.add_argument("--cv-seed", type=int, default=0)
    sp.add_argument("--lam", type=float, default=None)
    sp.add_argument("--mu", type=float, default=None)
    sp.add_argument("--rho", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--max-iter", type=int, default=20000)
    sp.add_argument("--standardize", action="store_true",
                    help="divide columns (and detection limits) by observed sd first")

    sp = add("pca", cmd_pca, "baseline PCA with limit/sqrt(2) imputation")
    sp.add_argument("input", type=Path)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--variance", type=float, default=0.80,
                    help="retain the first components explaining this share")
    sp.add_argument("--standardize", action="store_true")

    sp = add("evaluate", cmd_evaluate, "score method outputs against simulation truth")
    sp.add_argument("datasets", nargs="+", type=Path)
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--pcp-name", default="pcp", help="solve output subdirectory name")
    sp.add_argument("--pca-name", default="pca", help="pca output subdirectory name")
    sp.add_argument("--strata", default="overall,above_lod,below_lod")

    sp = add("report", cmd_report, "figures and percentile tables")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--metrics", nargs="*", type=Path, default=[])
    sp.add_argument("--solve-dir", type=Path, default=None)
    sp.add_argument("--data-dir", type=Path, default=None)
    sp.add_argument("--components", type=int, default=None,
                    help="patterns to extract (default: the solved rank)")

    return parser, subparsers


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(vars(args))
        if unknown:
            print(f"error: unknown config keys {sorted(unknown)}", file=sys.stderr)
            return 2
        subparsers[args.command].set_defaults(**overrides)
        args = parser.parse_args(argv)
    args._t0 = time.perf_counter()
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, SchemaError, ParseError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
