"""Command-line workflow: fit, predict, score, cv, surface, als, fetch.

Every command is deterministic given the config file and seed.  Exit codes:
0 success, 2 validation error, 3 solver error, 4 I/O or fetch error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import fetch as fetchmod
from .calibrate import calibrate, calibrate_cvar
from .data import Dataset, Standardizer, atomic_write_text, load_csv, write_csv
from .exceptions import (
    ConfigurationError,
    DataError,
    DomainError,
    FetchError,
    MixquantError,
    SolverError,
    ValidationError,
)
from .lowrank import ALSConfig, als_calibrate, rank_sweep, sweep_rows
from .model import predict_levels, surface_grid
from .runconfig import RunConfig, load_config
from .scoring import CRPSConfig, coverage, kfold, mean_crps, run_cv
from .serialize import ModelBundle, load_model, save_model

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _parse_levels(text):
    try:
        levels = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigurationError(f"could not parse levels {text!r}") from None
    if not levels:
        raise ConfigurationError("no levels given")
    return levels


def _load_dataset(cfg: RunConfig) -> Dataset:
    if not cfg.data_path or not cfg.response or not cfg.factors:
        raise ConfigurationError("config must provide data.path, data.response and data.factors")
    return load_csv(cfg.data_path, cfg.response, cfg.factors)


def _outpath(cfg_dir, name):
    os.makedirs(cfg_dir, exist_ok=True)
    return os.path.join(cfg_dir, name)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    dataset = _load_dataset(cfg)
    std = Standardizer.fit(dataset)
    work = std.transform(dataset)
    spec = cfg.model.build(work.X)
    fitter = calibrate_cvar if spec.mode == "cvar" else calibrate
    fit = fitter(work, spec, cfg.calibration)
    report = fit.report.to_dict()
    report["config_echo"] = cfg.raw.get("calibration", {})
    bundle = ModelBundle(
        spec=spec,
        params=fit.params,
        standardizer=std,
        columns={"response": dataset.response, "factors": list(dataset.factors)},
        report=report,
    )
    path = args.output or _outpath(cfg.output_dir, "model.json")
    save_model(path, bundle)
    print(f"wrote {path} (objective {fit.report.objective:.6g}, gap {fit.report.gap:.2e})")
    return EXIT_OK


def _standardized_inputs(bundle: ModelBundle, dataset: Dataset):
    std = bundle.standardizer
    if std is None:
        return dataset.X, dataset.y, 1.0
    Xs = std.transform_factors(dataset.X)
    ys = (dataset.y - std.response.median) / std.response.iqr
    return Xs, ys, std.response.iqr


def cmd_predict(args) -> int:
    bundle = load_model(args.model)
    cols = bundle.columns or {}
    response = cols.get("response", "y")
    factors = tuple(cols.get("factors", ()))
    if not factors:
        raise ConfigurationError(f"{args.model}: model file lacks factor column names")
    dataset = load_csv(args.data, args.response or response, factors)
    levels = _parse_levels(args.levels)
    Xs, _, _ = _standardized_inputs(bundle, dataset)
    preds = predict_levels(bundle.spec, bundle.params, Xs, levels)
    if bundle.standardizer is not None:
        preds = bundle.standardizer.inverse_response(preds)
    header = list(factors) + [f"q_{p}" for p in levels]
    rows = [list(x) + list(p) for x, p in zip(dataset.X, preds)]
    write_csv(args.output, header, rows)
    print(f"wrote {args.output} ({len(rows)} rows, {len(levels)} levels)")
    return EXIT_OK


def cmd_score(args) -> int:
    bundle = load_model(args.model)
    cols = bundle.columns or {}
    dataset = load_csv(args.data, cols.get("response", "y"), tuple(cols.get("factors", ())))
    Xs, ys, scale = _standardized_inputs(bundle, dataset)
    eval_ds = Dataset(ys, Xs, dataset.response, dataset.factors)
    cfg = CRPSConfig(nodes=args.crps_nodes)
    score = mean_crps(bundle.spec, bundle.params, eval_ds, cfg) * scale
    intervals = [tuple(map(float, t.split("-"))) for t in args.intervals.split(",")]
    cov_rows = []
    for lo, hi in intervals:
        rate = coverage(bundle.spec, bundle.params, eval_ds, lo, hi)
        cov_rows.append([lo, hi, hi - lo, rate])
    write_csv(args.output + ".coverage.csv", ["p_lo", "p_hi", "target", "rate"], cov_rows)
    payload = {"mean_crps": score, "n": dataset.n,
               "coverage": [dict(zip(("p_lo", "p_hi", "target", "rate"), r)) for r in cov_rows]}
    atomic_write_text(args.output + ".json", json.dumps(payload, indent=2) + "\n")
    print(f"mean CRPS {score:.6g}; wrote {args.output}.json")
    return EXIT_OK


def cmd_cv(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    dataset = _load_dataset(cfg)
    plan = kfold(dataset, cfg.cv_k, cfg.seed)
    result = run_cv(
        dataset, cfg.model, cfg.calibration, plan,
        cfg.crps, cfg.intervals, paper_mode=cfg.cv_paper_mode,
    )
    header, rows = result.rows()
    fold_path = _outpath(cfg.output_dir, "cv_folds.csv")
    write_csv(fold_path, header, rows)
    summary = {
        "k": plan.k,
        "seed": plan.seed,
        "crps_mean": result.crps_mean,
        "crps_std": result.crps_std,
        "intervals": [list(t) for t in result.intervals],
        "coverage_means": list(result.coverage_means),
        "paper_mode": cfg.cv_paper_mode,
    }
    summary_path = _outpath(cfg.output_dir, "cv_summary.json")
    atomic_write_text(summary_path, json.dumps(summary, indent=2) + "\n")
    print(f"wrote {fold_path} and {summary_path} (CRPS {result.crps_mean:.4f} "
          f"+/- {result.crps_std:.4f})")
    return EXIT_OK


def cmd_surface(args) -> int:
    bundle = load_model(args.model)
    levels = _parse_levels(args.levels)
    spec = bundle.spec
    std = bundle.standardizer
    grids_std = []
    for k, fs in enumerate(spec.factor_specs):
        grids_std.append(np.linspace(fs.knots.lower, fs.knots.upper, args.grid_points))
    cols = bundle.columns or {}
    names = list(cols.get("factors", [f"x{k+1}" for k in range(spec.n_factors)]))
    for p in levels:
        grid = surface_grid(spec, bundle.params, p, grids_std)
        values = grid[:, -1]
        points = grid[:, :-1]
        if std is not None:
            values = std.inverse_response(values)
            med = np.array([c.median for c in std.factors])
            iqr = np.array([c.iqr for c in std.factors])
            points = points * iqr + med
        path = f"{args.output_prefix}_p{p}.csv"
        write_csv(path, names + [f"quantile_{p}"], np.column_stack([points, values]))
        print(f"wrote {path}")
    return EXIT_OK


def cmd_als(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    dataset = _load_dataset(cfg)
    std = Standardizer.fit(dataset)
    work = std.transform(dataset)
    spec = cfg.model.build(work.X)
    trace_path = _outpath(cfg.output_dir, "als_trace.csv")
    if cfg.als_ranks:
        results = rank_sweep(
            work, spec, cfg.als_ranks, cfg.als_steps, cfg.calibration,
            seed=cfg.seed, init=cfg.als_init,
        )
        write_csv(trace_path, ["rank", "step", "block", "objective"], sweep_rows(results))
        rank, params, trace = results[-1]
    else:
        als_cfg = ALSConfig(
            rank=cfg.als_rank, inner=cfg.calibration, epsilon=cfg.als_epsilon,
            max_sweeps=cfg.als_max_sweeps, init=cfg.als_init, seed=cfg.seed,
        )
        params, trace = als_calibrate(work, spec, als_cfg)
        rank = cfg.als_rank
        write_csv(trace_path, ["step", "block", "objective"], trace.rows())
    bundle = ModelBundle(
        spec=spec,
        params=params,
        standardizer=std,
        columns={"response": dataset.response, "factors": list(dataset.factors)},
        report={"final_objective": trace.objectives[-1], "stopped_on": trace.stopped_on,
                "rank": rank},
    )
    model_path = _outpath(cfg.output_dir, "model_lowrank.json")
    save_model(model_path, bundle)
    print(f"wrote {trace_path} and {model_path} (final objective {trace.objectives[-1]:.6g})")
    return EXIT_OK


def cmd_fetch(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        series = list(args.series or cfg.fetch_series_ids)
        cache_dir = args.cache_dir or cfg.fetch_cache_dir
        transform = args.transform or cfg.fetch_transform
    else:
        series = list(args.series or ())
        cache_dir = args.cache_dir or "fred-cache"
        transform = args.transform or "none"
    if not series:
        raise ConfigurationError("no series ids given (flag --series or config fetch.series)")
    paths = fetchmod.fetch_series(series, cache_dir, force=args.force)
    for sid, path in paths.items():
        print(f"{sid}: {path}")
    if args.join_output:
        loaded = [fetchmod.load_cached_series(cache_dir, sid) for sid in series]
        if transform == "pct_change_year_ago":
            loaded = [fetchmod.pct_change_year_ago(s) for s in loaded]
        dataset = fetchmod.join_series(loaded[0], loaded[1:])
        header = [dataset.response] + list(dataset.factors)
        rows = [[y] + list(x) for y, x in zip(dataset.y, dataset.X)]
        write_csv(args.join_output, header, rows)
        print(f"wrote {args.join_output} ({dataset.n} joined rows)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    import dataclasses

    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
        updates["calibration"] = dataclasses.replace(cfg.calibration, seed=args.seed)
    if getattr(args, "rank", None) is not None:
        updates["als_rank"] = args.rank
        updates["als_ranks"] = ()
    if getattr(args, "levels", None):
        levels = _parse_levels(args.levels)
        updates["calibration"] = dataclasses.replace(
            updates.get("calibration", cfg.calibration), levels=levels, weights=()
        )
    if getattr(args, "k", None) is not None:
        updates["cv_k"] = args.k
    return dataclasses.replace(cfg, **updates) if updates else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixquant",
        description="Conditional distribution estimation with mixture-of-quantiles models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="calibrate a model and write model.json")
    p.add_argument("--config", required=True)
    p.add_argument("--output", default=None, help="model file path (default <output_dir>/model.json)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--levels", default=None, help="comma-separated confidence levels")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="per-row quantiles at requested levels")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--levels", default="0.05,0.5,0.95")
    p.add_argument("--response", default=None, help="override the response column name")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", help="CRPS and coverage of a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--crps-nodes", type=int, default=999)
    p.add_argument("--intervals", default="0.01-0.99,0.05-0.95,0.25-0.75")
    p.add_argument("--output", required=True, help="output path prefix")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("cv", help="k-fold cross-validation tables")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--levels", default=None)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("surface", help="model surface grids at fixed levels")
    p.add_argument("--model", required=True)
    p.add_argument("--levels", default="0.05,0.5,0.95")
    p.add_argument("--grid-points", type=int, default=25)
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("als", help="low-rank alternating fit with trace CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.set_defaults(func=cmd_als)

    p = sub.add_parser("fetch", help="download and cache series CSVs")
    p.add_argument("--config", default=None)
    p.add_argument("--series", nargs="*", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--transform", default=None, choices=[None, "none", "pct_change_year_ago"])
    p.add_argument("--force", action="store_true")
    p.add_argument("--join-output", default=None)
    p.set_defaults(func=cmd_fetch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DataError, DomainError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (FetchError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MixquantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
