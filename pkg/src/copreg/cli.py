"""Batch command-line surface.

Subcommands wire the library end to end from JSON configs: ``fit``,
``predict``, ``calibrate`` for tabular regression; ``lfi-simulate``,
``lfi-fit``, ``lfi-score`` (or ``lfi`` for all three) for the simulation
pipeline.  Every command is a pure function of (config, input files, seed):
reruns produce byte-identical outputs.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .calibration import (
    P_GRID,
    CalibrationReport,
    kfold_mls,
    log_score_se,
    mean_log_score,
    probability_calibration,
)
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    DomainError,
    NumericalError,
    ShapeError,
    SimulationDivergedError,
)
from .lfi import (
    LfiFitConfig,
    SimBatch,
    blowfly_model,
    composite_scores,
    eval_simulation,
    generate_training,
    lfi_fit,
    marginal_calibration_distance,
    voles_model,
)
from .lfi.priors import PriorSpec
from .nnet import TrainConfig, build_ffn
from .pipeline import (
    CopulaRegression,
    config_hash,
    fit_copula_regression,
)
from .predict import (
    average_predictive_cdf,
    average_predictive_density,
    export_density_csv,
    margin_grid,
    predict_cdf_at,
    predict_density_at,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


# -- input handling --------------------------------------------------------------


def load_table(path):
    """CSV with a header row; returns (column names, float matrix).

    Non-numeric cells are reported with their row number and column name.
    """
    if not os.path.exists(path):
        raise DataError(f"dataset not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = []
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {i} has {len(row)} cells, expected "
                    f"{len(header)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                col = header[row.index(bad)]
                raise DataError(
                    f"{path}: non-numeric value {bad!r} at row {i}, "
                    f"column {col!r}") from None
    if not rows:
        raise DataError(f"{path} has a header but no rows")
    return header, np.asarray(rows, dtype=float)


def _is_float(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None


def _require(cfg, key, task):
    if key not in cfg:
        raise ConfigError(f"task {task!r} needs config key {key!r}")
    return cfg[key]


def _train_cfg(cfg, seed):
    opts = dict(cfg.get("train", {}))
    opts.setdefault("epochs", 200)
    opts["seed"] = seed
    return TrainConfig(**opts)


def _write_manifest(out_dir, cfg, seed, extra=None):
    payload = {"config_hash": config_hash(cfg), "seed": seed,
               "version": __version__, "config": cfg}
    if extra:
        payload.update(extra)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
    return path


# -- tabular commands ----------------------------------------------------------------


def cmd_fit(cfg, out_dir, seed):
    header, table = load_table(_require(cfg, "dataset", "fit"))
    x, y = table[:, :-1], table[:, -1]
    net_opts = cfg.get("network", {})
    mcmc = cfg.get("mcmc", {})
    network = build_ffn(x.shape[1], width=int(net_opts.get("width", 64)),
                        dropout_rate=float(net_opts.get("dropout", 0.5)),
                        seed=seed)
    fit = fit_copula_regression(
        x, y, variant=mcmc.get("variant", "horseshoe"), network=network,
        train_cfg=_train_cfg(cfg, seed),
        burnin=int(mcmc.get("burnin", 1000)),
        draws=int(mcmc.get("draws", 1000)), thin=int(mcmc.get("thin", 1)),
        seed=seed)
    fit.meta.update({"dataset": os.path.basename(cfg["dataset"]),
                     "response": header[-1]})
    os.makedirs(out_dir, exist_ok=True)
    fit.save(out_dir)
    _write_manifest(out_dir, cfg, seed, extra={"task": "fit"})
    return EXIT_OK


def cmd_predict(cfg, out_dir, seed):
    bundle_dir = _require(cfg, "bundle", "predict")
    fit = CopulaRegression.load(bundle_dir)
    header, table = load_table(_require(cfg, "dataset", "predict"))
    p = fit.network.input_shape[0]
    x = table[:, :p]
    os.makedirs(out_dir, exist_ok=True)
    export_density_csv(fit.predictive, x, out_dir,
                       num=int(cfg.get("grid_size", 512)))
    _write_manifest(out_dir, cfg, seed, extra={"task": "predict"})
    return EXIT_OK


def cmd_calibrate(cfg, out_dir, seed):
    bundle_dir = _require(cfg, "bundle", "calibrate")
    fit = CopulaRegression.load(bundle_dir)
    header, table = load_table(_require(cfg, "dataset", "calibrate"))
    x, y = table[:, :-1], table[:, -1]
    pm = fit.predictive

    u = predict_cdf_at(pm, x, y)
    p_tilde = probability_calibration(u, P_GRID)

    grid = margin_grid(fit.margin, num=int(cfg.get("grid_size", 512)))
    avg_density = average_predictive_density(pm, x, grid)
    avg_cdf = average_predictive_cdf(pm, x, grid)

    dens_at = predict_density_at(pm, x, y)
    mls_in = mean_log_score(dens_at)
    mls_in_se = log_score_se(dens_at) if np.isfinite(mls_in) else float("nan")

    folds = int(cfg.get("folds", 10))
    fit_conf = fit.meta.get("config", cfg.get("refit", {}))

    def refit(x_tr, y_tr):
        sub = fit_copula_regression(
            x_tr, y_tr,
            variant=fit.meta.get("variant", "horseshoe"),
            network=build_ffn(x_tr.shape[1],
                              width=int(fit_conf.get("network", {})
                                        .get("width", 64)),
                              seed=seed),
            train_cfg=_train_cfg(fit_conf, seed),
            burnin=int(fit_conf.get("mcmc", {}).get("burnin", 1000)),
            draws=int(fit_conf.get("mcmc", {}).get("draws", 1000)),
            seed=seed)
        model = sub.predictive
        return lambda x_te, y_te: predict_density_at(model, x_te, y_te)

    if folds >= 2:
        mls_k, mls_k_se, fold_scores = kfold_mls(x, y, refit, folds=folds,
                                                 seed=seed)
    else:
        mls_k, mls_k_se, fold_scores = float("nan"), float("nan"), []

    report = CalibrationReport(
        p_grid=P_GRID, p_tilde=p_tilde, marginal_grid=grid,
        average_density=avg_density, margin_density=fit.margin.pdf(grid),
        average_cdf=avg_cdf, margin_cdf=fit.margin.cdf(grid),
        mls_in_sample=mls_in, mls_in_sample_se=mls_in_se, mls_kfold=mls_k,
        mls_kfold_se=mls_k_se, fold_scores=fold_scores)
    os.makedirs(out_dir, exist_ok=True)
    report.save(os.path.join(out_dir, "probability_calibration.csv"),
                os.path.join(out_dir, "marginal_calibration.csv"),
                os.path.join(out_dir, "scores.json"))
    _write_manifest(out_dir, cfg, seed, extra={"task": "calibrate"})
    return EXIT_OK


# -- simulation pipeline commands ----------------------------------------------------


def _sim_model(cfg):
    name = _require(cfg, "simulator", "lfi")
    prior = None
    if cfg.get("prior_file"):
        prior = PriorSpec.load(cfg["prior_file"])
    opts = {}
    if cfg.get("series_length"):
        opts["series_length"] = int(cfg["series_length"])
    if name == "blowfly":
        return blowfly_model(prior=prior, **opts)
    if name == "voles":
        return voles_model(prior=prior, **opts)
    raise ConfigError(f"unknown simulator {name!r}")


def _lfi_config(cfg):
    opts = dict(cfg.get("lfi_fit", {}))
    for key in ("kernel_sizes", "filter_counts"):
        if key in opts:
            opts[key] = tuple(opts[key])
    return LfiFitConfig(**opts)


def cmd_lfi_simulate(cfg, out_dir, seed):
    model = _sim_model(cfg)
    n_total = int(cfg.get("n_total", 2500))
    split = float(cfg.get("split", 0.8))
    train_b, test_b = generate_training(model, n_total, split=split,
                                        seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    train_b.save_csv(os.path.join(out_dir, "train.csv"))
    test_b.save_csv(os.path.join(out_dir, "test.csv"))
    _write_manifest(out_dir, cfg, seed,
                    extra={"task": "lfi-simulate",
                           "param_names": list(model.prior.names)})
    return EXIT_OK


def cmd_lfi_fit(cfg, out_dir, seed, data_dir=None):
    model = _sim_model(cfg)
    data_dir = data_dir or cfg.get("data_dir", out_dir)
    train_path = os.path.join(data_dir, "train.csv")
    train_b = SimBatch.load_csv(train_path, param_names=model.prior.names)
    lfi_cfg = _lfi_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    for j, name in enumerate(model.prior.names):
        bundle = lfi_fit(train_b, j, config=lfi_cfg, seed=seed * 7919 + j,
                         return_bundle=True)
        bundle.save(os.path.join(out_dir, f"param_{name}"))
    _write_manifest(out_dir, cfg, seed, extra={"task": "lfi-fit"})
    return EXIT_OK


def cmd_lfi_score(cfg, out_dir, seed, data_dir=None, fit_dir=None):
    model = _sim_model(cfg)
    data_dir = data_dir or cfg.get("data_dir", out_dir)
    fit_dir = fit_dir or cfg.get("fit_dir", out_dir)
    test_b = SimBatch.load_csv(os.path.join(data_dir, "test.csv"),
                               param_names=model.prior.names)
    models = []
    for name in model.prior.names:
        bundle = CopulaRegression.load(os.path.join(fit_dir,
                                                    f"param_{name}"))
        models.append(bundle.predictive)

    table = eval_simulation(models, test_b)

    rng = np.random.default_rng(seed)
    calib = {}
    prior_reference = np.log(model.prior.sample_matrix(
        np.random.default_rng(seed + 1), 20_000))
    for j, name in enumerate(model.prior.names):
        calib[name] = marginal_calibration_distance(
            models[j], test_b, prior_reference[:, j])

    observed = test_b.series[0].astype(float)
    if cfg.get("observed_series"):
        _, obs_table = load_table(cfg["observed_series"])
        observed = obs_table[0]
    from .predict import predictive_expectation
    rho_hat = np.array([
        predictive_expectation(models[j], observed[None, :],
                               func=np.exp)[0]
        for j in range(len(models))])
    if model.name == "blowfly":
        rho_hat[4] = max(1.0, round(rho_hat[4]))  # integer lag
    cls, ces = composite_scores(rho_hat, observed, model,
                                train_frac=float(cfg.get("train_frac", 0.8)),
                                reps=int(cfg.get("score_reps", 1000)),
                                rng=rng)
    report = {
        "simulator": model.name,
        "parameters": table,
        "marginal_calibration": calib,
        "composite": {"log_score": cls, "neg_energy_score": ces,
                      "point_estimate": rho_hat.tolist()},
    }
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "lfi_report.json"), "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
    _write_manifest(out_dir, cfg, seed, extra={"task": "lfi-score"})
    return EXIT_OK


def cmd_lfi(cfg, out_dir, seed):
    """Full pipeline: simulate, fit every parameter, score."""
    cmd_lfi_simulate(cfg, out_dir, seed)
    cmd_lfi_fit(cfg, out_dir, seed, data_dir=out_dir)
    return cmd_lfi_score(cfg, out_dir, seed, data_dir=out_dir,
                         fit_dir=out_dir)


# -- entry point -------------------------------------------------------------------


TASKS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "calibrate": cmd_calibrate,
    "lfi-simulate": cmd_lfi_simulate,
    "lfi-fit": cmd_lfi_fit,
    "lfi-score": cmd_lfi_score,
    "lfi": cmd_lfi,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="copreg",
        description="Distributional regression with network copulas")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="task", required=True)
    for name in TASKS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True,
                         help="JSON experiment config")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=int, default=None,
                         help="overrides the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None:
            raise ConfigError("a seed is mandatory (config key or --seed)")
        return TASKS[args.task](cfg, args.out, int(seed))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, DivergenceError, SimulationDivergedError,
            DomainError, ShapeError) as exc:
        print(f"numerical failure ({args.task}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
