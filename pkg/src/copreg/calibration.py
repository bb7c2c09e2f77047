"""Calibration diagnostics, cross-validated log scores, isotonic recalibration.

Two complementary diagnostics: probability calibration (nominal predictive
quantile levels vs empirical coverage of the truth) and marginal calibration
(average predictive distribution vs the response margin).  A forecaster can
pass one and fail the other; both are reported.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

#: Default probability grid for the coverage diagnostic.
P_GRID = np.linspace(0.01, 0.99, 99)


def probability_calibration(cdf_at_truth, p_grid=None) -> np.ndarray:
    """Empirical coverage p~_j = (1/n) #{i : u_i < p_j} on the grid."""
    u = np.asarray(cdf_at_truth, dtype=float)
    if np.any((u < 0.0) | (u > 1.0)):
        raise DomainError("CDF values must lie in [0, 1]")
    grid = P_GRID if p_grid is None else np.asarray(p_grid, dtype=float)
    u_sorted = np.sort(u)
    return np.searchsorted(u_sorted, grid, side="left") / u.size


def mean_log_score(density_at_truth) -> float:
    """Mean log predictive density; -inf is surfaced with the offending index."""
    dens = np.asarray(density_at_truth, dtype=float)
    zero = np.flatnonzero(dens <= 0.0)
    if zero.size:
        warnings.warn(
            "zero predictive density at observation indices "
            f"{zero.tolist()[:10]}; mean log score is -inf", RuntimeWarning)
        return float("-inf")
    return float(np.mean(np.log(dens)))


def log_score_se(density_at_truth) -> float:
    logs = np.log(np.asarray(density_at_truth, dtype=float))
    return float(logs.std(ddof=1) / np.sqrt(logs.size))


def kfold_split(n, folds, seed):
    """Deterministic partition: every index in exactly one fold."""
    if folds < 2:
        raise DomainError("need at least 2 folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, folds)]


def kfold_mls(x, y, fit_predict, folds=10, seed=0):
    """Mean out-of-sample log score over a k-fold partition.

    ``fit_predict(x_train, y_train)`` must return a callable
    ``(x_test, y_test) -> density values at the test truths`` and be
    deterministic given its inputs (seed anything internal).

    Returns ``(mls, se, fold_means)``: the mean of fold means, a pooled
    per-observation standard error, and the per-fold means.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    parts = kfold_split(y.size, folds, seed)
    fold_means = []
    pooled = []
    for held in parts:
        mask = np.ones(y.size, dtype=bool)
        mask[held] = False
        predict = fit_predict(x[mask], y[mask])
        dens = np.asarray(predict(x[held], y[held]), dtype=float)
        if np.any(dens <= 0.0):
            warnings.warn("zero out-of-sample density; fold score is -inf",
                          RuntimeWarning)
            fold_means.append(float("-inf"))
            pooled.extend([-np.inf] * held.size)
            continue
        logs = np.log(dens)
        fold_means.append(float(logs.mean()))
        pooled.extend(logs.tolist())
    pooled_arr = np.asarray(pooled)
    mls = float(np.mean(fold_means))
    se = (float(pooled_arr.std(ddof=1) / np.sqrt(pooled_arr.size))
          if np.all(np.isfinite(pooled_arr)) else float("nan"))
    return mls, se, fold_means


# -- isotonic recalibration ------------------------------------------------------


def _pava(y, w):
    """Pool-adjacent-violators for a nondecreasing fit (level, weight stacks)."""
    levels = []
    weights = []
    for yi, wi in zip(y, w):
        levels.append(float(yi))
        weights.append(float(wi))
        while len(levels) > 1 and levels[-2] > levels[-1]:
            wa, wb = weights[-2], weights[-1]
            merged = (levels[-2] * wa + levels[-1] * wb) / (wa + wb)
            levels[-2:] = [merged]
            weights[-2:] = [wa + wb]
    out = []
    for level, weight in zip(levels, weights):
        out.extend([level] * int(round(weight)))
    return np.asarray(out)


@dataclass
class IsotonicMap:
    """Monotone map p -> p' fitted to (nominal, empirical) coverage pairs.

    Applying it to predictive CDF values keeps them valid distribution
    functions: the map is nondecreasing with range inside [0, 1] and pinned
    endpoints.
    """

    knots_x: np.ndarray
    knots_y: np.ndarray

    def __call__(self, p):
        return np.clip(np.interp(p, self.knots_x, self.knots_y), 0.0, 1.0)


def recalibrate_isotonic(cdf_at_truth) -> IsotonicMap:
    """Fit the recalibration map from training-forecast CDF values.

    Pairs are (sorted u_i, empirical coverage at u_i); pool-adjacent-
    violators enforces monotonicity (ties can locally violate it), and the
    endpoints (0,0) and (1,1) anchor the map.
    """
    u = np.sort(np.asarray(cdf_at_truth, dtype=float))
    if np.any((u < 0.0) | (u > 1.0)):
        raise DomainError("CDF values must lie in [0, 1]")
    n = u.size
    emp = np.searchsorted(u, u, side="right") / n
    fitted = _pava(emp, np.ones(n))
    x = np.concatenate([[0.0], u, [1.0]])
    yv = np.concatenate([[0.0], fitted, [1.0]])
    keep = np.concatenate([[True], np.diff(x) > 0.0])
    return IsotonicMap(knots_x=x[keep], knots_y=np.clip(yv[keep], 0.0, 1.0))


# -- report ------------------------------------------------------------------------


@dataclass
class CalibrationReport:
    """Diagnostic bundle for one fitted model on one dataset."""

    p_grid: np.ndarray
    p_tilde: np.ndarray
    marginal_grid: np.ndarray
    average_density: np.ndarray
    margin_density: np.ndarray
    average_cdf: np.ndarray
    margin_cdf: np.ndarray
    mls_in_sample: float
    mls_in_sample_se: float
    mls_kfold: float = float("nan")
    mls_kfold_se: float = float("nan")
    fold_scores: list = field(default_factory=list)

    def __post_init__(self):
        if np.any(np.diff(self.p_grid) <= 0.0):
            raise DomainError("probability grid must be strictly increasing")
        if np.any((self.p_tilde < 0.0) | (self.p_tilde > 1.0)) \
                or np.any(np.diff(self.p_tilde) < 0.0):
            raise DomainError("empirical coverage must be nondecreasing in [0,1]")

    @property
    def marginal_distance(self):
        """Sup distance between the average predictive CDF and the margin CDF."""
        return float(np.max(np.abs(self.average_cdf - self.margin_cdf)))

    @property
    def probability_distance(self):
        return float(np.max(np.abs(self.p_tilde - self.p_grid)))

    def save(self, prob_csv, marginal_csv, summary_json):
        np.savetxt(prob_csv, np.column_stack([self.p_grid, self.p_tilde]),
                   delimiter=",", header="p,p_tilde", comments="",
                   fmt="%.17g")
        np.savetxt(marginal_csv,
                   np.column_stack([self.marginal_grid, self.average_density,
                                    self.margin_density, self.average_cdf,
                                    self.margin_cdf]),
                   delimiter=",",
                   header="y,average_density,margin_density,average_cdf,margin_cdf",
                   comments="", fmt="%.17g")
        summary = {
            "mls_in_sample": self.mls_in_sample,
            "mls_in_sample_se": self.mls_in_sample_se,
            "mls_kfold": self.mls_kfold,
            "mls_kfold_se": self.mls_kfold_se,
            "fold_scores": self.fold_scores,
            "marginal_distance": self.marginal_distance,
            "probability_distance": self.probability_distance,
        }
        with open(summary_json, "w") as fh:
            json.dump(summary, fh, sort_keys=True, indent=1)
