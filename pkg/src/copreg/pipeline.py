"""End-to-end estimation: margin, pseudo-responses, basis training, Gibbs.

Also houses the plain regression baseline (network fit to the raw response
with a homoscedastic Gaussian predictive) used for comparisons, and the
on-disk bundle format shared by the CLI.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from . import __version__
from .copula import PosteriorDraws, run_mcmc_pseudo
from .errors import DataError
from .margin import MarginModel, fit_kde, to_pseudo
from .nnet import Network, TrainConfig, build_ffn, train
from .predict import PredictiveModel


@dataclass
class FeatureScaler:
    """Min-max rescaling of continuous columns to [0, 1].

    Columns with at most two distinct values (indicators) pass through, as
    do zero-range columns.
    """

    lo: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, x):
        x = np.asarray(x, dtype=float)
        lo = x.min(axis=0)
        hi = x.max(axis=0)
        span = hi - lo
        for j in range(x.shape[1]):
            if np.unique(x[:, j]).size <= 2 or span[j] == 0.0:
                lo[j], span[j] = 0.0, 1.0
        return cls(lo=lo, span=span)

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.lo) / self.span

    def to_json(self):
        return json.dumps({"lo": self.lo.tolist(), "span": self.span.tolist()},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(lo=np.asarray(doc["lo"]), span=np.asarray(doc["span"]))


@dataclass
class CopulaRegression:
    """Fitted model: the pieces of the three estimation steps plus access."""

    margin: MarginModel
    network: Network
    draws: PosteriorDraws
    scaler: FeatureScaler | None = None
    meta: dict = field(default_factory=dict)

    @property
    def predictive(self) -> PredictiveModel:
        net = self.network if self.scaler is None else _ScaledBasis(
            self.network, self.scaler)
        return PredictiveModel.from_draws(self.margin, net, self.draws)

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "margin.json"), "w") as fh:
            fh.write(self.margin.to_json())
        with open(os.path.join(out_dir, "network.json"), "w") as fh:
            fh.write(self.network.to_json())
        sampler_keys = ("seed", "burnin", "thin")
        self.draws.save_csv(os.path.join(out_dir, "draws.csv"),
                            os.path.join(out_dir, "draws_header.json"),
                            extra_header={k: self.meta[k]
                                          for k in sampler_keys
                                          if k in self.meta})
        if self.scaler is not None:
            with open(os.path.join(out_dir, "scaler.json"), "w") as fh:
                fh.write(self.scaler.to_json())
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump({"kind": "copula-regression-bundle",
                       "version": __version__, **self.meta}, fh,
                      sort_keys=True, indent=1)

    @classmethod
    def load(cls, out_dir):
        def read(name):
            path = os.path.join(out_dir, name)
            if not os.path.exists(path):
                raise DataError(f"bundle is missing {name}")
            with open(path) as fh:
                return fh.read()

        margin = MarginModel.from_json(read("margin.json"))
        network = Network.from_json(read("network.json"))
        draws = PosteriorDraws.load_csv(
            os.path.join(out_dir, "draws.csv"),
            os.path.join(out_dir, "draws_header.json"))
        scaler_path = os.path.join(out_dir, "scaler.json")
        scaler = None
        if os.path.exists(scaler_path):
            with open(scaler_path) as fh:
                scaler = FeatureScaler.from_json(fh.read())
        meta = json.loads(read("manifest.json"))
        return cls(margin=margin, network=network, draws=draws, scaler=scaler,
                   meta=meta)


class _ScaledBasis:
    """Basis provider composing a feature scaler with a network."""

    def __init__(self, network, scaler):
        self.network = network
        self.scaler = scaler

    def extract_basis(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = self.scaler.transform(np.atleast_2d(x))
        basis = self.network.extract_basis(x2)
        return basis[0] if single else basis


def fit_copula_regression(x, y, variant="horseshoe", network=None,
                          train_cfg=None, burnin=1000, draws=1000, thin=1,
                          seed=0, rescale_features=True) -> CopulaRegression:
    """Three-step estimation of the copula regression.

    1. fit the nonparametric margin to ``y``;
    2. map to pseudo-responses, train the network on them, extract basis;
    3. Gibbs over the output-layer coefficients and shrinkage parameters.

    ``network`` defaults to the dense feed-forward preset; pass a
    convolutional network for series features (set ``rescale_features``
    False there, series inputs stay raw).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.size:
        raise DataError("feature rows must match response length")
    margin = fit_kde(y)
    z = to_pseudo(margin, y)

    scaler = None
    x_in = x
    if rescale_features and x.ndim == 2:
        scaler = FeatureScaler.fit(x)
        x_in = scaler.transform(x)
    if network is None:
        network = build_ffn(x.shape[1], seed=seed)
    if train_cfg is None:
        # protocol: full-batch updates for the dense preset
        train_cfg = TrainConfig(epochs=200, batch_size=None, seed=seed)
    train(network, x_in, z, train_cfg)

    basis = network.extract_basis(x_in)
    rng = np.random.default_rng(seed + 1)
    posterior = run_mcmc_pseudo(z, basis, variant, burnin=burnin, draws=draws,
                                rng=rng, thin=thin)
    meta = {"variant": variant, "seed": seed, "n": int(y.size),
            "q": int(posterior.q), "burnin": burnin, "thin": thin}
    return CopulaRegression(margin=margin, network=network, draws=posterior,
                            scaler=scaler, meta=meta)


# -- plain regression baseline ---------------------------------------------------


@dataclass
class GaussianBaseline:
    """Network regression on the raw response with N(f(x), sigma2) forecasts."""

    network: Network
    sigma2: float
    scaler: FeatureScaler | None = None

    def _mean(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.scaler is not None:
            x = self.scaler.transform(x)
        return self.network.forward(x)[:, 0]

    def density_at(self, x_rows, y_values):
        mu = self._mean(x_rows)
        return norm.pdf(np.asarray(y_values, dtype=float), loc=mu,
                        scale=np.sqrt(self.sigma2))

    def cdf_at(self, x_rows, y_values):
        mu = self._mean(x_rows)
        return ndtr((np.asarray(y_values, dtype=float) - mu)
                    / np.sqrt(self.sigma2))

    def average_density(self, x_rows, y_grid):
        mu = self._mean(x_rows)
        y_grid = np.asarray(y_grid, dtype=float)
        return norm.pdf(y_grid[None, :], loc=mu[:, None],
                        scale=np.sqrt(self.sigma2)).mean(axis=0)

    def average_cdf(self, x_rows, y_grid):
        mu = self._mean(x_rows)
        y_grid = np.asarray(y_grid, dtype=float)
        return ndtr((y_grid[None, :] - mu[:, None])
                    / np.sqrt(self.sigma2)).mean(axis=0)


def fit_gaussian_baseline(x, y, network=None, train_cfg=None, seed=0,
                          rescale_features=True) -> GaussianBaseline:
    """Train the same architecture directly on the response; estimate sigma2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    scaler = None
    x_in = x
    if rescale_features and x.ndim == 2:
        scaler = FeatureScaler.fit(x)
        x_in = scaler.transform(x)
    if network is None:
        network = build_ffn(x.shape[1], seed=seed, output_bias=True)
    if train_cfg is None:
        train_cfg = TrainConfig(epochs=200, batch_size=None, seed=seed)
    train(network, x_in, y, train_cfg)
    resid = y - network.forward(x_in)[:, 0]
    sigma2 = float(np.mean(resid * resid))
    if sigma2 == 0.0:
        sigma2 = 1e-12
    return GaussianBaseline(network=network, sigma2=sigma2, scaler=scaler)


def config_hash(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]
