"""copreg: marginally calibrated distributional regression and simulation-based inference.

The library combines three ingredients:

* a nonparametric response margin (:mod:`copreg.margin`),
* the Gaussian copula implied by a Bayesian linear output layer over
  neural-network basis functions, sampled by Gibbs under shrinkage priors
  (:mod:`copreg.copula`, :mod:`copreg.nnet`),
* plug-in predictive densities, calibration diagnostics, and a
  likelihood-free inference pipeline built on stochastic ecological
  simulators (:mod:`copreg.predict`, :mod:`copreg.calibration`,
  :mod:`copreg.lfi`).
"""

__version__ = "0.1.0"

from . import errors
from .margin import MarginModel, fit_kde, to_pseudo

__all__ = [
    "errors",
    "MarginModel",
    "fit_kde",
    "to_pseudo",
    "__version__",
    "copula",
    "nnet",
    "predict",
    "calibration",
    "pipeline",
    "lfi",
]


def __getattr__(name):
    # submodules importable lazily via the package namespace
    if name in ("copula", "nnet", "predict", "calibration", "pipeline",
                "lfi", "cli"):
        import importlib
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module 'copreg' has no attribute {name!r}")
