"""Gaussian copula of a Bayesian linear output layer over network basis functions.

With basis matrix ``B`` (n x q) and a diagonal shrinkage prior
``beta ~ N(0, diag(v))``, integrating ``beta`` out of the pseudo-response
regression gives an n-dimensional Gaussian copula whose correlation matrix is

    R = S (I + B diag(v) B^T) S,   S = diag(s_1 .. s_n),
    s_i = (1 + psi_i^T diag(v) psi_i)^(-1/2).

``R`` is never materialized on the production path: the likelihood conditional
on ``beta`` factorizes over observations because ``S`` is diagonal, so a Gibbs
sweep over ``(beta, scales)`` costs O(nq) per iteration.  Dense evaluation of
the copula density is kept behind a small-n oracle limit for testing.

The noise variance of the pseudo-response regression never enters any of
these expressions (the copula is scale free), so it is pinned to 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import ndtri

from .errors import DomainError, NumericalError, ShapeError
from .margin import MarginModel, to_pseudo

_LOG_2PI = np.log(2.0 * np.pi)

#: Dense-matrix operations refuse instances larger than this.
ORACLE_LIMIT = 64

#: Ridge scale prior p(tau^2) = (b / (2 sqrt(tau^2))) exp(-b sqrt(tau^2));
#: b = ln 2 puts the prior median of tau at 1.
RIDGE_RATE = float(np.log(2.0))

VARIANTS = ("horseshoe", "ridge")


@dataclass
class ShrinkageState:
    """Copula parameters theta and their Gibbs auxiliaries.

    horseshoe: ``beta_j ~ N(0, lam_j^2)``, ``lam_j | tau ~ HalfCauchy(0, tau)``,
    ``tau ~ HalfCauchy(0, 1)``, realized through inverse-gamma auxiliaries
    ``nu_j`` and ``xi``.  ridge: ``beta_j ~ N(0, tau2)`` with the Weibull-type
    scale prior above.
    """

    variant: str
    lam: np.ndarray | None = None
    tau: float | None = None
    nu: np.ndarray | None = None
    xi: float | None = None
    tau2: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown shrinkage variant {self.variant!r}")
        if self.variant == "horseshoe":
            self.lam = np.asarray(self.lam, dtype=float)
            self.nu = np.asarray(self.nu, dtype=float)
            if np.any(self.lam <= 0) or np.any(self.nu <= 0) \
                    or self.tau <= 0 or self.xi <= 0:
                raise DomainError("horseshoe scales must be strictly positive")
        else:
            if self.tau2 is None or self.tau2 <= 0:
                raise DomainError("ridge tau2 must be strictly positive")

    @classmethod
    def initial(cls, variant, q):
        if variant == "horseshoe":
            return cls(variant, lam=np.ones(q), tau=1.0, nu=np.ones(q), xi=1.0)
        return cls(variant, tau2=1.0)

    def prior_variance_diag(self, q):
        """Diagonal of P(theta)^{-1}; P itself is diag of the reciprocals."""
        if self.variant == "horseshoe":
            if self.lam.shape != (q,):
                raise ShapeError(f"state carries q={self.lam.size}, asked {q}")
            return self.lam * self.lam
        return np.full(q, self.tau2)

    def flat(self):
        """Theta components in serialization order."""
        if self.variant == "horseshoe":
            return np.concatenate([self.lam, [self.tau], self.nu, [self.xi]])
        return np.array([self.tau2])

    @classmethod
    def from_flat(cls, variant, values, q):
        values = np.asarray(values, dtype=float)
        if variant == "horseshoe":
            return cls(variant, lam=values[:q], tau=float(values[q]),
                       nu=values[q + 1:2 * q + 1], xi=float(values[2 * q + 1]))
        return cls(variant, tau2=float(values[0]))

    @staticmethod
    def flat_names(variant, q):
        if variant == "horseshoe":
            return ([f"lam_{j + 1}" for j in range(q)] + ["tau"]
                    + [f"nu_{j + 1}" for j in range(q)] + ["xi"])
        return ["tau2"]


# -- scaling and dense oracles ------------------------------------------------


def scaling(psi, state: ShrinkageState) -> float:
    """s = (1 + psi^T P(theta)^{-1} psi)^{-1/2}; O(q) on the diagonal prior."""
    psi = np.asarray(psi, dtype=float)
    v = state.prior_variance_diag(psi.size)
    return float(1.0 / np.sqrt(1.0 + np.dot(psi * psi, v)))


def scaling_rows(basis, state: ShrinkageState) -> np.ndarray:
    """Row-wise scaling factors for a basis matrix, vectorized."""
    basis = np.asarray(basis, dtype=float)
    v = state.prior_variance_diag(basis.shape[1])
    return 1.0 / np.sqrt(1.0 + (basis * basis) @ v)


def corr_matrix(basis, state: ShrinkageState, oracle_limit=ORACLE_LIMIT):
    """Dense copula correlation matrix; testing oracle for small n only."""
    basis = np.asarray(basis, dtype=float)
    n, q = basis.shape
    if n > oracle_limit:
        raise DomainError(
            f"corr_matrix is a small-n oracle (n={n} > limit {oracle_limit}); "
            "the production likelihood never materializes R")
    v = state.prior_variance_diag(q)
    m = np.eye(n) + (basis * v) @ basis.T
    s = 1.0 / np.sqrt(np.diag(m))
    r = m * s[:, None] * s[None, :]
    return 0.5 * (r + r.T)


def copula_logdensity(u, basis, state: ShrinkageState,
                      oracle_limit=ORACLE_LIMIT) -> float:
    """log copula density at u in (0,1)^n; small-n oracle (dense solve)."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise DomainError("copula arguments must lie strictly in (0, 1)")
    z = ndtri(u)
    r = corr_matrix(basis, state, oracle_limit=oracle_limit)
    try:
        cho = cho_factor(r, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "correlation matrix not positive definite; add diagonal jitter "
            "or reduce basis collinearity") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    quad = float(z @ cho_solve(cho, z))
    # log N_n(z; 0, R) - sum log N_1(z_i; 0, 1)
    return -0.5 * logdet - 0.5 * quad + 0.5 * float(z @ z)


# -- O(n) conditional likelihood --------------------------------------------------


def cond_loglik(y, basis, beta, state: ShrinkageState,
                margin: MarginModel) -> float:
    """Log likelihood conditional on beta; linear in n (S is diagonal)."""
    y = np.asarray(y, dtype=float)
    basis = np.asarray(basis, dtype=float)
    if basis.shape[0] != y.size:
        raise ShapeError("basis rows must match observations")
    z = to_pseudo(margin, y)
    s = scaling_rows(basis, state)
    mean = s * (basis @ beta)
    resid = (z - mean) / s
    log_phi_resid = -0.5 * resid * resid - 0.5 * _LOG_2PI
    log_phi_z = -0.5 * z * z - 0.5 * _LOG_2PI
    return float(np.sum(log_phi_resid - np.log(s)
                        + margin.logpdf(y) - log_phi_z))


# -- Gibbs updates ------------------------------------------------------------------


def _inv_gamma(rng, shape, scale, size=None):
    return scale / rng.gamma(shape, size=size)


def sample_beta(z, basis, state: ShrinkageState, rng) -> np.ndarray:
    """Exact draw from beta | z, theta: precision B^T B + P, mean Q^{-1}B^T S^{-1}z."""
    z = np.asarray(z, dtype=float)
    basis = np.asarray(basis, dtype=float)
    q = basis.shape[1]
    v = state.prior_variance_diag(q)
    s = scaling_rows(basis, state)
    prec = basis.T @ basis
    prec[np.diag_indices(q)] += 1.0 / v
    rhs = basis.T @ (z / s)
    try:
        low = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        prec[np.diag_indices(q)] += 1e-10 * np.trace(prec) / q
        try:
            low = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                "posterior precision not positive definite after jitter") from exc
    mean = cho_solve((low, True), rhs)
    noise = solve_triangular(low.T, rng.standard_normal(q), lower=False)
    return mean + noise


def _ridge_log_target(x, q, half_bnorm_sq):
    # density of log tau2 under prior x likelihood of beta | tau2
    return (0.5 * (1.0 - q) * x - half_bnorm_sq * np.exp(-x)
            - RIDGE_RATE * np.exp(0.5 * x))


def _slice_sample_log_tau2(x0, q, half_bnorm_sq, rng, width=1.0,
                           max_steps=200):
    with np.errstate(over="ignore"):
        level = _ridge_log_target(x0, q, half_bnorm_sq) - rng.exponential()
        left = x0 - width * rng.random()
        right = left + width
        steps = 0
        while _ridge_log_target(left, q, half_bnorm_sq) > level \
                and steps < max_steps:
            left -= width
            steps += 1
        steps = 0
        while _ridge_log_target(right, q, half_bnorm_sq) > level \
                and steps < max_steps:
            right += width
            steps += 1
        while True:
            x1 = rng.uniform(left, right)
            if _ridge_log_target(x1, q, half_bnorm_sq) > level:
                return x1
            if x1 < x0:
                left = x1
            else:
                right = x1


def sample_theta(beta, state: ShrinkageState, rng) -> ShrinkageState:
    """One update of the shrinkage parameters from their beta-conditionals.

    These are the conditionals of the prior augmented with beta (half-Cauchy
    auxiliaries for the horseshoe; slice sampling for the ridge scale).  With
    no data (a zero basis) they make the full chain an exact prior sampler.
    Inside :func:`run_mcmc` the same moves serve as proposals and the
    pseudo-response likelihood enters through an acceptance step, because the
    observation scalings also depend on the prior variances.
    """
    beta = np.asarray(beta, dtype=float)
    q = beta.size
    if state.variant == "horseshoe":
        lam2 = _inv_gamma(rng, 1.0, 1.0 / state.nu + 0.5 * beta * beta, size=q)
        nu = _inv_gamma(rng, 1.0, 1.0 / (state.tau ** 2) + 1.0 / lam2, size=q)
        tau2 = _inv_gamma(rng, 0.5 * (q + 1.0),
                          1.0 / state.xi + float(np.sum(1.0 / nu)))
        xi = _inv_gamma(rng, 1.0, 1.0 + 1.0 / tau2)
        return ShrinkageState("horseshoe", lam=np.sqrt(lam2),
                              tau=float(np.sqrt(tau2)), nu=nu, xi=float(xi))
    x0 = np.log(state.tau2)
    x1 = _slice_sample_log_tau2(x0, q, 0.5 * float(beta @ beta), rng)
    return ShrinkageState("ridge", tau2=float(np.exp(x1)))


def _scale_loglik(z, mean_vals, t_vals):
    """log N(z_i; s_i m_i, s_i^2) summed, minus constants; s = (1+T)^(-1/2)."""
    u = 1.0 + t_vals
    root = np.sqrt(u)
    return float(np.sum(-0.5 * z * z * u + z * mean_vals * root
                        + 0.5 * np.log(u)))


def _sample_theta_corrected(beta, state, rng, z, basis_sq, mean_vals):
    """Theta update targeting the exact conditional theta | beta, z.

    horseshoe: per-coordinate independence Metropolis-Hastings on lambda_j^2
    with the conjugate inverse-gamma proposal (prior and proposal terms
    cancel, leaving the likelihood ratio); the nu, tau^2, xi conditionals do
    not touch the likelihood and stay exact Gibbs.  ridge: slice sampling of
    log tau^2 under prior-conditional + likelihood.  Returns
    ``(state, mh_acceptance)``.
    """
    beta = np.asarray(beta, dtype=float)
    q = beta.size
    if state.variant == "horseshoe":
        lam2 = state.lam * state.lam
        nu = state.nu
        t_vals = basis_sq @ lam2
        cur_ll = _scale_loglik(z, mean_vals, t_vals)
        accepted = 0
        log_u = np.log(rng.random(q))
        for j in range(q):
            prop = _inv_gamma(rng, 1.0, 1.0 / nu[j] + 0.5 * beta[j] * beta[j])
            t_star = t_vals + basis_sq[:, j] * (prop - lam2[j])
            new_ll = _scale_loglik(z, mean_vals, t_star)
            if log_u[j] < new_ll - cur_ll:
                lam2[j] = prop
                t_vals = t_star
                cur_ll = new_ll
                accepted += 1
        nu = _inv_gamma(rng, 1.0, 1.0 / (state.tau ** 2) + 1.0 / lam2, size=q)
        tau2 = _inv_gamma(rng, 0.5 * (q + 1.0),
                          1.0 / state.xi + float(np.sum(1.0 / nu)))
        xi = _inv_gamma(rng, 1.0, 1.0 + 1.0 / tau2)
        new_state = ShrinkageState("horseshoe", lam=np.sqrt(lam2),
                                   tau=float(np.sqrt(tau2)), nu=nu,
                                   xi=float(xi))
        return new_state, accepted / q
    row_norms = basis_sq.sum(axis=1)
    half_bnorm_sq = 0.5 * float(beta @ beta)

    def log_target(x):
        with np.errstate(over="ignore"):
            base = _ridge_log_target(x, q, half_bnorm_sq)
            return base + _scale_loglik(z, mean_vals, np.exp(x) * row_norms)

    x0 = np.log(state.tau2)
    level = log_target(x0) - rng.exponential()
    width = 1.0
    left = x0 - width * rng.random()
    right = left + width
    steps = 0
    while log_target(left) > level and steps < 200:
        left -= width
        steps += 1
    steps = 0
    while log_target(right) > level and steps < 200:
        right += width
        steps += 1
    while True:
        x1 = rng.uniform(left, right)
        if log_target(x1) > level:
            break
        if x1 < x0:
            left = x1
        else:
            right = x1
    return ShrinkageState("ridge", tau2=float(np.exp(x1))), 1.0


# -- full sampler --------------------------------------------------------------------


@dataclass
class PosteriorDraws:
    """Retained Gibbs draws of (beta, theta) plus summaries."""

    variant: str
    beta_draws: np.ndarray            # (J, q)
    theta_draws: list                  # J ShrinkageState snapshots
    beta_mean: np.ndarray = field(init=False)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta_draws = np.asarray(self.beta_draws, dtype=float)
        if self.beta_draws.ndim != 2 or self.beta_draws.shape[0] < 1:
            raise ShapeError("beta draws must be a (J >= 1, q) matrix")
        if len(self.theta_draws) != self.beta_draws.shape[0]:
            raise ShapeError("theta draws must align with beta draws")
        self.beta_mean = self.beta_draws.mean(axis=0)

    @property
    def n_draws(self):
        return self.beta_draws.shape[0]

    @property
    def q(self):
        return self.beta_draws.shape[1]

    def prior_variance_matrix(self):
        """(J, q) matrix of prior variance diagonals, one row per draw."""
        return np.vstack([st.prior_variance_diag(self.q)
                          for st in self.theta_draws])

    def save_csv(self, csv_path, header_path, extra_header=None):
        names = ([f"beta_{j + 1}" for j in range(self.q)]
                 + ShrinkageState.flat_names(self.variant, self.q))
        rows = np.hstack([self.beta_draws,
                          np.vstack([st.flat() for st in self.theta_draws])])
        np.savetxt(csv_path, rows, delimiter=",", header=",".join(names),
                   comments="", fmt="%.17g")
        header = {"variant": self.variant, "q": self.q, "draws": self.n_draws,
                  "diagnostics": self.diagnostics}
        if extra_header:
            header.update(extra_header)
        with open(header_path, "w") as fh:
            json.dump(header, fh, sort_keys=True)

    @classmethod
    def load_csv(cls, csv_path, header_path):
        with open(header_path) as fh:
            header = json.load(fh)
        variant, q = header["variant"], header["q"]
        rows = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        thetas = [ShrinkageState.from_flat(variant, row[q:], q) for row in rows]
        draws = cls(variant, rows[:, :q], thetas)
        draws.diagnostics = header.get("diagnostics", {})
        return draws


def _ess(chain):
    """Effective sample size with truncation at the first negative autocorrelation."""
    x = np.asarray(chain, dtype=float)
    n = x.size
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0.0:
        return float(n)
    acc = 0.0
    for lag in range(1, n // 2):
        rho = float(x[:-lag] @ x[lag:]) / (n * var)
        if rho <= 0.0:
            break
        acc += rho
    return n / (1.0 + 2.0 * acc)


def run_mcmc_pseudo(z, basis, variant, burnin=1000, draws=1000, rng=None,
                    thin=1) -> PosteriorDraws:
    """Gibbs over (beta, theta) given pseudo-responses; see :func:`run_mcmc`."""
    if rng is None:
        raise DomainError("run_mcmc requires an explicit rng for reproducibility")
    z = np.asarray(z, dtype=float)
    basis = np.asarray(basis, dtype=float)
    n, q = basis.shape
    if z.size != n:
        raise ShapeError("pseudo-responses must match basis rows")
    state = ShrinkageState.initial(variant, q)
    ridge_init = basis.T @ basis + np.eye(q)
    beta = np.linalg.solve(ridge_init, basis.T @ z)
    basis_sq = basis * basis

    kept_beta = np.empty((draws, q))
    kept_theta = []
    total = burnin + draws * thin
    j = 0
    acc_sum = 0.0
    for it in range(total):
        beta = sample_beta(z, basis, state, rng)
        state, acc = _sample_theta_corrected(beta, state, rng, z, basis_sq,
                                             basis @ beta)
        acc_sum += acc
        if it >= burnin and (it - burnin) % thin == 0:
            kept_beta[j] = beta
            kept_theta.append(state)
            j += 1
    scale_chain = np.array(
        [st.tau if variant == "horseshoe" else st.tau2 for st in kept_theta])
    diagnostics = {
        "acceptance": acc_sum / total,
        "ess_beta_norm": _ess(np.sum(kept_beta * kept_beta, axis=1)),
        "ess_scale": _ess(np.log(scale_chain)),
    }
    return PosteriorDraws(variant, kept_beta, kept_theta,
                          diagnostics=diagnostics)


def run_mcmc(y, basis, variant, margin: MarginModel, burnin=1000, draws=1000,
             rng=None, thin=1) -> PosteriorDraws:
    """Sample beta, theta | y: pseudo-responses from the margin, then Gibbs.

    Deterministic given the rng seed; scaling factors are refreshed inside
    every conditional draw, so theta changes propagate immediately.
    """
    z = to_pseudo(margin, np.asarray(y, dtype=float))
    return run_mcmc_pseudo(z, basis, variant, burnin=burnin, draws=draws,
                           rng=rng, thin=thin)
