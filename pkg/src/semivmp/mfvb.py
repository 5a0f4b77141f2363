"""Independent reference implementations used to validate the message-passing engine.

Two things live here, and both are deliberately self-contained:

* a coordinate-ascent mean-field fit of the Bayesian linear model with the
  half-Cauchy-inducing variance chain (the four-update cycle), written directly
  in common-parameter form with no imports from the natural-parameter modules;
* numeric oracles (adaptive quadrature / seeded Monte Carlo) for
  exponential-family moments and entropies, plus prior-simulation helpers for
  the hierarchical variance constructions.

Keeping this module island-like is the point: when the engine and this file
agree, they agree for non-circular reasons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln, psi

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class MfvbState:
    mu_q_beta: np.ndarray
    Sigma_q_beta: np.ndarray
    lambda_q_sigsq: float
    lambda_q_a: float
    iterations: int = 0
    converged: bool = False
    elbo_trace: list = field(default_factory=list)


def _elbo_linreg(y, X, mu_beta, Sigma_beta, A_hyper, mu_q, Sigma_q, lam_s, lam_a):
    """Evidence lower bound for the linear model, in common parameters.

    q(sigma^2) is inverse-gamma(alpha=(n+1)/2, beta=lam_s/2) and q(a) is
    inverse-gamma(1, lam_a/2); all expectations below are the textbook
    inverse-gamma/Gaussian ones.
    """
    n, d = X.shape
    alpha_s, beta_s = 0.5 * (n + 1.0), 0.5 * lam_s
    alpha_a, beta_a = 1.0, 0.5 * lam_a
    E_inv_s = alpha_s / beta_s
    E_log_s = np.log(beta_s) - psi(alpha_s)
    E_inv_a = alpha_a / beta_a
    E_log_a = np.log(beta_a) - psi(alpha_a)

    resid = y - X @ mu_q
    XtX = X.T @ X
    ll = (
        -0.5 * n * _LOG_2PI
        - 0.5 * n * E_log_s
        - 0.5 * E_inv_s * (resid @ resid + np.sum(XtX * Sigma_q))
    )
    Sb_inv = np.linalg.inv(Sigma_beta)
    dm = mu_q - mu_beta
    lp_beta = (
        -0.5 * d * _LOG_2PI
        - 0.5 * np.linalg.slogdet(Sigma_beta)[1]
        - 0.5 * (dm @ Sb_inv @ dm + np.sum(Sb_inv * Sigma_q))
    )
    # sigma^2 | a  ~  inverse-gamma(1/2, 1/(2a))
    lp_s = (
        -0.5 * np.log(2.0) - 0.5 * E_log_a - gammaln(0.5) - 1.5 * E_log_s
        - 0.5 * E_inv_a * E_inv_s
    )
    # a ~ inverse-gamma(1/2, 1/(2 A^2))
    lp_a = (
        -0.5 * np.log(2.0 * A_hyper**2)
        - gammaln(0.5)
        - 1.5 * E_log_a
        - E_inv_a / (2.0 * A_hyper**2)
    )
    H_beta = 0.5 * d * (1.0 + _LOG_2PI) + 0.5 * np.linalg.slogdet(Sigma_q)[1]
    H_s = alpha_s + np.log(beta_s) + gammaln(alpha_s) - (1.0 + alpha_s) * psi(alpha_s)
    H_a = alpha_a + np.log(beta_a) + gammaln(alpha_a) - (1.0 + alpha_a) * psi(alpha_a)
    return float(ll + lp_beta + lp_s + lp_a + H_beta + H_s + H_a)


def mfvb_linear_regression(
    y,
    X,
    mu_beta=None,
    Sigma_beta=None,
    A_hyper=1e5,
    tol=1e-10,
    max_iter=1000,
    lambda_sigsq_init=1.0,
    track_elbo=True,
):
    """Coordinate-ascent mean-field fit of y | beta, sigma^2 ~ N(X beta, sigma^2 I).

    Prior chain: beta ~ N(mu_beta, Sigma_beta); sigma^2 | a ~ Inverse-chi^2(1, 1/a);
    a ~ Inverse-chi^2(1, 1/A_hyper^2), so sigma has a Half-Cauchy(A_hyper) prior.
    Cycles the four closed-form updates until the relative change of every
    variational parameter falls below tol.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n != y.size:
        raise ValueError("X rows must match y length")
    if mu_beta is None:
        mu_beta = np.zeros(d)
    if Sigma_beta is None:
        Sigma_beta = 1e10 * np.eye(d)
    mu_beta = np.asarray(mu_beta, dtype=float)
    Sigma_beta = np.asarray(Sigma_beta, dtype=float)

    XtX = X.T @ X
    Xty = X.T @ y
    yty = float(y @ y)
    Sb_inv = np.linalg.inv(Sigma_beta)
    Sb_inv_mu = Sb_inv @ mu_beta

    lam_s = float(lambda_sigsq_init)
    lam_a = 1.0
    mu_q = np.zeros(d)
    Sigma_q = np.eye(d)
    trace = []
    prev = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w = (n + 1.0) / lam_s
        Sigma_q = np.linalg.inv(w * XtX + Sb_inv)
        mu_q = Sigma_q @ (w * Xty + Sb_inv_mu)
        lam_a = (n + 1.0) / lam_s + A_hyper**-2
        lam_s = (
            yty
            - 2.0 * (mu_q @ Xty)
            + float(np.sum(XtX * (Sigma_q + np.outer(mu_q, mu_q))))
            + 2.0 / lam_a
        )
        if track_elbo:
            trace.append(
                _elbo_linreg(
                    y, X, mu_beta, Sigma_beta, A_hyper, mu_q, Sigma_q, lam_s, lam_a
                )
            )
        cur = np.concatenate([mu_q, Sigma_q.ravel(), [lam_s, lam_a]])
        if prev is not None:
            delta = np.max(np.abs(cur - prev) / np.maximum(1.0, np.abs(prev)))
            if delta < tol:
                converged = True
                prev = cur
                break
        prev = cur

    return MfvbState(
        mu_q_beta=mu_q,
        Sigma_q_beta=Sigma_q,
        lambda_q_sigsq=lam_s,
        lambda_q_a=lam_a,
        iterations=it,
        converged=converged,
        elbo_trace=trace,
    )


# ---------------------------------------------------------------------------
# numeric oracles for the exponential-family catalog


@dataclass
class OracleResult:
    estimate: np.ndarray
    se: np.ndarray | None
    method: str
    n_draws: int = 0


# sufficient statistics / base measures, written from the definitions
_SCALAR_DEFS = {
    "bernoulli": None,  # finite support, handled separately
    "univariate_normal": {
        "support": (-np.inf, np.inf),
        "T": lambda x: np.array([x, x * x]),
        "log_h": lambda x: -0.5 * _LOG_2PI,
        "n_stats": 2,
    },
    "inverse_chi_squared": {
        "support": (0.0, np.inf),
        "T": lambda x: np.array([np.log(x), 1.0 / x]),
        "log_h": lambda x: 0.0,
        "n_stats": 2,
    },
    "beta": {
        "support": (0.0, 1.0),
        "T": lambda x: np.array([np.log(x), np.log1p(-x)]),
        "log_h": lambda x: 0.0,
        "n_stats": 2,
    },
    "inverse_gaussian": {
        "support": (0.0, np.inf),
        "T": lambda x: np.array([x, 1.0 / x]),
        "log_h": lambda x: -0.5 * _LOG_2PI - 1.5 * np.log(x),
        "n_stats": 2,
    },
}


def _scalar_quadrature(family, eta, statistic):
    eta = np.asarray(eta, dtype=float)
    if family == "bernoulli":
        p1 = float(np.exp(eta[0] - np.logaddexp(0.0, eta[0])))
        if statistic == "suff_stat":
            return np.array([p1])
        return np.array([-(1.0 - p1) * np.log(1.0 - p1) - p1 * np.log(p1)])
    spec = _SCALAR_DEFS[family]
    lo, hi = spec["support"]

    def logw(x):
        return spec["log_h"](x) + float(eta @ spec["T"](x))

    # shift by the max of log w over a probe grid so quad sees O(1) values
    if np.isinf(hi):
        probe = np.geomspace(1e-6, 1e3, 400) if lo == 0.0 else np.linspace(-50, 50, 400)
    else:
        probe = np.linspace(lo + 1e-9, hi - 1e-9, 400)
    shift = max(logw(float(t)) for t in probe)

    def w(x):
        return np.exp(logw(x) - shift)

    if np.isinf(hi):
        def quad_of(f):
            val, _ = integrate.quad(lambda x: f(x) * w(x), lo, hi, limit=400)
            return val
    else:
        # substitute x = lo + (hi-lo) sin^2(t): tames the algebraic endpoint
        # singularities of e.g. Beta(1/2, 1/2) that defeat plain quad
        span = hi - lo

        def quad_of(f):
            def g(t):
                s = np.sin(t)
                x = lo + span * s * s
                return f(x) * w(x) * 2.0 * span * s * np.cos(t)

            val, _ = integrate.quad(g, 0.0, 0.5 * np.pi, limit=400)
            return val

    Z = quad_of(lambda x: 1.0)
    if statistic == "suff_stat":
        return np.array(
            [quad_of(lambda x, k=k: spec["T"](x)[k]) / Z for k in range(spec["n_stats"])]
        )
    if statistic == "entropy":
        return np.array([np.log(Z) + shift - quad_of(logw) / Z])
    raise ValueError(statistic)


def _matrix_common(family, eta, d):
    """Local natural->common inversion for the Monte-Carlo branch."""
    eta = np.asarray(eta, dtype=float)
    if family == "multivariate_normal":
        S = eta[d:].reshape((d, d), order="F")
        P = -(S + S.T)  # -2 * symmetrized matrix block
        Sigma = np.linalg.inv(P)
        Sigma = 0.5 * (Sigma + Sigma.T)
        return {"mu": Sigma @ eta[:d], "Sigma": Sigma}
    M = eta[1:].reshape((d, d), order="F")
    M = 0.5 * (M + M.T)
    kappa = -2.0 * eta[0] - d - 1.0
    return {"kappa": kappa, "Lambda": -2.0 * M}


def _matrix_monte_carlo(family, eta, d, statistic, n_draws, seed):
    rng = np.random.default_rng(seed)
    com = _matrix_common(family, eta, d)
    if family == "multivariate_normal":
        draws = rng.multivariate_normal(com["mu"], com["Sigma"], size=n_draws)
        if statistic == "suff_stat":
            outer = np.einsum("ni,nj->nij", draws, draws)
            stats_mat = np.concatenate(
                [draws, outer.transpose(0, 2, 1).reshape(n_draws, -1)], axis=1
            )
        else:
            lp = stats.multivariate_normal(com["mu"], com["Sigma"]).logpdf(draws)
            stats_mat = -lp[:, None]
    elif family == "inverse_wishart":
        iw = stats.invwishart(df=com["kappa"], scale=com["Lambda"])
        draws = iw.rvs(size=n_draws, random_state=rng)
        draws = draws.reshape(n_draws, d, d)
        if statistic == "suff_stat":
            sign, logdet = np.linalg.slogdet(draws)
            inv = np.linalg.inv(draws)
            stats_mat = np.concatenate(
                [logdet[:, None], inv.transpose(0, 2, 1).reshape(n_draws, -1)], axis=1
            )
        else:
            stats_mat = -iw.logpdf(draws.transpose(1, 2, 0))[:, None]
    elif family == "inverse_g_wishart_diag":
        kappa_scalar = com["kappa"] + d - 1.0  # per-diagonal inverse-chi^2 shape
        lam = np.diag(com["Lambda"])
        diag_draws = np.empty((n_draws, d))
        for j in range(d):
            diag_draws[:, j] = stats.invgamma.rvs(
                a=0.5 * kappa_scalar, scale=0.5 * lam[j], size=n_draws, random_state=rng
            )
        if statistic == "suff_stat":
            logdet = np.sum(np.log(diag_draws), axis=1)
            inv_diag = 1.0 / diag_draws
            inv_mats = np.zeros((n_draws, d, d))
            idx = np.arange(d)
            inv_mats[:, idx, idx] = inv_diag
            stats_mat = np.concatenate(
                [logdet[:, None], inv_mats.transpose(0, 2, 1).reshape(n_draws, -1)],
                axis=1,
            )
        else:
            lp = np.zeros(n_draws)
            for j in range(d):
                lp += stats.invgamma.logpdf(
                    diag_draws[:, j], a=0.5 * kappa_scalar, scale=0.5 * lam[j]
                )
            stats_mat = -lp[:, None]
    else:
        raise ValueError(family)
    est = stats_mat.mean(axis=0)
    se = stats_mat.std(axis=0, ddof=1) / np.sqrt(n_draws)
    return est, se


def moment_oracle(family, eta, d=1, method="quadrature", statistic="suff_stat",
                  budget=200_000, seed=0):
    """Numeric estimate of E{T(x)} (or the entropy) for a family member.

    Scalar families use adaptive quadrature of the unnormalized density (the
    closed-form tables are never consulted); matrix families use seeded Monte
    Carlo and also return standard errors.
    """
    if method == "quadrature":
        if family not in _SCALAR_DEFS:
            raise ValueError(f"quadrature oracle only covers scalar families, not {family}")
        est = _scalar_quadrature(family, eta, statistic)
        return OracleResult(estimate=est, se=None, method="quadrature")
    if method == "monte_carlo":
        est, se = _matrix_monte_carlo(family, eta, d, statistic, int(budget), seed)
        return OracleResult(estimate=est, se=se, method="monte_carlo", n_draws=int(budget))
    raise ValueError(method)


# ---------------------------------------------------------------------------
# prior-simulation helpers for the hierarchical variance constructions


def sample_scale_chain(A, n_draws, seed=0):
    """Draws of sigma from sigma^2 | a ~ Inv-chi^2(1, 1/a), a ~ Inv-chi^2(1, 1/A^2).

    The marginal law of sigma is Half-Cauchy(A); callers KS-test against it.
    """
    rng = np.random.default_rng(seed)
    # Inverse-chi^2(kappa, lam) == inverse-gamma(kappa/2, lam/2)
    a = stats.invgamma.rvs(a=0.5, scale=0.5 / A**2, size=n_draws, random_state=rng)
    sigsq = stats.invgamma.rvs(a=0.5, scale=0.5 / a, size=n_draws, random_state=rng)
    return np.sqrt(sigsq)


def sample_covariance_chain_correlation(nu, A_diag, n_draws, seed=0):
    """Correlation draws from the marginally-noninformative 2x2 covariance prior.

    The chain is A = diag(A_11, A_22) with A_jj ~ Inv-chi^2(d, 1/(nu A_j^2))
    independently, then Sigma | A ~ Inverse-Wishart(nu + d - 1, A^{-1}).
    With nu=2 the implied correlation is Uniform(-1, 1).

    Sigma | A is realized through the Bartlett construction so that 1e5 draws
    stay fast: Sigma = A^{-1/2} W^{-1} A^{-1/2} with W ~ Wishart(df, I).
    """
    A_diag = np.asarray(A_diag, dtype=float)
    d = A_diag.size
    if d != 2:
        raise ValueError("correlation sampler is for the 2x2 construction")
    rng = np.random.default_rng(seed)
    # per-diagonal inverse-chi^2 shape is kappa + d - 1 = d for kappa = 1
    a = np.empty((n_draws, d))
    for j in range(d):
        a[:, j] = stats.invgamma.rvs(
            a=0.5 * d, scale=0.5 / (nu * A_diag[j] ** 2), size=n_draws, random_state=rng
        )
    df = nu + d - 1.0
    t11 = np.sqrt(rng.chisquare(df, size=n_draws))
    t22 = np.sqrt(rng.chisquare(df - 1.0, size=n_draws))
    t21 = rng.standard_normal(n_draws)
    # W = T T^T lower-triangular Bartlett; Sigma = A^{-1/2} W^{-1} A^{-1/2}
    w11 = t11**2
    w12 = t11 * t21
    w22 = t21**2 + t22**2
    det = w11 * w22 - w12**2
    s11 = (w22 / det) / a[:, 0]
    s22 = (w11 / det) / a[:, 1]
    s12 = (-w12 / det) / np.sqrt(a[:, 0] * a[:, 1])
    return s12 / np.sqrt(s11 * s22)
