"""Likelihood fragments for non-Gaussian responses.

Three updates, all emitting multivariate-normal natural-parameter messages to
the coefficient node: a tangent (variational-bound) logistic fragment, a
probit fragment that integrates out truncated-normal auxiliaries in closed
form, and a fixed-point Poisson fragment for the log link.  Each update is
pure: it takes the current fragment state plus the two message vectors on the
coefficient edge and returns a replacement state and a fresh outbound message.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, log_ndtr

from .natparam import mvn_moments_from_natural, vec, vec_inverse

_LOG_2PI = float(np.log(2.0 * np.pi))

OVERFLOW_LIMIT = 700.0


class LinearPredictorOverflowError(ArithmeticError):
    """exp() of a linear predictor would overflow.

    This is a modeling signal (diverging iterates or wild predictor scale),
    not a numerics bug, so it is raised instead of silently clipping.
    """

    def __init__(self, worst):
        self.worst = float(worst)
        super().__init__(
            f"linear predictor {worst:.3g} exceeds {OVERFLOW_LIMIT:g}; "
            "consider damping (rho < 1) or rescaling predictors"
        )


def _check_binary(y):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("binary response must contain only 0/1 values")
    return y


@dataclass(frozen=True)
class LogisticFragmentState:
    y: np.ndarray
    A: np.ndarray
    xi: np.ndarray = None
    Xi: np.ndarray = None

    def __post_init__(self):
        y = _check_binary(self.y)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        xi = np.ones(y.size) if self.xi is None else np.atleast_1d(np.asarray(self.xi, dtype=float))
        Xi = np.zeros((A.shape[1],) * 2) if self.Xi is None else np.asarray(self.Xi, dtype=float)
        if np.any(xi < 0):
            raise ValueError("xi must be nonnegative")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "Xi", Xi)


@dataclass(frozen=True)
class ProbitFragmentState:
    y: np.ndarray
    A: np.ndarray
    nu: np.ndarray = None

    def __post_init__(self):
        y = _check_binary(self.y)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        nu = np.zeros(y.size) if self.nu is None else np.atleast_1d(np.asarray(self.nu, dtype=float))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "nu", nu)


@dataclass(frozen=True)
class PoissonFragmentState:
    y: np.ndarray
    A: np.ndarray
    omega: np.ndarray = None

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise ValueError("count response must contain nonnegative integers")
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        omega = np.ones(y.size) if self.omega is None else np.atleast_1d(np.asarray(self.omega, dtype=float))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "omega", omega)


def _combined_moments(state, eta_factor_to_theta, eta_theta_to_factor, context):
    eta = np.asarray(eta_factor_to_theta) + np.asarray(eta_theta_to_factor)
    d = state.A.shape[1]
    return mvn_moments_from_natural(eta, d, context=context)


def tangent_weight(xi):
    """tanh(xi/2)/(4 xi), with the removable xi=0 singularity filled by series.

    Even in xi, valued in (0, 1/8].
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty_like(xi)
    small = np.abs(xi) < 1e-4
    xs = xi[small]
    out[small] = 0.125 - xs**2 / 96.0 + xs**4 / 960.0
    xl = xi[~small]
    out[~small] = np.tanh(0.5 * xl) / (4.0 * xl)
    return out


def tangent_offset(xi):
    """Constant term of the quadratic logistic lower bound at tilt xi."""
    xi = np.asarray(xi, dtype=float)
    return 0.5 * xi - np.logaddexp(0.0, xi) + tangent_weight(xi) * xi**2


def jaakkola_jordan_update(state: LogisticFragmentState, eta_factor_to_theta, eta_theta_to_factor):
    mu, Sigma = _combined_moments(state, eta_factor_to_theta, eta_theta_to_factor, "logistic fragment")
    Xi = Sigma + np.outer(mu, mu)  # second moment of the combined coefficient density
    A = state.A
    xi = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", A, Xi, A), 0.0))
    W = tangent_weight(xi)
    msg = np.concatenate([A.T @ (state.y - 0.5), -vec(A.T @ (W[:, None] * A))])
    return replace(state, xi=xi, Xi=Xi), msg


def zeta_prime(x):
    """phi(x)/Phi(x), the N(0,1) density over its cdf, stable on [-40, 40].

    Moderate arguments go through log space; deep left-tail arguments use the
    classical continued fraction for the Mills ratio, giving
    zeta_prime(x) ~ -x + 1/x for x << 0.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x_arr)
    left = x_arr < -8.0
    xm = x_arr[~left]
    out[~left] = np.exp(-0.5 * xm**2 - 0.5 * _LOG_2PI - log_ndtr(xm))
    t = -x_arr[left]
    cf = np.zeros_like(t)
    for k in range(60, 0, -1):
        cf = k / (t + cf)
    out[left] = t + cf
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out[0])
    return out


def albert_chib_update(state: ProbitFragmentState, eta_factor_to_theta, eta_theta_to_factor):
    mu, _ = _combined_moments(state, eta_factor_to_theta, eta_theta_to_factor, "probit fragment")
    A = state.A
    nu = A @ mu
    sgn = 2.0 * state.y - 1.0
    shifted = nu + sgn * zeta_prime(sgn * nu)  # truncated-normal means, auxiliaries integrated out
    msg = np.concatenate([A.T @ shifted, -0.5 * vec(A.T @ A)])
    return replace(state, nu=nu), msg


def knowles_minka_wand_update(state: PoissonFragmentState, eta_factor_to_theta, eta_theta_to_factor):
    mu, Sigma = _combined_moments(state, eta_factor_to_theta, eta_theta_to_factor, "poisson fragment")
    A = state.A
    lin = A @ mu + 0.5 * np.einsum("ij,jk,ik->i", A, Sigma, A)
    worst = float(np.max(lin))
    if worst > OVERFLOW_LIMIT:
        raise LinearPredictorOverflowError(worst)
    omega = np.exp(lin)
    first = A.T @ (state.y - omega) + A.T @ (omega[:, None] * A) @ mu
    msg = np.concatenate([first, -0.5 * vec(A.T @ (omega[:, None] * A))])
    return replace(state, omega=omega), msg


# ---------------------------------------------------------------------------
# ELBO contributions: E_q{log p(y | theta)} (exact or lower bound)


def jaakkola_jordan_elbo(state: LogisticFragmentState, q_eta):
    """Tangent lower bound on the logistic log likelihood under q."""
    mu, Sigma = mvn_moments_from_natural(q_eta, state.A.shape[1], context="logistic elbo")
    A = state.A
    second = np.einsum("ij,jk,ik->i", A, Sigma + np.outer(mu, mu), A)
    W = tangent_weight(state.xi)
    return float((state.y - 0.5) @ (A @ mu) - W @ second + np.sum(tangent_offset(state.xi)))


def albert_chib_elbo(state: ProbitFragmentState, q_eta):
    """Exact E_q log p(y | theta) for the probit model with the auxiliaries
    collapsed; truncated-normal entropies cancel the cross terms."""
    mu, Sigma = mvn_moments_from_natural(q_eta, state.A.shape[1], context="probit elbo")
    A = state.A
    m = A @ mu
    sgn = 2.0 * state.y - 1.0
    s2 = np.einsum("ij,jk,ik->i", A, Sigma, A)
    return float(np.sum(log_ndtr(sgn * m)) - 0.5 * np.sum(s2))


def knowles_minka_wand_elbo(state: PoissonFragmentState, q_eta):
    mu, Sigma = mvn_moments_from_natural(q_eta, state.A.shape[1], context="poisson elbo")
    A = state.A
    lin = A @ mu + 0.5 * np.einsum("ij,jk,ik->i", A, Sigma, A)
    if float(np.max(lin)) > OVERFLOW_LIMIT:
        raise LinearPredictorOverflowError(float(np.max(lin)))
    return float(state.y @ (A @ mu) - np.sum(np.exp(lin)) - np.sum(gammaln(state.y + 1.0)))


def kmw_local_objective(state: PoissonFragmentState, mu, Sigma, eta_other):
    """Local objective whose mu-gradient vanishes at the Poisson fixed point.

    eta_other is the sum of all non-Poisson messages into the coefficient
    node.  Sigma is held fixed; terms constant in mu are dropped.
    """
    mu = np.asarray(mu, dtype=float)
    A = state.A
    lin = A @ mu + 0.5 * np.einsum("ij,jk,ik->i", A, Sigma, A)
    eta_other = np.asarray(eta_other)
    d = mu.size
    M = vec_inverse(eta_other[d:], d)
    return float(
        state.y @ (A @ mu) - np.sum(np.exp(lin)) + eta_other[:d] @ mu + mu @ M @ mu
    )
