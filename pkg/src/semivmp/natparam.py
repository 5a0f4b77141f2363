"""Matrix/vector primitives for natural-parameter message algebra.

Everything here is a pure function of numpy arrays.  The central object is
``g_vmp``, the expectation of a quadratic form under a multivariate normal
supplied in natural-parameter coordinates; the surrounding helpers (column
stacking, symmetry enforcement, SPD solves with named error context) exist
because message arithmetic accumulates round-off asymmetry and the failure
modes need to say *which* node went bad.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class SpdFactorizationError(ValueError):
    """A matrix that must be symmetric positive definite failed to factor.

    Carries the context string (node/factor name) supplied by the caller so
    errors surfacing from deep inside a sweep identify the offending part of
    the graph.
    """

    def __init__(self, context, detail=""):
        self.context = context
        msg = f"matrix not symmetric positive definite ({context})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DimensionError(ValueError):
    pass


def vec(M):
    """Stack the columns of a square matrix into one vector (left to right)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"vec expects a square matrix, got shape {M.shape}")
    return M.reshape(-1, order="F").copy()


def vec_inverse(a, d):
    """Unstack a length-d**2 vector into a d x d matrix, column-wise."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size != d * d:
        raise DimensionError(f"vec_inverse expects length {d * d}, got {a.shape}")
    return a.reshape((d, d), order="F").copy()


def symmetrize(M):
    return (M + M.T) / 2.0


def spd_chol(M, context="", ridge=False):
    """Cholesky factor of a (symmetrized) SPD matrix, with structured failure.

    ridge=True retries once with a tiny diagonal inflation (1e-10 * trace/d);
    off by default — silent regularization hides modeling problems.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    M = symmetrize(M)
    if not np.all(np.isfinite(M)):
        raise SpdFactorizationError(context, "non-finite entries")
    try:
        return cho_factor(M, lower=True)
    except np.linalg.LinAlgError as e:
        if ridge:
            d = M.shape[0]
            eps = 1e-10 * np.trace(M) / max(d, 1)
            try:
                return cho_factor(M + eps * np.eye(d), lower=True)
            except np.linalg.LinAlgError:
                pass
        evals = np.linalg.eigvalsh(M)
        raise SpdFactorizationError(
            context, f"eigenvalue range [{evals.min():.3e}, {evals.max():.3e}]"
        ) from e


def spd_solve(M, B, context="", ridge=False):
    """Solve M X = B for SPD M (symmetrized before factorization)."""
    c = spd_chol(M, context=context, ridge=ridge)
    return cho_solve(c, np.asarray(B, dtype=float))


def spd_inverse(M, context="", ridge=False):
    c = spd_chol(M, context=context, ridge=ridge)
    return symmetrize(cho_solve(c, np.eye(M.shape[0])))


def spd_logdet(M, context=""):
    c, _ = spd_chol(M, context=context)
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def mvn_moments_from_natural(eta, d, context=""):
    """Mean and covariance of a multivariate normal given its natural vector.

    eta has length d + d*d: the first block multiplies x, the trailing block
    (column-stacked) multiplies vec(x x^T).  The matrix block must correspond
    to a negative definite matrix, i.e. -2 * vec_inverse(eta2) is SPD.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.size != d + d * d:
        raise DimensionError(f"expected natural vector of length {d + d * d}, got {eta.size}")
    eta1 = eta[:d]
    P = -2.0 * symmetrize(vec_inverse(eta[d:], d))  # precision matrix
    c = spd_chol(P, context=context)
    Sigma = symmetrize(cho_solve(c, np.eye(d)))
    mu = cho_solve(c, eta1)
    return mu, Sigma


def g_vmp(eta, Q, r, s, context=""):
    """E{-1/2 (theta^T Q theta - 2 r^T theta + s)} for theta ~ MVN given by eta.

    Evaluated through the mean/covariance: -1/2 (tr(Q Sigma) + mu^T Q mu)
    + r^T mu - s/2, which is algebraically identical to the direct
    natural-parameter expression but numerically stabler.
    """
    Q = np.asarray(Q, dtype=float)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    d = Q.shape[0]
    mu, Sigma = mvn_moments_from_natural(eta, d, context=context)
    quad = float(mu @ Q @ mu) + float(np.sum(Q * Sigma))
    return -0.5 * quad + float(r @ mu) - 0.5 * float(s)
