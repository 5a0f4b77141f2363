"""Model builders: design matrices, spline bases, fragment wiring, curves.

Each builder returns a ModelSpec — the stochastic-node declarations plus
fragment bindings that the engine assembles into a factor graph — together
with curve-design closures for posterior summaries.  Predictors are
standardized internally for conditioning; coefficient reports and fitted
curves are mapped back to the original scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.stats import norm
from scipy.special import expit, ndtr

from . import expfam
from .engine import (
    GAUSSIAN_LIKELIHOOD,
    GAUSSIAN_PENALIZATION,
    GAUSSIAN_PRIOR,
    ITERATED_IGW,
    IW_PRIOR,
    LOGISTIC_LIKELIHOOD,
    POISSON_LIKELIHOOD,
    PROBIT_LIKELIHOOD,
    FragmentBinding,
    StochasticNode,
)
from .fragments_gaussian import (
    SCALAR_D1,
    TOTALLY_CONNECTED,
    TOTALLY_DISCONNECTED,
    GaussianLikelihoodSpec,
    GaussianPenalizationSpec,
    GaussianPriorSpec,
    InverseWishartPriorSpec,
    IteratedIGWSpec,
    PenalizedBlock,
)
from .fragments_glm import (
    LogisticFragmentState,
    PoissonFragmentState,
    ProbitFragmentState,
)

TRUNCATED_LINEAR = "truncated_linear"
OSULLIVAN_LIKE = "osullivan_like"

LINKS = ("identity", "logit", "probit", "log")

_Z975 = float(norm.ppf(0.975))


@dataclass(frozen=True)
class Hyperparameters:
    """Default prior settings: very flat normal on fixed effects, huge
    half-Cauchy-type scale on standard deviations, and nu=2 on the covariance
    hierarchy (uniform correlation priors)."""

    sigma_beta_sq: float = 1e10
    A: float = 1e5
    nu: float = 2.0


@dataclass(frozen=True)
class SplineBasis:
    knots: np.ndarray
    kind: str
    range: tuple
    transform: np.ndarray | None = None
    full_knots: np.ndarray | None = None

    def evaluate(self, x):
        """Basis columns at new points (same transform as the training design)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.range
        if np.any(x < lo) or np.any(x > hi):
            warnings.warn("evaluating spline basis outside its fitted range (extrapolation)")
        if self.kind == TRUNCATED_LINEAR:
            return np.maximum(x[:, None] - self.knots[None, :], 0.0)
        B = BSpline.design_matrix(np.clip(x, lo, hi), self.full_knots, 3).toarray()
        return B @ self.transform


@dataclass(frozen=True)
class FittedCurve:
    grid: np.ndarray
    mean: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray


@dataclass(frozen=True)
class ModelSpec:
    nodes: tuple
    fragments: tuple
    link: str
    coef_node: str
    curves: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "fragments", tuple(self.fragments))


def _quantile_knots(x, count, inner=False):
    ux = np.unique(np.asarray(x, dtype=float))
    if count == 0:
        return np.array([])
    probs = np.arange(1, count + 1) / (count + 1.0)
    knots = np.quantile(ux, probs)
    if np.unique(knots).size < count:
        raise ValueError(f"too few distinct x values to place {count} knots")
    if inner and (knots[0] <= ux[0] or knots[-1] >= ux[-1]):
        raise ValueError("interior knots collide with the data range")
    return knots


def _osullivan_transform(x, K):
    """B-spline columns linearly mapped so the curvature penalty becomes the
    identity on K columns (nullspace of the penalty is carried by [1, x])."""
    if K < 2:
        raise ValueError("osullivan_like basis needs K >= 2")
    x = np.asarray(x, dtype=float)
    lo, hi = float(np.min(x)), float(np.max(x))
    interior = _quantile_knots(x, K - 2, inner=True)
    t = np.concatenate([[lo] * 4, interior, [hi] * 4])
    nb = t.size - 4
    B = BSpline.design_matrix(x, t, 3).toarray()

    # exact curvature penalty: B'' is piecewise linear, so 3-point Gauss-Legendre
    # per inter-knot interval integrates the products exactly
    second = BSpline(t, np.eye(nb), 3).derivative(2)
    breaks = np.unique(t[(t >= lo) & (t <= hi)])
    gl_x, gl_w = np.polynomial.legendre.leggauss(3)
    Omega = np.zeros((nb, nb))
    for a, b in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (b - a)
        pts = a + half * (gl_x + 1.0)
        Bpp = second(pts)
        Omega += (Bpp.T * (half * gl_w)) @ Bpp

    evals, evecs = np.linalg.eigh(Omega)
    pos = evals > evals[-1] * 1e-10
    if int(np.sum(pos)) != K:
        raise ValueError(
            f"curvature penalty rank {int(np.sum(pos))} != requested K={K}; knot layout degenerate"
        )
    T = evecs[:, pos] / np.sqrt(evals[pos])
    Z = B @ T
    return Z, SplineBasis(interior, OSULLIVAN_LIKE, (lo, hi), transform=T, full_knots=t)


def spline_design(x, K, kind=TRUNCATED_LINEAR):
    """(n x K design, SplineBasis) with knots at quantiles of the unique x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if K < 1:
        raise ValueError("K must be >= 1")
    if x.size <= K:
        raise ValueError("need n > K observations")
    if np.unique(x).size < K:
        raise ValueError("too few distinct x values")
    if kind == TRUNCATED_LINEAR:
        knots = _quantile_knots(x, K)
        basis = SplineBasis(knots, kind, (float(np.min(x)), float(np.max(x))))
        return basis.evaluate(x), basis
    if kind == OSULLIVAN_LIKE:
        return _osullivan_transform(x, K)
    raise ValueError(f"unknown spline kind '{kind}'")


def demo_mean_function(x):
    """Smooth bump-plus-trend test function on [0, 1], scaled into (0, 1)."""
    x = np.asarray(x, dtype=float)
    raw = (
        1.05
        - 1.02 * x
        + 0.018 * x**2
        + 0.4 * norm.pdf(x, loc=0.38, scale=0.08)
        + 0.08 * norm.pdf(x, loc=0.75, scale=0.03)
    )
    return raw / 2.7


def inverse_link(link):
    if link == "identity":
        return lambda v: v
    if link == "logit":
        return expit
    if link == "probit":
        return ndtr
    if link == "log":
        return np.exp
    raise ValueError(f"unknown link '{link}'")


def fitted_curve(q_coef, design_builder, grid, link="identity") -> FittedCurve:
    """Pointwise posterior mean and 95% band of the curve implied by q(coefficients).

    The band is formed on the linear predictor and mapped through the inverse
    link, so monotone links preserve the ordering.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    C = np.atleast_2d(design_builder(grid))
    mu = np.asarray(q_coef.common["mu"])
    Sigma = np.asarray(q_coef.common["Sigma"])
    center = C @ mu
    sd = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", C, Sigma, C), 0.0))
    g = inverse_link(link)
    return FittedCurve(grid, g(center), g(center - _Z975 * sd), g(center + _Z975 * sd))


# ---------------------------------------------------------------------------
# standardization helpers


def _standardize_design(X):
    """X -> X @ M with centered/scaled columns; constant columns untouched.

    Centering uses the first constant (intercept-like) column when present,
    so the transform stays exactly linear and invertible.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    M = np.eye(d)
    const_cols = [j for j in range(d) if np.ptp(X[:, j]) == 0.0]
    icol = None
    for j in const_cols:
        if X[0, j] != 0.0:
            icol = j
            break
    for j in range(d):
        if j in const_cols:
            continue
        s = float(np.std(X[:, j]))
        M[j, j] = 1.0 / s
        if icol is not None:
            M[icol, j] = -float(np.mean(X[:, j])) / (X[0, icol] * s)
    return X @ M, M


def _standardize_x(x):
    x = np.asarray(x, dtype=float)
    mean, sd = float(np.mean(x)), float(np.std(x))
    if sd == 0.0:
        raise ValueError("predictor is constant")
    return (x - mean) / sd, mean, sd


def original_coefficients(model: ModelSpec, q_coef):
    """Posterior mean/covariance of the coefficients on the caller's scale."""
    mu = np.asarray(q_coef.common["mu"])
    Sigma = np.asarray(q_coef.common["Sigma"])
    M = model.meta.get("coef_transform")
    if M is None:
        return mu, Sigma
    return M @ mu, M @ Sigma @ M.T


# ---------------------------------------------------------------------------
# builders


def _scale_chain(nodes, fragments, tag, sigsq_name, A_hyper):
    """Append the sigma^2 | a ~ Inv-chi^2(1, 1/a), a ~ Inv-chi^2(1, 1/A^2)
    half-Cauchy construction for one scalar variance node."""
    a_name = f"a_{tag}"
    nodes.append(StochasticNode(sigsq_name, expfam.INVERSE_CHI_SQUARED))
    nodes.append(StochasticNode(a_name, expfam.INVERSE_CHI_SQUARED))
    fragments.append(
        FragmentBinding(
            f"link_{tag}",
            ITERATED_IGW,
            IteratedIGWSpec(SCALAR_D1, kappa=1.0),
            (sigsq_name, a_name),
        )
    )
    fragments.append(
        FragmentBinding(
            f"prior_{a_name}",
            IW_PRIOR,
            InverseWishartPriorSpec(1.0, np.array([[A_hyper**-2.0]])),
            (a_name,),
        )
    )


def build_linear_regression(
    y,
    X,
    sigma_beta_sq: float = 1e10,
    A_hyper: float = 1e5,
    mu_beta=None,
    Sigma_beta=None,
    standardize: bool = True,
    fixed_sigma_sq: float | None = None,
) -> ModelSpec:
    """Bayesian linear regression with a half-Cauchy noise-scale hierarchy.

    With fixed_sigma_sq the noise variance is held at a known constant and the
    variance chain disappears (fully conjugate sub-model).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if y.size == 0:
        raise ValueError("empty response")
    if X.shape[0] != y.size:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    d = X.shape[1]
    mu_beta = np.zeros(d) if mu_beta is None else np.asarray(mu_beta, dtype=float)
    Sigma_beta = (
        sigma_beta_sq * np.eye(d) if Sigma_beta is None else np.asarray(Sigma_beta, dtype=float)
    )

    meta = {"y": y, "X": X}
    if standardize:
        Xs, M = _standardize_design(X)
        Minv = np.linalg.inv(M)
        mu_s = Minv @ mu_beta
        Sigma_s = Minv @ Sigma_beta @ Minv.T
        meta["coef_transform"] = M
    else:
        Xs, mu_s, Sigma_s = X, mu_beta, Sigma_beta

    nodes = [StochasticNode("coef", expfam.MULTIVARIATE_NORMAL, d)]
    lik_spec = GaussianLikelihoodSpec(y, Xs, sigma_sq_fixed=fixed_sigma_sq)
    fragments = [
        FragmentBinding("prior_coef", GAUSSIAN_PRIOR, GaussianPriorSpec(mu_s, Sigma_s), ("coef",))
    ]
    if fixed_sigma_sq is None:
        fragments.append(
            FragmentBinding("likelihood", GAUSSIAN_LIKELIHOOD, lik_spec, ("coef", "sigsq_eps"))
        )
        _scale_chain(nodes, fragments, "eps", "sigsq_eps", A_hyper)
    else:
        fragments.append(FragmentBinding("likelihood", GAUSSIAN_LIKELIHOOD, lik_spec, ("coef",)))
    return ModelSpec(nodes, fragments, "identity", "coef", {}, meta)


def _penalized_gaussian_coef_nodes(p):
    return [StochasticNode("coef", expfam.MULTIVARIATE_NORMAL, p)]


def build_penalized_spline(
    y,
    x,
    K: int = 25,
    hyper: Hyperparameters = None,
    spline_kind: str = TRUNCATED_LINEAR,
    fixed_sigma_u_sq: float | None = None,
) -> ModelSpec:
    """Gaussian penalized-spline regression on one predictor.

    Coefficients are (intercept, slope, K spline weights); the spline block is
    shrunk by its own variance with a half-Cauchy hierarchy unless
    fixed_sigma_u_sq pins it.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if y.size != x.size:
        raise ValueError("x and y lengths differ")
    hyper = hyper or Hyperparameters()
    xs, x_mean, x_sd = _standardize_x(x)
    Z, basis = spline_design(xs, K, spline_kind)
    C = np.column_stack([np.ones(y.size), xs, Z])
    p = 2 + K

    if fixed_sigma_u_sq is None:
        blocks = (PenalizedBlock(K, 1, SCALAR_D1),)
    else:
        blocks = (PenalizedBlock(K, 1, SCALAR_D1, fixed_Theta=np.array([[fixed_sigma_u_sq]])),)
    pen = GaussianPenalizationSpec(np.zeros(2), hyper.sigma_beta_sq * np.eye(2), blocks)

    nodes = _penalized_gaussian_coef_nodes(p)
    fragments = []
    if fixed_sigma_u_sq is None:
        nodes.append(StochasticNode("sigsq_u", expfam.INVERSE_CHI_SQUARED))
        fragments.append(
            FragmentBinding("penalization", GAUSSIAN_PENALIZATION, pen, ("coef", "sigsq_u"))
        )
        nodes.append(StochasticNode("a_u", expfam.INVERSE_CHI_SQUARED))
        fragments.append(
            FragmentBinding(
                "link_u", ITERATED_IGW, IteratedIGWSpec(SCALAR_D1, kappa=1.0), ("sigsq_u", "a_u")
            )
        )
        fragments.append(
            FragmentBinding(
                "prior_a_u",
                IW_PRIOR,
                InverseWishartPriorSpec(1.0, np.array([[hyper.A**-2.0]])),
                ("a_u",),
            )
        )
    else:
        fragments.append(FragmentBinding("penalization", GAUSSIAN_PENALIZATION, pen, ("coef",)))
    fragments.append(
        FragmentBinding(
            "likelihood", GAUSSIAN_LIKELIHOOD, GaussianLikelihoodSpec(y, C), ("coef", "sigsq_eps")
        )
    )
    _scale_chain(nodes, fragments, "eps", "sigsq_eps", hyper.A)

    meta = {"y": y, "x": x, "x_mean": x_mean, "x_sd": x_sd, "basis": basis, "C": C}

    def fit_design(grid):
        gs = (np.asarray(grid, dtype=float) - x_mean) / x_sd
        return np.column_stack([np.ones(gs.size), gs, basis.evaluate(gs)])

    return ModelSpec(nodes, fragments, "identity", "coef", {"fit": fit_design}, meta)


def build_glm_spline(
    y, x, K: int = 25, link: str = "logit", hyper: Hyperparameters = None,
    spline_kind: str = OSULLIVAN_LIKE,
) -> ModelSpec:
    """Penalized-spline regression with a binary or count response.

    Same coefficient block and shrinkage chain as the Gaussian spline model,
    with the likelihood fragment swapped for the link-specific one and no
    noise-variance chain.
    """
    if link not in ("logit", "probit", "log"):
        raise ValueError(f"link must be logit, probit or log, got '{link}'")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if y.size != x.size:
        raise ValueError("x and y lengths differ")
    hyper = hyper or Hyperparameters()
    xs, x_mean, x_sd = _standardize_x(x)
    Z, basis = spline_design(xs, K, spline_kind)
    C = np.column_stack([np.ones(y.size), xs, Z])
    p = 2 + K

    if link in ("logit", "probit"):
        if not np.all((y == 0) | (y == 1)):
            raise ValueError(f"{link} link needs a 0/1 response")
        state = (
            LogisticFragmentState(y, C) if link == "logit" else ProbitFragmentState(y, C)
        )
        kind = LOGISTIC_LIKELIHOOD if link == "logit" else PROBIT_LIKELIHOOD
    else:
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise ValueError("log link needs a nonnegative integer response")
        state = PoissonFragmentState(y, C)
        kind = POISSON_LIKELIHOOD

    pen = GaussianPenalizationSpec(
        np.zeros(2), hyper.sigma_beta_sq * np.eye(2), (PenalizedBlock(K, 1, SCALAR_D1),)
    )
    nodes = _penalized_gaussian_coef_nodes(p)
    nodes.append(StochasticNode("sigsq_u", expfam.INVERSE_CHI_SQUARED))
    nodes.append(StochasticNode("a_u", expfam.INVERSE_CHI_SQUARED))
    fragments = [
        FragmentBinding("penalization", GAUSSIAN_PENALIZATION, pen, ("coef", "sigsq_u")),
        FragmentBinding("likelihood", kind, state, ("coef",)),
        FragmentBinding(
            "link_u", ITERATED_IGW, IteratedIGWSpec(SCALAR_D1, kappa=1.0), ("sigsq_u", "a_u")
        ),
        FragmentBinding(
            "prior_a_u",
            IW_PRIOR,
            InverseWishartPriorSpec(1.0, np.array([[hyper.A**-2.0]])),
            ("a_u",),
        ),
    ]
    meta = {"y": y, "x": x, "x_mean": x_mean, "x_sd": x_sd, "basis": basis, "C": C}

    def fit_design(grid):
        gs = (np.asarray(grid, dtype=float) - x_mean) / x_sd
        return np.column_stack([np.ones(gs.size), gs, basis.evaluate(gs)])

    return ModelSpec(nodes, fragments, link, "coef", {"fit": fit_design}, meta)


def build_group_curves(
    y,
    x,
    group_id,
    group_label,
    K_gbl: int = 10,
    K_grp: int = 5,
    hyper: Hyperparameters = None,
    spline_kind: str = TRUNCATED_LINEAR,
    include_subject_lines: bool = True,
) -> ModelSpec:
    """Two-population group-specific curve model.

    Mean structure: a reference-population curve, a contrast curve added for
    label-1 groups, per-group random intercept/slope lines with an
    unstructured 2x2 covariance (marginally noninformative hierarchy), and
    per-group spline deviations.  The contrast carries its own spline block so
    the between-population difference is itself a flexible curve.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    gid = np.atleast_1d(np.asarray(group_id))
    lab = np.atleast_1d(np.asarray(group_label, dtype=float))
    if not (y.size == x.size == gid.size == lab.size):
        raise ValueError("y, x, group_id, group_label lengths differ")
    if not np.all((lab == 0) | (lab == 1)):
        raise ValueError("group labels must be binary 0/1")
    hyper = hyper or Hyperparameters()

    _, gidx = np.unique(gid, return_inverse=True)
    m = int(gidx.max()) + 1
    for g in range(m):
        if np.unique(lab[gidx == g]).size != 1:
            raise ValueError(f"group {g} has mixed labels")
    if np.unique(lab).size == 1:
        warnings.warn("all group labels equal; contrast columns are identically zero")

    xs, x_mean, x_sd = _standardize_x(x)
    n = y.size
    ind_b = lab  # 1 for the contrast population
    X = np.column_stack([np.ones(n), xs, ind_b, ind_b * xs])

    Z_gbl, basis_gbl = spline_design(xs, K_gbl, spline_kind)
    Zw = (1.0 - ind_b)[:, None] * Z_gbl
    Zb = ind_b[:, None] * Z_gbl

    cols = [X, Zw, Zb]
    blocks = [PenalizedBlock(K_gbl, 1, SCALAR_D1), PenalizedBlock(K_gbl, 1, SCALAR_D1)]
    chains = ["gbl_w", "gbl_b"]

    if include_subject_lines:
        ZU = np.zeros((n, 2 * m))
        for g in range(m):
            rows = gidx == g
            ZU[rows, 2 * g] = 1.0
            ZU[rows, 2 * g + 1] = xs[rows]
        cols.append(ZU)
        blocks.append(PenalizedBlock(m, 2, TOTALLY_CONNECTED))
        chains.append("subject")

    if K_grp > 0:
        Z_grp_base, basis_grp = spline_design(xs, K_grp, spline_kind)
        Zg = np.zeros((n, m * K_grp))
        for g in range(m):
            rows = gidx == g
            Zg[rows, g * K_grp : (g + 1) * K_grp] = Z_grp_base[rows]
        cols.append(Zg)
        blocks.append(PenalizedBlock(m * K_grp, 1, SCALAR_D1))
        chains.append("grp")
    else:
        basis_grp = None

    C = np.column_stack(cols)
    p = C.shape[1]
    pen = GaussianPenalizationSpec(np.zeros(4), hyper.sigma_beta_sq * np.eye(4), tuple(blocks))

    nodes = _penalized_gaussian_coef_nodes(p)
    fragments = []
    pen_ports = ["coef"]

    for tag, blk in zip(chains, blocks):
        if blk.d == 1:
            sig = f"sigsq_{tag}"
            pen_ports.append(sig)
            _scale_chain(nodes, fragments, tag, sig, hyper.A)
        else:
            nodes.append(StochasticNode("Sigma_subject", expfam.INVERSE_WISHART, 2))
            nodes.append(StochasticNode("A_subject", expfam.INVERSE_G_WISHART_DIAG, 2))
            pen_ports.append("Sigma_subject")
            fragments.append(
                FragmentBinding(
                    "link_subject",
                    ITERATED_IGW,
                    IteratedIGWSpec(
                        TOTALLY_CONNECTED, kappa=hyper.nu + 1.0, d_Theta=2,
                        theta2_kind=TOTALLY_DISCONNECTED,
                    ),
                    ("Sigma_subject", "A_subject"),
                )
            )
            fragments.append(
                FragmentBinding(
                    "prior_A_subject",
                    IW_PRIOR,
                    InverseWishartPriorSpec(
                        1.0, np.eye(2) / (hyper.nu * hyper.A**2), TOTALLY_DISCONNECTED
                    ),
                    ("A_subject",),
                )
            )

    fragments.insert(0, FragmentBinding("penalization", GAUSSIAN_PENALIZATION, pen, tuple(pen_ports)))
    fragments.append(
        FragmentBinding(
            "likelihood", GAUSSIAN_LIKELIHOOD, GaussianLikelihoodSpec(y, C), ("coef", "sigsq_eps")
        )
    )
    _scale_chain(nodes, fragments, "eps", "sigsq_eps", hyper.A)

    meta = {
        "y": y, "x": x, "x_mean": x_mean, "x_sd": x_sd,
        "basis_gbl": basis_gbl, "basis_grp": basis_grp,
        "C": C, "m_groups": m, "K_gbl": K_gbl, "K_grp": K_grp,
        "include_subject_lines": include_subject_lines,
    }

    def _pop_design(grid, contrast_population):
        gs = (np.asarray(grid, dtype=float) - x_mean) / x_sd
        z = basis_gbl.evaluate(gs)
        ng = gs.size
        Xg = np.column_stack(
            [np.ones(ng), gs, np.full(ng, contrast_population), contrast_population * gs]
        )
        Zwg = (1.0 - contrast_population) * z
        Zbg = contrast_population * z
        rest = np.zeros((ng, p - 4 - 2 * K_gbl))
        return np.column_stack([Xg, Zwg, Zbg, rest])

    def contrast_design(grid):
        gs = (np.asarray(grid, dtype=float) - x_mean) / x_sd
        z = basis_gbl.evaluate(gs)
        ng = gs.size
        Xg = np.column_stack([np.zeros(ng), np.zeros(ng), np.ones(ng), gs])
        rest = np.zeros((ng, p - 4 - 2 * K_gbl))
        return np.column_stack([Xg, -z, z, rest])

    curves = {
        "group_0": lambda grid: _pop_design(grid, 0.0),
        "group_1": lambda grid: _pop_design(grid, 1.0),
        "contrast": contrast_design,
    }
    return ModelSpec(nodes, fragments, "identity", "coef", curves, meta)
