"""Target distributions for the samplers and the benchmark experiments.

All log densities are with respect to Lebesgue measure and may drop additive
constants.  A :class:`TargetModel` carries the dimension, the log density, an
optional gradient (only the targets MALA is pointed at need one), and a support
flag so the harness can refuse kernel/target pairings that cannot work.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .primitives import CholFactor, sample_gamma

__all__ = [
    "TargetModel",
    "gaussian_target",
    "gamma_product_target",
    "mvt_logdensity",
    "central_t_target",
    "scaled_t_target",
    "wishart_covariance",
    "logistic_logpost",
    "logistic_grad",
    "logistic_target",
    "simulate_logistic_data",
    "load_design_csv",
    "PoissonHierData",
    "simulate_hier_data",
    "gibbs_theta",
    "hier_logpost",
    "hier_logpost_from_sums",
]


@dataclass(frozen=True)
class TargetModel:
    """A target distribution the chain drivers can run against."""

    dim: int
    log_density: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    support: str = "reals"  # "reals" | "positive"
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.support not in ("reals", "positive"):
            raise ValueError("support must be 'reals' or 'positive'")


def gaussian_target(mean, chol: CholFactor | None = None) -> TargetModel:
    """N(mean, L L') with an analytic gradient."""
    mean = np.asarray(mean, dtype=float)
    d = mean.shape[0]
    chol = CholFactor.identity(d) if chol is None else chol
    if chol.dim != d:
        raise ValueError("mean and Cholesky factor dimensions differ")
    prec = chol.inv_lower.T @ chol.inv_lower  # (L L')^{-1}

    def logp(x):
        diff = x - mean
        return -0.5 * float(diff @ (prec @ diff))

    def grad(x):
        return -(prec @ (x - mean))

    return TargetModel(dim=d, log_density=logp, gradient=grad, support="reals",
                       name="gaussian")


def gamma_product_target(shape: float, rate: float, dim: int) -> TargetModel:
    """Product of dim independent Gamma(shape, rate) coordinates."""
    if shape <= 0 or rate <= 0:
        raise ValueError("gamma target parameters must be strictly positive")

    a1 = shape - 1.0

    def logp(x):
        if np.any(x <= 0.0):
            return -math.inf
        return a1 * float(np.sum(np.log(x))) - rate * float(np.sum(x))

    return TargetModel(dim=dim, log_density=logp, support="positive",
                       name="gamma_product")


def mvt_logdensity(x, sigma_chol: CholFactor, form: str) -> float:
    """Multivariate heavy-tailed log densities used by the benchmark targets.

    form "scaled-35":      log pi(x) = -35 log(1 + x' Sigma^{-1} x / 20)
    form "central-t-nu3":  d-variate Student-t, three degrees of freedom,
                           location 0:  -(3 + d)/2 * log(1 + x' Sigma^{-1} x / 3)
    """
    x = np.asarray(x, dtype=float)
    qf = sigma_chol.quadform(x)
    if form == "scaled-35":
        return -35.0 * math.log1p(qf / 20.0)
    if form == "central-t-nu3":
        return -0.5 * (3.0 + sigma_chol.dim) * math.log1p(qf / 3.0)
    raise ValueError(f"unknown form {form!r}")


def central_t_target(dim: int, sigma_chol: CholFactor | None = None,
                     nu: float = 3.0) -> TargetModel:
    """Central multivariate Student-t; nu=3 is the benchmark default."""
    chol = CholFactor.identity(dim) if sigma_chol is None else sigma_chol
    if chol.dim != dim:
        raise ValueError("sigma_chol dimension must match dim")
    expo = -0.5 * (nu + dim)

    def logp(x):
        return expo * math.log1p(chol.quadform(x) / nu)

    def grad(x):
        z = chol.inv_lower @ x
        qf = float(z @ z)
        return (2.0 * expo / (nu + qf)) * (chol.inv_lower.T @ z)

    return TargetModel(dim=dim, log_density=logp, gradient=grad, support="reals",
                       name="central_t")


def wishart_covariance(dim: int, dof: int = 50, seed: int = 2024) -> np.ndarray:
    """Draw one covariance matrix W(dof, I_dim) = A'A, A (dof x dim) standard normal.

    The default seed is fixed so a given (dim, dof) always yields the same
    matrix; experiments record the seed they used.
    """
    if dof < dim:
        raise ValueError("dof must be >= dim for a full-rank covariance")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dof, dim))
    return a.T @ a


def scaled_t_target(dim: int = 10, seed: int = 2024) -> TargetModel:
    """pi(x) ~ (1 + x' Sigma^{-1} x / 20)^{-35} with a seeded Wishart(50, I) Sigma."""
    chol = CholFactor.from_covariance(wishart_covariance(dim, dof=50, seed=seed))

    def logp(x):
        return mvt_logdensity(x, chol, "scaled-35")

    return TargetModel(dim=dim, log_density=logp, support="reals", name="scaled_t35")


def logistic_logpost(beta, design: np.ndarray, labels: np.ndarray,
                     prior_sd: float = 10.0) -> float:
    """Bayesian logistic regression log posterior with a N(0, prior_sd^2 I) prior."""
    beta = np.asarray(beta, dtype=float)
    eta = design @ beta
    loglik = float(labels @ eta) - float(np.sum(np.logaddexp(0.0, eta)))
    return loglik - 0.5 * float(beta @ beta) / (prior_sd * prior_sd)


def logistic_grad(beta, design: np.ndarray, labels: np.ndarray,
                  prior_sd: float = 10.0) -> np.ndarray:
    """Gradient of :func:`logistic_logpost` in beta."""
    beta = np.asarray(beta, dtype=float)
    eta = design @ beta
    # stable sigmoid
    p = np.empty_like(eta)
    pos = eta >= 0
    p[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    p[~pos] = ex / (1.0 + ex)
    return design.T @ (labels - p) - beta / (prior_sd * prior_sd)


def logistic_target(design: np.ndarray, labels: np.ndarray,
                    prior_sd: float = 10.0) -> TargetModel:
    design = np.asarray(design, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if design.ndim != 2 or labels.shape != (design.shape[0],):
        raise ValueError("design must be (n, d) with one label per row")

    def logp(b):
        return logistic_logpost(b, design, labels, prior_sd)

    def grad(b):
        return logistic_grad(b, design, labels, prior_sd)

    return TargetModel(dim=design.shape[1], log_density=logp, gradient=grad,
                       support="reals", name="logistic")


def simulate_logistic_data(n: int = 208, dim: int = 60, seed: int = 11,
                           column_corr: float = 0.85):
    """Synthetic binary-classification design in the 208 x 60 sonar shape.

    Columns follow an AR(1) dependence with heterogeneous scales so that a
    covariance preconditioner has something real to correct.  Returns
    (design, labels) with labels in {0, 1}.
    """
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((n, dim))
    x = np.empty_like(base)
    x[:, 0] = base[:, 0]
    c = column_corr
    s = math.sqrt(1.0 - c * c)
    for j in range(1, dim):
        x[:, j] = c * x[:, j - 1] + s * base[:, j]
    scales = np.exp(rng.uniform(math.log(0.4), math.log(2.5), size=dim))
    x *= scales
    beta_true = rng.normal(0.0, 1.5 / math.sqrt(dim), size=dim)
    eta = x @ beta_true
    labels = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(np.int64)
    return x, labels


def load_design_csv(path, standardize: bool = False):
    """Load a classification CSV: numeric feature columns, last column the label.

    Labels may be R/M (mapped to 0/1) or literal 0/1.  The column count is
    fixed by the first data row; any malformed row is reported with its
    1-based line number.
    """
    rows = []
    labels = []
    width = None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            if width is None:
                width = len(rec)
                if width < 2:
                    raise ValueError(f"line {lineno}: need at least one feature and a label")
            if len(rec) != width:
                raise ValueError(
                    f"line {lineno}: expected {width} fields, found {len(rec)}")
            try:
                rows.append([float(f) for f in rec[:-1]])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: non-numeric feature field") from exc
            lab = rec[-1].strip().upper()
            if lab == "R":
                labels.append(0)
            elif lab == "M":
                labels.append(1)
            elif lab in ("0", "1"):
                labels.append(int(lab))
            else:
                raise ValueError(f"line {lineno}: unrecognized label {rec[-1]!r}")
    if not rows:
        raise ValueError("no data rows found")
    design = np.asarray(rows, dtype=float)
    if standardize:
        sd = design.std(axis=0)
        if np.any(sd == 0.0):
            raise ValueError("cannot standardize: constant feature column")
        design = (design - design.mean(axis=0)) / sd
    return design, np.asarray(labels, dtype=np.int64)


@dataclass(frozen=True)
class PoissonHierData:
    """Grouped Poisson counts: counts[m, n] is observation n of group m."""

    counts: np.ndarray
    row_sums: np.ndarray = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise ValueError("counts must be a 2-d array (groups x observations)")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts.astype(np.int64))
        object.__setattr__(self, "row_sums", counts.sum(axis=1).astype(float))

    @property
    def n_groups(self) -> int:
        return self.counts.shape[0]

    @property
    def n_per_group(self) -> int:
        return self.counts.shape[1]


def simulate_hier_data(alpha: float, beta: float, n_groups: int = 25,
                       n_per_group: int = 5, seed: int = 0) -> PoissonHierData:
    """Generate grouped Poisson counts with Gamma(alpha, beta) group rates."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be strictly positive")
    rng = np.random.default_rng(seed)
    theta = rng.gamma(alpha, 1.0 / beta, size=n_groups)
    counts = rng.poisson(theta[:, None], size=(n_groups, n_per_group))
    return PoissonHierData(counts=counts)


def gibbs_theta(alpha: float, beta: float, data: PoissonHierData,
                rng: np.random.Generator) -> np.ndarray:
    """Exact conditional draw of the group rates.

    theta_m | alpha, beta, counts ~ Gamma(sum_n counts[m, n] + alpha, N + beta).
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be strictly positive")
    return sample_gamma(data.row_sums + alpha, data.n_per_group + beta, rng)


def _log_gamma_pdf(z: float, shape: float, rate: float) -> float:
    return (shape * math.log(rate) - math.lgamma(shape)
            + (shape - 1.0) * math.log(z) - rate * z)


def hier_logpost_from_sums(alpha: float, beta: float, n_groups: int,
                           sum_log_theta: float, sum_theta: float,
                           prior_shape: float = 0.05,
                           prior_rate: float = 0.05) -> float:
    """The (alpha, beta) part of the hierarchical log posterior, given theta sums."""
    if alpha <= 0 or beta <= 0:
        return -math.inf
    return (n_groups * (alpha * math.log(beta) - math.lgamma(alpha))
            + (alpha - 1.0) * sum_log_theta - beta * sum_theta
            + _log_gamma_pdf(alpha, prior_shape, prior_rate)
            + _log_gamma_pdf(beta, prior_shape, prior_rate))


def hier_logpost(alpha: float, beta: float, theta,
                 prior_shape: float = 0.05, prior_rate: float = 0.05) -> float:
    """Log posterior terms involving (alpha, beta): the Gamma likelihood of the
    group rates plus the Gamma(prior_shape, prior_rate) hyperpriors."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0.0):
        return -math.inf
    return hier_logpost_from_sums(alpha, beta, theta.shape[0],
                                  float(np.sum(np.log(theta))), float(np.sum(theta)),
                                  prior_shape, prior_rate)
