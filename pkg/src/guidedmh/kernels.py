"""Reversible kernel families, their Haar mixtures, and reference measures.

Each family bundles a base proposal Q_g indexed by a group element g, the
mixing law K(x, dg) obtained by tilting the Haar measure on the group, and the
two reference measures a Metropolis ratio can be taken against:

* ``log_mu``       -- the base measure mu = mu_e the plain kernel is reversible
                      for (g fixed at the group identity);
* ``log_mu_star``  -- the group-invariant mixture measure mu* the Haar-mixture
                      kernel is reversible for.

Families are frozen parameter bundles; the module-level functions
(`ar_propose`, `mixing_draw`, `haar_mixture_propose`, ...) are the validated
public entry points and the family methods are the lean versions the chain
drivers call with precomputed statistics.

The three families:

AR (autoregressive / preconditioned Crank-Nicolson)
    Q_g(x, .) = N(x0 + sqrt(1-rho) (x-x0), (rho/g) M) on R^d,
    mu_g = N(x0, M/g), statistic Delta(x) = (x-x0)' M^{-1} (x-x0),
    K(x, dg) = Gamma(d/2, Delta(x)/2), mu*(dx) ~ Delta(x)^{-d/2} dx.

Beta-Gamma
    y = b x + c componentwise with b ~ Beta(k rho, k(1-rho)),
    c ~ Gamma(k(1-rho), g_i), mu_g = prod Gamma(k, g_i) on (0, inf)^d,
    statistic is the state itself (componentwise group); the scalar
    coordinate product is an order-equivalent stand-in.
    K(x, dg) = prod Gamma(k, x_i), mu*(dx) = prod x_i^{-1} dx.

Chi-squared
    y_i = (sqrt((1-rho) x_i) + sqrt(rho/g) w_1)^2 + (rho/g) sum_{l>=2} w_l^2,
    mu_g = prod Gamma(L/2, g/2) on (0, inf)^d with one scalar g scaling all
    coordinates, statistic Delta(x) = sum x_i,
    K(x, dg) = Gamma(L d / 2, Delta(x)/2),
    mu*(dx) ~ (prod x_i)^{L/2-1} Delta(x)^{-dL/2} dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateStatisticError
from .groups import (
    GroupSpec,
    Statistic,
    centered_scaling_group,
    componentwise_group,
    delta_prod,
    delta_quadform,
    delta_sum,
    scaling_group,
)
from .primitives import CholFactor, _gamma_unit_scalar, _gamma_unit_vector

__all__ = [
    "ARFamily",
    "BetaGammaFamily",
    "ChiSquaredFamily",
    "MixtureDraw",
    "ar_propose",
    "betagamma_propose",
    "chisq_propose",
    "mixing_draw",
    "log_mu",
    "log_mu_star",
    "haar_mixture_propose",
]

_LOG_2PI = math.log(2.0 * math.pi)


class MixtureDraw(NamedTuple):
    """One draw from the Haar mixture: the group element and the proposal."""

    g: object
    y: np.ndarray


def _as_state(x, dim: int, positive: bool) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"state must have shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("state must be finite")
    if positive and np.any(x <= 0.0):
        raise ValueError("state must be strictly positive for this family")
    return x


def _scalar_cmp(a: float, b: float) -> int:
    if a > b:
        return 1
    if a < b:
        return -1
    return 0


@dataclass(frozen=True)
class ARFamily:
    """Autoregressive Gaussian family around a center x0 with covariance M."""

    dim: int
    rho: float
    x0: np.ndarray
    chol: CholFactor
    tag: str = field(default="ar", init=False)
    support: str = field(default="reals", init=False)

    def __post_init__(self):
        if not (0.0 < self.rho <= 1.0):
            raise ValueError("AR family requires rho in (0, 1]")
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (self.dim,) or not np.all(np.isfinite(x0)):
            raise ValueError("x0 must be a finite vector of length dim")
        if self.chol.dim != self.dim:
            raise ValueError("Cholesky factor dimension must match dim")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "_sqrt_keep", math.sqrt(1.0 - self.rho))
        object.__setattr__(self, "_mu_const",
                           -0.5 * (self.dim * _LOG_2PI + self.chol.logdet_cov))
        # identity preconditioner admits a mat-vec-free hot path
        object.__setattr__(self, "_iso",
                           bool(np.array_equal(self.chol.lower, np.eye(self.dim))))

    @classmethod
    def isotropic(cls, dim: int, rho: float, x0=None) -> "ARFamily":
        x0 = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=float)
        return cls(dim=dim, rho=rho, x0=x0, chol=CholFactor.identity(dim))

    @property
    def identity_element(self) -> float:
        return 1.0

    @property
    def group(self) -> GroupSpec:
        return centered_scaling_group(self.x0)

    @property
    def statistic(self) -> Statistic:
        x0, chol = self.x0, self.chol
        return Statistic("quad-form", lambda x: delta_quadform(x, x0, chol))

    def stats(self, x: np.ndarray) -> float:
        if self._iso:
            diff = x - self.x0
            value = float(diff @ diff)
            if value == 0.0:
                raise DegenerateStatisticError(
                    "quadratic form vanishes at the family center")
            return value
        return delta_quadform(x, self.x0, self.chol)

    def order_value(self, stats: float) -> float:
        return stats

    order_cmp = staticmethod(_scalar_cmp)

    def mixing(self, x, stats: float, rng) -> float:
        # K(x, dg) = Gamma(d/2, Delta(x)/2)
        return _gamma_unit_scalar(0.5 * self.dim, rng) * (2.0 / stats)

    def propose(self, x, g: float, rng) -> np.ndarray:
        step = math.sqrt(self.rho / g)
        w = rng.standard_normal(self.dim)
        if self._iso:
            return self.x0 + self._sqrt_keep * (x - self.x0) + step * w
        return self.x0 + self._sqrt_keep * (x - self.x0) + step * (self.chol.lower @ w)

    def log_mu_star(self, stats: float) -> float:
        return -0.5 * self.dim * math.log(stats)

    def log_mu(self, x, stats: float) -> float:
        return -0.5 * stats + self._mu_const

    def descriptor(self) -> dict:
        return {"family": "ar", "dim": self.dim, "rho": self.rho,
                "x0": [float(v) for v in self.x0]}


@dataclass(frozen=True)
class BetaGammaFamily:
    """Componentwise beta-gamma autoregression on the positive orthant.

    ``order`` selects the direction statistic used by guided chains: the
    default scalar coordinate product, or the modified lexicographic order on
    the full vector.  Both induce the same guided dynamics up to ties.
    """

    dim: int
    k: float
    rho: float
    order: str = "product"
    tag: str = field(default="betagamma", init=False)
    support: str = field(default="positive", init=False)

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("BetaGamma family requires k > 0")
        if not (0.0 < self.rho < 1.0):
            raise ValueError("BetaGamma family requires rho in (0, 1)")
        if self.order not in ("product", "mlex"):
            raise ValueError("order must be 'product' or 'mlex'")
        object.__setattr__(self, "_lgamma_k", math.lgamma(self.k))

    @property
    def identity_element(self) -> np.ndarray:
        return np.ones(self.dim)

    @property
    def group(self) -> GroupSpec:
        return componentwise_group(self.dim)

    @property
    def statistic(self) -> Statistic:
        if self.order == "product":
            return Statistic("coordinate-product", delta_prod)
        return Statistic("identity-vector", lambda x: np.asarray(x, dtype=float))

    def stats(self, x: np.ndarray) -> np.ndarray:
        if np.any(x <= 0.0):
            raise ValueError("BetaGamma states must be strictly positive")
        return np.log(x)

    def order_value(self, stats: np.ndarray):
        if self.order == "product":
            return float(np.sum(stats))
        # tail log-partial-sums, compared lexicographically
        return np.cumsum(stats[::-1])[::-1]

    def order_cmp(self, a, b) -> int:
        if self.order == "product":
            return _scalar_cmp(a, b)
        diff = np.nonzero(a != b)[0]
        if diff.size == 0:
            return 0
        i = diff[0]
        return 1 if a[i] > b[i] else -1

    def mixing(self, x, stats, rng) -> np.ndarray:
        # K(x, dg) = prod_i Gamma(k, x_i)
        return _gamma_unit_vector(self.k, self.dim, rng) / x

    def propose(self, x, g, rng) -> np.ndarray:
        b = rng.beta(self.k * self.rho, self.k * (1.0 - self.rho), size=self.dim)
        c = _gamma_unit_vector(self.k * (1.0 - self.rho), self.dim, rng) / g
        return b * x + c

    def log_mu_star(self, stats: np.ndarray) -> float:
        return -float(np.sum(stats))

    def log_mu(self, x, stats: np.ndarray) -> float:
        # prod_i Gamma(k, 1) at the group identity
        return ((self.k - 1.0) * float(np.sum(stats)) - float(np.sum(x))
                - self.dim * self._lgamma_k)

    def descriptor(self) -> dict:
        return {"family": "betagamma", "dim": self.dim, "k": self.k,
                "rho": self.rho, "order": self.order}


@dataclass(frozen=True)
class ChiSquaredFamily:
    """Componentwise noncentral chi-squared autoregression, one scalar g for all coordinates."""

    dim: int
    rho: float
    L: int
    tag: str = field(default="chisq", init=False)
    support: str = field(default="positive", init=False)

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise ValueError("ChiSquared family requires rho in (0, 1)")
        if not (isinstance(self.L, (int, np.integer)) and self.L >= 1):
            raise ValueError("ChiSquared family requires integer L >= 1")
        half_l = 0.5 * self.L
        object.__setattr__(self, "_mu_const",
                           self.dim * (half_l * math.log(0.5) - math.lgamma(half_l)))

    @property
    def identity_element(self) -> float:
        return 1.0

    @property
    def group(self) -> GroupSpec:
        return scaling_group()

    @property
    def statistic(self) -> Statistic:
        return Statistic("coordinate-sum", delta_sum)

    def stats(self, x: np.ndarray):
        if np.any(x <= 0.0):
            raise ValueError("ChiSquared states must be strictly positive")
        sx = float(np.sum(x))
        return sx, float(np.sum(np.log(x)))

    def order_value(self, stats) -> float:
        return stats[0]

    order_cmp = staticmethod(_scalar_cmp)

    def mixing(self, x, stats, rng) -> float:
        # K(x, dg) = Gamma(L d / 2, Delta(x)/2) with Delta(x) = sum_i x_i
        return _gamma_unit_scalar(0.5 * self.L * self.dim, rng) * (2.0 / stats[0])

    def propose(self, x, g: float, rng) -> np.ndarray:
        r = self.rho / g
        if self.L == 1:
            head = np.sqrt((1.0 - self.rho) * x) + math.sqrt(r) * rng.standard_normal(self.dim)
            return head * head
        w = rng.standard_normal((self.dim, self.L))
        head = np.sqrt((1.0 - self.rho) * x) + math.sqrt(r) * w[:, 0]
        y = head * head
        tail = w[:, 1:]
        return y + r * np.einsum("ij,ij->i", tail, tail)

    def log_mu_star(self, stats) -> float:
        sx, slx = stats
        return (0.5 * self.L - 1.0) * slx - 0.5 * self.dim * self.L * math.log(sx)

    def log_mu(self, x, stats) -> float:
        # prod_i Gamma(L/2, 1/2) at the group identity
        sx, slx = stats
        return (0.5 * self.L - 1.0) * slx - 0.5 * sx + self._mu_const

    def descriptor(self) -> dict:
        return {"family": "chisq", "dim": self.dim, "rho": self.rho, "L": int(self.L)}


KernelFamily = ARFamily | BetaGammaFamily | ChiSquaredFamily


def _check_group_element(g, fam) -> object:
    if isinstance(fam, BetaGammaFamily):
        g = np.asarray(g, dtype=float)
        if g.shape != (fam.dim,) or np.any(g <= 0.0) or not np.all(np.isfinite(g)):
            raise ValueError("group element must be a strictly positive vector of length dim")
        return g
    g = float(g)
    if not (g > 0.0 and math.isfinite(g)):
        raise ValueError("group element must be a strictly positive scalar")
    return g


def ar_propose(x, g, fam: ARFamily, rng) -> np.ndarray:
    """Draw y ~ Q_g(x, .) for the AR family."""
    if not isinstance(fam, ARFamily):
        raise TypeError("ar_propose requires an ARFamily")
    x = _as_state(x, fam.dim, positive=False)
    return fam.propose(x, _check_group_element(g, fam), rng)


def betagamma_propose(x, g, fam: BetaGammaFamily, rng) -> np.ndarray:
    """Draw y ~ Q_g(x, .) for the Beta-Gamma family."""
    if not isinstance(fam, BetaGammaFamily):
        raise TypeError("betagamma_propose requires a BetaGammaFamily")
    x = _as_state(x, fam.dim, positive=True)
    return fam.propose(x, _check_group_element(g, fam), rng)


def chisq_propose(x, g, fam: ChiSquaredFamily, rng) -> np.ndarray:
    """Draw y ~ Q_g(x, .) for the chi-squared family."""
    if not isinstance(fam, ChiSquaredFamily):
        raise TypeError("chisq_propose requires a ChiSquaredFamily")
    x = _as_state(x, fam.dim, positive=True)
    return fam.propose(x, _check_group_element(g, fam), rng)


def mixing_draw(x, fam: KernelFamily, rng):
    """Draw the group element g ~ K(x, dg) that tilts the Haar measure at x."""
    x = _as_state(x, fam.dim, positive=fam.support == "positive")
    return fam.mixing(x, fam.stats(x), rng)


def log_mu_star(x, fam: KernelFamily) -> float:
    """Log density (wrt Lebesgue, additive constant fixed to 0) of the invariant mixture measure."""
    x = _as_state(x, fam.dim, positive=fam.support == "positive")
    return fam.log_mu_star(fam.stats(x))


def log_mu(x, fam: KernelFamily) -> float:
    """Log density of the base measure mu at the group identity."""
    x = _as_state(x, fam.dim, positive=fam.support == "positive")
    return fam.log_mu(x, fam.stats(x))


def haar_mixture_propose(x, fam: KernelFamily, rng) -> MixtureDraw:
    """One draw from the mixture kernel: g ~ K(x, dg), then y ~ Q_g(x, .)."""
    x = _as_state(x, fam.dim, positive=fam.support == "positive")
    stats = fam.stats(x)
    g = fam.mixing(x, stats, rng)
    y = fam.propose(x, g, rng)
    return MixtureDraw(g=g, y=y)
