"""Seeded random streams, Cholesky bundles, and the shared distribution samplers.

Everything downstream draws randomness through :class:`RngStream` so that a
(seed, stream) pair pins down every chain bit-exactly.  The gamma sampler keeps
small shapes exact via the boost transform instead of relying on the generator's
behavior near shape -> 0, and the noncentral chi-square is built literally as a
sum of squared shifted normals because the kernels that use it are defined by
that construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RngStream",
    "CholFactor",
    "sample_mvnormal",
    "mvnormal_logpdf",
    "sample_gamma",
    "sample_beta",
    "sample_noncentral_chisq",
]


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (seed, stream).

    Identical pairs yield bit-identical draw sequences; distinct stream ids on
    the same seed yield statistically independent streams.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream < 0:
            raise ValueError("seed and stream id must be nonnegative integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.default_rng(ss)


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular Cholesky factor of a covariance matrix.

    Caches the triangular inverse once so repeated quadratic forms cost a
    mat-vec instead of a solve.
    """

    lower: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.lower, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("Cholesky factor must be a square matrix")
        if not np.all(np.isfinite(L)):
            raise ValueError("Cholesky factor must be finite")
        if np.any(np.diag(L) <= 0):
            raise ValueError("Cholesky diagonal must be strictly positive")
        # store normalized array plus cached inverse on the frozen instance
        object.__setattr__(self, "lower", L)
        object.__setattr__(self, "_inv", np.linalg.inv(np.tril(L)))
        object.__setattr__(self, "_logdet_cov", 2.0 * float(np.sum(np.log(np.diag(L)))))

    @classmethod
    def from_covariance(cls, cov) -> "CholFactor":
        cov = np.asarray(cov, dtype=float)
        return cls(np.linalg.cholesky(cov))

    @classmethod
    def identity(cls, dim: int) -> "CholFactor":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def logdet_cov(self) -> float:
        """log det of the covariance the factor represents."""
        return self._logdet_cov

    @property
    def inv_lower(self) -> np.ndarray:
        """The cached L^{-1}."""
        return self._inv

    def matvec(self, w: np.ndarray) -> np.ndarray:
        """L @ w, mapping standard normals to covariance-shaped ones."""
        return self.lower @ w

    def solve_lower(self, v: np.ndarray) -> np.ndarray:
        """L^{-1} v via the cached inverse."""
        return self._inv @ v

    def quadform(self, v: np.ndarray) -> float:
        """v' (L L')^{-1} v."""
        z = self._inv @ v
        return float(z @ z)


def sample_mvnormal(mean, chol: CholFactor, scale: float, rng: np.random.Generator,
                    size: int | None = None) -> np.ndarray:
    """Draw from N(mean, scale * L L').

    ``size=None`` returns one vector, otherwise an (size, d) array.
    """
    mean = np.asarray(mean, dtype=float)
    if not np.all(np.isfinite(mean)):
        raise ValueError("mean must be finite")
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError("scale must be a positive finite scalar")
    s = math.sqrt(scale)
    if size is None:
        return mean + s * (chol.lower @ rng.standard_normal(chol.dim))
    w = rng.standard_normal((size, chol.dim))
    return mean + s * (w @ chol.lower.T)


def mvnormal_logpdf(x, mean, chol: CholFactor, scale: float = 1.0) -> float:
    """Log density of N(mean, scale * L L') at x."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    d = chol.dim
    qf = chol.quadform(x - mean) / scale
    return -0.5 * (qf + d * math.log(2.0 * math.pi) + d * math.log(scale) + chol.logdet_cov)


def _gamma_unit_scalar(shape: float, rng: np.random.Generator) -> float:
    """One unit-rate gamma draw; boost transform below shape 1."""
    if shape >= 1.0:
        return float(rng.standard_gamma(shape))
    g = float(rng.standard_gamma(shape + 1.0))
    u = 1.0 - rng.random()  # strictly positive
    return g * u ** (1.0 / shape)


def _gamma_unit_vector(shape: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n unit-rate gamma draws with a common scalar shape; boost transform below 1."""
    if shape >= 1.0:
        return rng.standard_gamma(shape, n)
    g = rng.standard_gamma(shape + 1.0, n)
    u = 1.0 - rng.random(n)
    return g * u ** (1.0 / shape)


def sample_gamma(shape, rate, rng: np.random.Generator, size=None):
    """Gamma(shape, rate) draws (rate parameterization, mean = shape/rate).

    Shapes below 1 use the boost transform G(a) = G(a+1) * U^{1/a} so the
    sampler stays exact for arbitrarily small shapes.  ``shape`` and ``rate``
    broadcast; scalar inputs with ``size=None`` return a float.
    """
    if size is None and isinstance(shape, (int, float)) and isinstance(rate, (int, float)):
        if not (shape > 0 and rate > 0 and math.isfinite(shape) and math.isfinite(rate)):
            raise ValueError("gamma shape and rate must be strictly positive and finite")
        return _gamma_unit_scalar(float(shape), rng) / rate
    sh = np.asarray(shape, dtype=float)
    rt = np.asarray(rate, dtype=float)
    if np.any(sh <= 0) or np.any(rt <= 0):
        raise ValueError("gamma shape and rate must be strictly positive")
    if not (np.all(np.isfinite(sh)) and np.all(np.isfinite(rt))):
        raise ValueError("gamma shape and rate must be finite")
    if size is None:
        out_shape = np.broadcast_shapes(sh.shape, rt.shape)
    else:
        out_shape = (size,) if np.isscalar(size) else tuple(size)
    a = np.broadcast_to(sh, out_shape)
    if np.all(a >= 1.0):
        g = rng.standard_gamma(a if out_shape else float(a))
    else:
        boosted = np.where(a < 1.0, a + 1.0, a)
        g = rng.standard_gamma(boosted)
        # 1 - random() lies in (0, 1]; the exponent wants strictly positive u
        u = 1.0 - rng.random(out_shape if out_shape else None)
        g = g * np.where(a < 1.0, u ** (1.0 / a), 1.0)
    out = g / np.broadcast_to(rt, out_shape)
    if out_shape == ():
        return float(out)
    return out


def sample_beta(a: float, b: float, rng: np.random.Generator, size=None):
    """Beta(a, b) draws."""
    if not (a > 0 and b > 0):
        raise ValueError("beta parameters must be strictly positive")
    return rng.beta(a, b, size=size)


def sample_noncentral_chisq(dof: int, noncentrality: float, rng: np.random.Generator,
                            size: int | None = None):
    """Noncentral chi-square by the explicit sum-of-squares construction.

    (sqrt(lambda) + w_1)^2 + w_2^2 + ... + w_dof^2 with iid standard normal w.
    Mean is dof + lambda; lambda = 0 recovers the central chi-square.
    """
    if not (isinstance(dof, (int, np.integer)) and dof >= 1):
        raise ValueError("dof must be an integer >= 1")
    if not (noncentrality >= 0 and math.isfinite(noncentrality)):
        raise ValueError("noncentrality must be finite and >= 0")
    root = math.sqrt(noncentrality)
    if size is None:
        w = rng.standard_normal(dof)
        val = (root + w[0]) ** 2
        if dof > 1:
            val += float(w[1:] @ w[1:])
        return float(val)
    w = rng.standard_normal((size, dof))
    out = (root + w[:, 0]) ** 2
    if dof > 1:
        out = out + np.einsum("ij,ij->i", w[:, 1:], w[:, 1:])
    return out
