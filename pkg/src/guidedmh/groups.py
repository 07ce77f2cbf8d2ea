"""Totally ordered groups, their actions on the state space, and direction statistics.

The sampler layer only ever needs three concrete groups:

* the positive reals acting on positive vectors by componentwise scaling,
* the positive reals acting on all of R^d by scaling around a center point,
* the componentwise-multiplicative group R_+^d under the modified
  lexicographic order.

A statistic ``delta`` is *equivariant* for a group action when
``delta(act(g, x)) == compose(g, delta(x))``; the mixture kernels rely on that
identity and the tests assert it for each (statistic, action) pairing below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable

import numpy as np

from .errors import DegenerateStatisticError
from .primitives import CholFactor

__all__ = [
    "Direction",
    "GroupSpec",
    "Statistic",
    "mlex_leq",
    "delta_quadform",
    "delta_sum",
    "delta_prod",
    "scaling_group",
    "centered_scaling_group",
    "componentwise_group",
]


class Direction(IntEnum):
    """Direction flag carried by a guided chain; negation flips it."""

    NEGATIVE = -1
    POSITIVE = 1

    def flipped(self) -> "Direction":
        return Direction(-int(self))


@dataclass(frozen=True)
class GroupSpec:
    """A totally ordered group together with its action on the state space.

    Parameters
    ----------
    identity:
        The neutral element (scalar 1.0 or a vector of ones).
    compose, inverse:
        Group operation and inversion.
    leq:
        Total order; must be translation invariant on both sides.
    act:
        Left action (g, x) -> gx on state vectors.
    """

    identity: object
    compose: Callable
    inverse: Callable
    leq: Callable
    act: Callable
    name: str = ""


@dataclass(frozen=True)
class Statistic:
    """A direction statistic with its equivariance kind recorded."""

    kind: str  # quad-form | coordinate-sum | identity-vector | coordinate-product
    delta: Callable


def _check_positive_vector(x, label: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{label} must be a 1-d vector")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError(f"{label} must have strictly positive finite components")
    return x


def _log_partial_sums(x: np.ndarray) -> np.ndarray:
    # s_i = log(x_i * x_{i+1} * ... * x_d), computed in log space
    return np.cumsum(np.log(x)[::-1])[::-1]


def mlex_leq(a, b) -> bool:
    """Modified lexicographic order on positive vectors: a <= b.

    Vectors compare through their tail partial products s(x)_i = x_i ... x_d,
    first strict difference wins.  Partial products live in log space; ties are
    only ties on bit-equal values.
    """
    a = _check_positive_vector(a, "a")
    b = _check_positive_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError("mlex_leq operands must have equal length")
    sa = _log_partial_sums(a)
    sb = _log_partial_sums(b)
    diff = np.nonzero(sa != sb)[0]
    if diff.size == 0:
        return True
    i = diff[0]
    return bool(sa[i] < sb[i])


def delta_quadform(x, x0, m_chol: CholFactor) -> float:
    """(x - x0)' M^{-1} (x - x0) given the Cholesky factor of M.

    A zero value means the state coincides with the center and the scaling
    action cannot see it; that is reported as an error, never as 0.
    """
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    val = m_chol.quadform(x - x0)
    if val == 0.0:
        raise DegenerateStatisticError("state coincides with the quadratic-form center")
    if not math.isfinite(val):
        raise ValueError("quadratic form is not finite")
    return val


def delta_sum(x) -> float:
    """Coordinate sum of a positive vector."""
    x = _check_positive_vector(x, "x")
    return float(np.sum(x))


def delta_prod(x) -> float:
    """Coordinate product of a positive vector, accumulated in log space."""
    x = _check_positive_vector(x, "x")
    return float(np.exp(np.sum(np.log(x))))


def _scalar_leq(a: float, b: float) -> bool:
    return a <= b


def _scalar_compose(g: float, h: float) -> float:
    return g * h


def _scalar_inverse(g: float) -> float:
    return 1.0 / g


def scaling_group() -> GroupSpec:
    """Positive reals under multiplication acting componentwise: (g, x) -> g x."""
    return GroupSpec(
        identity=1.0,
        compose=_scalar_compose,
        inverse=_scalar_inverse,
        leq=_scalar_leq,
        act=lambda g, x: g * np.asarray(x, dtype=float),
        name="scaling",
    )


def centered_scaling_group(x0) -> GroupSpec:
    """Positive reals acting on R^d by scaling around x0: (g, x) -> x0 + sqrt(g)(x - x0)."""
    x0 = np.asarray(x0, dtype=float)

    def act(g, x):
        return x0 + math.sqrt(g) * (np.asarray(x, dtype=float) - x0)

    return GroupSpec(
        identity=1.0,
        compose=_scalar_compose,
        inverse=_scalar_inverse,
        leq=_scalar_leq,
        act=act,
        name="centered-scaling",
    )


def componentwise_group(dim: int) -> GroupSpec:
    """R_+^d under componentwise multiplication with the modified lexicographic order."""
    if dim < 1:
        raise ValueError("dim must be >= 1")

    def compose(g, h):
        return np.asarray(g, dtype=float) * np.asarray(h, dtype=float)

    return GroupSpec(
        identity=np.ones(dim),
        compose=compose,
        inverse=lambda g: 1.0 / np.asarray(g, dtype=float),
        leq=mlex_leq,
        act=compose,
        name="componentwise",
    )
