"""Chain drivers: plain Metropolis, Haar-mixture Metropolis, and the guided variant.

Two layers live here.  The module-level step functions (`metropolis_step`,
`metropolis_haar_step`, `guided_step`, `rwm_step`, `mala_step`) are the
documented single-step contracts: state in, :class:`StepOutcome` out.  The
kernel driver classes carry per-state caches between steps so `run_chain` never
recomputes a log density it already knows; the step functions are thin wrappers
over the same driver code.

Conventions shared by every step:

* exactly one acceptance uniform is consumed per step, drawn even when the
  decision is forced, so random streams stay aligned across kernel variants;
* a proposal with non-finite target log density is auto-rejected;
* a rejected step leaves the state component unchanged, and a guided rejection
  flips the direction while a guided acceptance preserves it.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import ChainAbortedError, DegenerateStatisticError, GuidedLoopError
from .groups import Direction
from .primitives import RngStream
from .targets import TargetModel

__all__ = [
    "GuidedState",
    "StepOutcome",
    "ChainTrace",
    "PlainMetropolisKernel",
    "MetropolisHaarKernel",
    "GuidedMetropolisHaarKernel",
    "RandomWalkKernel",
    "MalaKernel",
    "metropolis_step",
    "metropolis_haar_step",
    "guided_step",
    "rwm_step",
    "mala_step",
    "run_chain",
]

_NEG_INF = -math.inf


@dataclass(frozen=True)
class GuidedState:
    """State of a lifted chain: position and direction flag."""

    x: np.ndarray
    z: Direction


class StepOutcome(NamedTuple):
    """Result of one Metropolis step.

    ``next`` is the new position (or :class:`GuidedState` for guided kernels),
    ``log_target`` the target log density at the new position, ``inner_tries``
    the number of proposal draws (always 1 for non-guided kernels), and
    ``cache`` an opaque value that can be fed back to the same step function to
    skip recomputing densities at the current state.
    """

    next: object
    accepted: bool
    log_target: float
    inner_tries: int = 1
    cache: object = None


def _finite_or_neg_inf(v: float) -> float:
    return v if math.isfinite(v) else _NEG_INF


def _accept(log_ratio: float, rng) -> bool:
    # the uniform is drawn unconditionally: one per step, no exceptions
    u = rng.random()
    if log_ratio >= 0.0:
        return True
    if log_ratio == _NEG_INF or math.isnan(log_ratio):
        return False
    if u == 0.0:
        return True
    return math.log(u) <= log_ratio


# driver-internal states; first field is always the position vector

class _ReversibleState(NamedTuple):
    x: np.ndarray
    stats: object
    log_leb: float
    log_pi: float


class _GuidedDriverState(NamedTuple):
    x: np.ndarray
    z: int
    stats: object
    order: object
    log_leb: float
    log_pi: float


class _WalkState(NamedTuple):
    x: np.ndarray
    log_leb: float


class _MalaState(NamedTuple):
    x: np.ndarray
    log_leb: float
    grad: np.ndarray


class _KernelBase:
    """Shared plumbing for the kernel drivers."""

    guided = False

    def __init__(self, target: TargetModel):
        self.target = target

    def _log_leb(self, x) -> float:
        return _finite_or_neg_inf(float(self.target.log_density(x)))

    def init_state(self, x, direction: int = int(Direction.POSITIVE)):
        raise NotImplementedError

    def refresh(self, st):
        """Recompute target-dependent caches (used when the target itself moved)."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


class _FamilyKernel(_KernelBase):
    def __init__(self, family, target: TargetModel):
        if family.support == "positive" and target.support != "positive":
            # the reverse pairing is fine: real-support proposals on a positive
            # target are auto-rejected off support
            raise ValueError(
                "a positive-orthant proposal family requires a positive-orthant target")
        if family.dim != target.dim:
            raise ValueError("family and target dimensions differ")
        super().__init__(target)
        self.family = family

    def _positions_log_pi(self, x):
        """(stats, log_leb, log_pi) at a valid state x; raises if x is unusable."""
        stats = self.family.stats(x)
        log_leb = self._log_leb(x)
        if log_leb == _NEG_INF:
            raise ValueError("initial state has zero target density")
        return stats, log_leb

    def _checked_x(self, x) -> np.ndarray:
        x = np.array(x, dtype=float, copy=True)
        if x.shape != (self.family.dim,):
            raise ValueError(f"state must have shape ({self.family.dim},)")
        return x


class PlainMetropolisKernel(_FamilyKernel):
    """Metropolis with the family proposal frozen at the group identity.

    The acceptance ratio is taken against the family's base measure mu, which
    the identity-element proposal is reversible for.  With the AR family this
    is the preconditioned Crank-Nicolson sampler.
    """

    def init_state(self, x, direction: int = 1) -> _ReversibleState:
        x = self._checked_x(x)
        stats, log_leb = self._positions_log_pi(x)
        return _ReversibleState(x, stats, log_leb,
                                log_leb - self.family.log_mu(x, stats))

    def refresh(self, st: _ReversibleState) -> _ReversibleState:
        log_leb = self._log_leb(st.x)
        return _ReversibleState(st.x, st.stats, log_leb,
                                log_leb - self.family.log_mu(st.x, st.stats))

    def step(self, st: _ReversibleState, rng):
        fam = self.family
        y = fam.propose(st.x, fam.identity_element, rng)
        try:
            stats_y = fam.stats(y)
        except (DegenerateStatisticError, ValueError):
            _accept(_NEG_INF, rng)
            return st, False, st.log_leb, 1
        log_leb_y = self._log_leb(y)
        log_pi_y = log_leb_y - fam.log_mu(y, stats_y) if log_leb_y != _NEG_INF else _NEG_INF
        if _accept(log_pi_y - st.log_pi, rng):
            return _ReversibleState(y, stats_y, log_leb_y, log_pi_y), True, log_leb_y, 1
        return st, False, st.log_leb, 1

    def describe(self) -> dict:
        return {"kernel": "metropolis", **self.family.descriptor()}


class MetropolisHaarKernel(_FamilyKernel):
    """Metropolis over the Haar mixture: g ~ K(x, dg), y ~ Q_g(x, .), accept
    with the ratio taken against the group-invariant measure mu*."""

    def init_state(self, x, direction: int = 1) -> _ReversibleState:
        x = self._checked_x(x)
        stats, log_leb = self._positions_log_pi(x)
        return _ReversibleState(x, stats, log_leb,
                                log_leb - self.family.log_mu_star(stats))

    def refresh(self, st: _ReversibleState) -> _ReversibleState:
        log_leb = self._log_leb(st.x)
        return _ReversibleState(st.x, st.stats, log_leb,
                                log_leb - self.family.log_mu_star(st.stats))

    def step(self, st: _ReversibleState, rng):
        fam = self.family
        g = fam.mixing(st.x, st.stats, rng)
        y = fam.propose(st.x, g, rng)
        try:
            stats_y = fam.stats(y)
        except (DegenerateStatisticError, ValueError):
            _accept(_NEG_INF, rng)
            return st, False, st.log_leb, 1
        log_leb_y = self._log_leb(y)
        log_pi_y = log_leb_y - fam.log_mu_star(stats_y) if log_leb_y != _NEG_INF else _NEG_INF
        if _accept(log_pi_y - st.log_pi, rng):
            return _ReversibleState(y, stats_y, log_leb_y, log_pi_y), True, log_leb_y, 1
        return st, False, st.log_leb, 1

    def describe(self) -> dict:
        return {"kernel": "metropolis-haar", **self.family.descriptor()}


class GuidedMetropolisHaarKernel(_FamilyKernel):
    """Non-reversible lifting of the Haar-mixture kernel.

    The proposal is redrawn from the mixture until its statistic falls strictly
    on the side of the current statistic selected by the direction flag; the
    Metropolis decision is then taken exactly as in the reversible kernel, and
    a rejection keeps the position but flips the direction.
    """

    guided = True

    def __init__(self, family, target: TargetModel, max_tries: int = 1000):
        super().__init__(family, target)
        if max_tries < 1:
            raise ValueError("max_tries must be >= 1")
        self.max_tries = max_tries

    def init_state(self, x, direction: int = 1) -> _GuidedDriverState:
        x = self._checked_x(x)
        z = int(direction)
        if z not in (-1, 1):
            raise ValueError("direction must be +1 or -1")
        stats, log_leb = self._positions_log_pi(x)
        return _GuidedDriverState(x, z, stats, self.family.order_value(stats),
                                  log_leb, log_leb - self.family.log_mu_star(stats))

    def refresh(self, st: _GuidedDriverState) -> _GuidedDriverState:
        log_leb = self._log_leb(st.x)
        return _GuidedDriverState(st.x, st.z, st.stats, st.order, log_leb,
                                  log_leb - self.family.log_mu_star(st.stats))

    def step(self, st: _GuidedDriverState, rng):
        fam = self.family
        x, z, stats_x, order_x = st.x, st.z, st.stats, st.order
        mixing, propose, fam_stats = fam.mixing, fam.propose, fam.stats
        order_value, order_cmp = fam.order_value, fam.order_cmp
        max_tries = self.max_tries
        tries = 0
        while True:
            tries += 1
            if tries > max_tries:
                raise GuidedLoopError(
                    f"guided proposal loop exceeded max_tries={max_tries}; "
                    "the direction statistic may be stuck (check the kernel "
                    "parameters and the state scale)")
            g = mixing(x, stats_x, rng)
            y = propose(x, g, rng)
            try:
                stats_y = fam_stats(y)
            except (DegenerateStatisticError, ValueError):
                continue  # counts as a try; ties and bad draws are redrawn
            order_y = order_value(stats_y)
            if order_cmp(order_y, order_x) == z:
                break
        log_leb_y = self._log_leb(y)
        log_pi_y = log_leb_y - fam.log_mu_star(stats_y) if log_leb_y != _NEG_INF else _NEG_INF
        if _accept(log_pi_y - st.log_pi, rng):
            nxt = _GuidedDriverState(y, z, stats_y, order_y, log_leb_y, log_pi_y)
            return nxt, True, log_leb_y, tries
        nxt = _GuidedDriverState(x, -z, stats_x, order_x, st.log_leb, st.log_pi)
        return nxt, False, st.log_leb, tries

    def describe(self) -> dict:
        return {"kernel": "guided-metropolis-haar", "max_tries": self.max_tries,
                **self.family.descriptor()}


class RandomWalkKernel(_KernelBase):
    """Isotropic Gaussian random walk Metropolis; ``scale`` may be retuned
    between (never within) measured runs."""

    def __init__(self, scale: float, target: TargetModel):
        if scale <= 0:
            raise ValueError("scale must be positive")
        super().__init__(target)
        self.scale = float(scale)

    def init_state(self, x, direction: int = 1) -> _WalkState:
        x = np.array(x, dtype=float, copy=True)
        if x.shape != (self.target.dim,):
            raise ValueError(f"state must have shape ({self.target.dim},)")
        log_leb = self._log_leb(x)
        if log_leb == _NEG_INF:
            raise ValueError("initial state has zero target density")
        return _WalkState(x, log_leb)

    def refresh(self, st: _WalkState) -> _WalkState:
        return _WalkState(st.x, self._log_leb(st.x))

    def step(self, st: _WalkState, rng):
        y = st.x + self.scale * rng.standard_normal(st.x.shape[0])
        log_leb_y = self._log_leb(y)
        if _accept(log_leb_y - st.log_leb, rng):
            return _WalkState(y, log_leb_y), True, log_leb_y, 1
        return st, False, st.log_leb, 1

    def describe(self) -> dict:
        return {"kernel": "rwm", "scale": self.scale, "dim": self.target.dim}


class MalaKernel(_KernelBase):
    """Metropolis-adjusted Langevin: drift half a squared step along the gradient."""

    def __init__(self, scale: float, target: TargetModel):
        if scale <= 0:
            raise ValueError("scale must be positive")
        if target.gradient is None:
            raise ValueError("MALA requires a target with a gradient")
        super().__init__(target)
        self.scale = float(scale)
        self.nonfinite_gradients = 0

    def _grad(self, x) -> np.ndarray | None:
        g = np.asarray(self.target.gradient(x), dtype=float)
        if not np.all(np.isfinite(g)):
            self.nonfinite_gradients += 1
            return None
        return g

    def init_state(self, x, direction: int = 1) -> _MalaState:
        x = np.array(x, dtype=float, copy=True)
        if x.shape != (self.target.dim,):
            raise ValueError(f"state must have shape ({self.target.dim},)")
        log_leb = self._log_leb(x)
        if log_leb == _NEG_INF:
            raise ValueError("initial state has zero target density")
        g = self._grad(x)
        if g is None:
            raise ValueError("gradient is not finite at the initial state")
        return _MalaState(x, log_leb, g)

    def refresh(self, st: _MalaState) -> _MalaState:
        g = self._grad(st.x)
        if g is None:
            raise ValueError("gradient is not finite at the current state")
        return _MalaState(st.x, self._log_leb(st.x), g)

    def step(self, st: _MalaState, rng):
        scale = self.scale
        half_sq = 0.5 * scale * scale
        fwd_mean = st.x + half_sq * st.grad
        y = fwd_mean + scale * rng.standard_normal(st.x.shape[0])
        log_leb_y = self._log_leb(y)
        if log_leb_y == _NEG_INF:
            _accept(_NEG_INF, rng)
            return st, False, st.log_leb, 1
        grad_y = self._grad(y)
        if grad_y is None:
            _accept(_NEG_INF, rng)
            return st, False, st.log_leb, 1
        diff_fwd = y - fwd_mean
        diff_rev = st.x - y - half_sq * grad_y
        inv_var = 1.0 / (2.0 * scale * scale)
        log_ratio = (log_leb_y - st.log_leb
                     + inv_var * (float(diff_fwd @ diff_fwd) - float(diff_rev @ diff_rev)))
        if _accept(log_ratio, rng):
            return _MalaState(y, log_leb_y, grad_y), True, log_leb_y, 1
        return st, False, st.log_leb, 1

    def describe(self) -> dict:
        return {"kernel": "mala", "scale": self.scale, "dim": self.target.dim}


# ---------------------------------------------------------------------------
# single-step contracts


def metropolis_step(x, propose: Callable, log_pi: Callable, rng,
                    log_pi_x: float | None = None) -> StepOutcome:
    """Generic Metropolis step: y = propose(x, rng), accept with pi(y)/pi(x).

    ``log_pi_x`` lets the caller reuse the value cached from the previous
    outcome; the outcome's ``cache`` is exactly that value for the new state.
    """
    if log_pi_x is None:
        log_pi_x = float(log_pi(x))
    if not math.isfinite(log_pi_x):
        raise ValueError("log_pi must be finite at the current state")
    y = propose(x, rng)
    log_pi_y = _finite_or_neg_inf(float(log_pi(y)))
    if _accept(log_pi_y - log_pi_x, rng):
        return StepOutcome(y, True, log_pi_y, 1, log_pi_y)
    return StepOutcome(x, False, log_pi_x, 1, log_pi_x)


def metropolis_haar_step(x, family, target: TargetModel, rng,
                         cache=None) -> StepOutcome:
    """One Haar-mixture Metropolis step from position x."""
    kernel = MetropolisHaarKernel(family, target)
    st = cache if isinstance(cache, _ReversibleState) else kernel.init_state(x)
    st2, accepted, log_target, tries = kernel.step(st, rng)
    return StepOutcome(st2.x, accepted, log_target, tries, st2)


def guided_step(state: GuidedState, family, target: TargetModel, rng,
                max_tries: int = 1000, cache=None) -> StepOutcome:
    """One guided step from a lifted state (position, direction)."""
    kernel = GuidedMetropolisHaarKernel(family, target, max_tries=max_tries)
    if isinstance(cache, _GuidedDriverState):
        st = cache
    else:
        st = kernel.init_state(state.x, direction=int(state.z))
    st2, accepted, log_target, tries = kernel.step(st, rng)
    out_state = GuidedState(st2.x, Direction(st2.z))
    return StepOutcome(out_state, accepted, log_target, tries, st2)


def rwm_step(x, scale: float, target: TargetModel, rng, cache=None) -> StepOutcome:
    """One isotropic random-walk Metropolis step."""
    kernel = RandomWalkKernel(scale, target)
    st = cache if isinstance(cache, _WalkState) else kernel.init_state(x)
    st2, accepted, log_target, _ = kernel.step(st, rng)
    return StepOutcome(st2.x, accepted, log_target, 1, st2)


def mala_step(x, scale: float, target: TargetModel, rng, cache=None) -> StepOutcome:
    """One Metropolis-adjusted Langevin step."""
    kernel = MalaKernel(scale, target)
    st = cache if isinstance(cache, _MalaState) else kernel.init_state(x)
    st2, accepted, log_target, _ = kernel.step(st, rng)
    return StepOutcome(st2.x, accepted, log_target, 1, st2)


# ---------------------------------------------------------------------------
# chain runner


@dataclass
class ChainTrace:
    """Everything one chain run produced.

    Per-step arrays span all requested iterations including burn-in; the
    ``measured_*`` views and the thinned ``states`` block cover only the
    post-burn-in phase, which is the only part statistics are computed from.
    """

    log_target: np.ndarray
    accepted: np.ndarray
    direction: np.ndarray
    inner_tries: np.ndarray
    states: np.ndarray | None
    state_iters: np.ndarray | None
    iters: int
    burnin: int
    thin: int
    seed: int
    stream: int
    kernel: dict
    target_name: str
    wall_time: float
    sampling_time: float
    guided: bool

    def __len__(self) -> int:
        return self.iters

    @property
    def measured_log_target(self) -> np.ndarray:
        return self.log_target[self.burnin:]

    @property
    def measured_accepted(self) -> np.ndarray:
        return self.accepted[self.burnin:]

    @property
    def measured_inner_tries(self) -> np.ndarray:
        return self.inner_tries[self.burnin:]

    @property
    def measured_direction(self) -> np.ndarray:
        return self.direction[self.burnin:]

    @property
    def acceptance(self) -> float:
        return float(np.mean(self.measured_accepted))

    @property
    def mean_inner_tries(self) -> float:
        return float(np.mean(self.measured_inner_tries))

    @property
    def direction_balance(self) -> float:
        """Fraction of measured steps spent with direction +1 (nan if not guided)."""
        if not self.guided:
            return float("nan")
        return float(np.mean(self.measured_direction == 1))

    def final_state(self) -> np.ndarray:
        if self.states is None or len(self.states) == 0:
            raise ValueError("trace stored no states")
        return self.states[-1]

    def write_csv(self, path) -> None:
        """One row per iteration; thinned state columns filled only where stored."""
        d = 0 if self.states is None else self.states.shape[1]
        state_row = {}
        if self.states is not None:
            state_row = {int(it): i for i, it in enumerate(self.state_iters)}
        lines = ["iter,log_target,accepted,direction,inner_tries"
                 + "".join(f",x{j + 1}" for j in range(d))]
        empty_suffix = "," * d
        for t in range(self.iters):
            row = (f"{t},{float(self.log_target[t])!r},{int(self.accepted[t])},"
                   f"{int(self.direction[t])},{int(self.inner_tries[t])}")
            if d:
                i = state_row.get(t)
                if i is None:
                    row += empty_suffix
                else:
                    row += "".join(f",{float(v)!r}" for v in self.states[i])
            lines.append(row)
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")

    def metadata(self) -> dict:
        return {
            "kernel": self.kernel,
            "target": self.target_name,
            "seed": self.seed,
            "stream": self.stream,
            "iters": self.iters,
            "burnin": self.burnin,
            "thin": self.thin,
            "acceptance": self.acceptance,
            "mean_inner_tries": self.mean_inner_tries,
            "direction_balance": (None if not self.guided else self.direction_balance),
            "wall_time": self.wall_time,
            "sampling_time": self.sampling_time,
            "guided": self.guided,
        }

    def write_meta(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_chain(kernel, x_init, iters: int, burnin: int = 0, thin: int = 1,
              seed: int = 0, stream: int = 0, store_states: bool = True,
              initial_direction: Direction = Direction.POSITIVE) -> ChainTrace:
    """Run one chain and record its full trace.

    Parameters
    ----------
    kernel:
        A kernel driver (one of the classes above).
    x_init:
        Starting position; must have positive target density.
    iters, burnin, thin:
        Total step count, steps discarded before statistics, and the state
        storage stride.  Requires iters > burnin >= 0 and thin >= 1.
    seed, stream:
        Random stream identity; the same pair reproduces the chain bit-exactly.
    store_states:
        When false, only per-step scalars are kept.

    The measured wall time (``sampling_time``) covers only the post-burn-in
    sampling loop, no I/O.
    """
    if burnin < 0 or iters <= burnin:
        raise ValueError("need iters > burnin >= 0")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    rng = RngStream(seed, stream).generator()
    st = kernel.init_state(x_init, direction=int(initial_direction))
    guided = kernel.guided
    dim = st[0].shape[0]

    log_target = np.empty(iters)
    accepted = np.zeros(iters, dtype=bool)
    direction = np.zeros(iters, dtype=np.int8)
    inner_tries = np.ones(iters, dtype=np.int32)
    n_keep = -(-(iters - burnin) // thin)
    states = np.empty((n_keep, dim)) if store_states else None
    state_iters = np.empty(n_keep, dtype=np.int64) if store_states else None

    step = kernel.step
    kept = 0
    t = 0
    t_start = t_mid = time.perf_counter()
    try:
        for t in range(burnin):
            st, acc, lt, k = step(st, rng)
            log_target[t] = lt
            accepted[t] = acc
            inner_tries[t] = k
            if guided:
                direction[t] = st[1]
        t_mid = time.perf_counter()
        for t in range(burnin, iters):
            st, acc, lt, k = step(st, rng)
            log_target[t] = lt
            accepted[t] = acc
            inner_tries[t] = k
            if guided:
                direction[t] = st[1]
            if store_states and (t - burnin) % thin == 0:
                states[kept] = st[0]
                state_iters[kept] = t
                kept += 1
    except Exception as exc:
        t_now = time.perf_counter()
        partial = ChainTrace(
            log_target=log_target[:t], accepted=accepted[:t],
            direction=direction[:t], inner_tries=inner_tries[:t],
            states=states[:kept] if store_states else None,
            state_iters=state_iters[:kept] if store_states else None,
            iters=t, burnin=min(burnin, t), thin=thin, seed=seed,
            stream=stream, kernel=kernel.describe(),
            target_name=kernel.target.name, wall_time=t_now - t_start,
            sampling_time=max(t_now - t_mid, 0.0) if t >= burnin else 0.0,
            guided=guided,
        )
        raise ChainAbortedError(
            f"chain aborted at step {t}: {exc}", partial=partial) from exc
    t_end = time.perf_counter()

    return ChainTrace(
        log_target=log_target, accepted=accepted, direction=direction,
        inner_tries=inner_tries, states=states, state_iters=state_iters,
        iters=iters, burnin=burnin, thin=thin, seed=seed, stream=stream,
        kernel=kernel.describe(), target_name=kernel.target.name,
        wall_time=t_end - t_start, sampling_time=t_end - t_mid, guided=guided,
    )
