"""Chain diagnostics: autocovariance, effective sample size, summaries.

ESS uses the initial monotone positive sequence estimator: pair up
autocorrelations (rho_{2m} + rho_{2m+1}), keep pairs while they stay positive,
enforce monotone non-increase, and sum.  The estimator is deliberately not
clamped at n: an antithetic chain can be genuinely super-efficient and the
report says so instead of hiding it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["EssReport", "autocovariance", "ess", "acceptance_rate", "summarize"]


@dataclass(frozen=True)
class EssReport:
    """Effective-sample-size estimate for one scalar series."""

    ess: float
    ess_per_second: float
    n: int
    act_estimate: float  # integrated autocorrelation time
    truncation_lag: int
    method: str = "initial-monotone"

    @property
    def superefficient(self) -> bool:
        """True when the estimate exceeds the raw sample count."""
        return self.ess > self.n

    @property
    def ess_per_iter(self) -> float:
        return self.ess / self.n


def autocovariance(series, max_lag: int) -> np.ndarray:
    """Biased (1/n-normalized) autocovariances at lags 0..max_lag, via FFT.

    A constant series has no autocovariance signal; it returns all zeros and
    warns rather than raising, because a downstream ratio is the caller's
    decision.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be 1-d")
    n = x.shape[0]
    if max_lag < 0 or n <= max_lag:
        raise ValueError("need 0 <= max_lag < len(series)")
    if np.all(x == x[0]):
        warnings.warn("constant series: autocovariance is identically zero")
        return np.zeros(max_lag + 1)
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:max_lag + 1].real
    return acov / n


def ess(series, wall_time: float | None = None) -> EssReport:
    """Effective sample size of a scalar series by the initial monotone rule.

    ``wall_time`` (seconds, sampling loop only) sets ess_per_second; without it
    the rate is nan.  Requires at least 100 points and a non-constant series.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be 1-d")
    n = x.shape[0]
    if n < 100:
        raise ValueError("need at least 100 points for a stable estimate")
    acov = autocovariance(x, n - 1)
    if acov[0] == 0.0:
        raise ValueError("constant series has no effective sample size")
    rho = acov / acov[0]

    # pair sums P_m = rho_{2m} + rho_{2m+1}; P_0 = 1 + rho_1
    n_pairs = n // 2
    pair = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    # initial positive sequence: stop before the first nonpositive pair,
    # then force the kept pairs to be non-increasing
    nonpos = np.nonzero(pair <= 0.0)[0]
    m_stop = int(nonpos[0]) if nonpos.size else n_pairs
    # always keep the first pair: when it is the one that stopped the scan it
    # sums to <= 0 only for a perfectly antithetic series, where it is exactly 0
    m_stop = max(m_stop, 1)
    kept = np.minimum.accumulate(pair[:m_stop])
    # tau = 1 + 2 sum_{k>=1} rho_k = 2 sum_m P_m - 1
    tau = 2.0 * float(np.sum(kept)) - 1.0
    # floor keeps the estimate positive; reaching it means extreme
    # anti-correlation, reported below as super-efficiency, never clamped to n
    tau = max(tau, 2.0 / n)
    truncation_lag = 2 * m_stop
    value = n / tau
    if wall_time is not None and wall_time <= 0:
        raise ValueError("wall_time must be positive")
    rate = float("nan") if wall_time is None else value / wall_time
    return EssReport(ess=value, ess_per_second=rate, n=n, act_estimate=tau,
                     truncation_lag=truncation_lag)


def acceptance_rate(trace) -> float:
    """Fraction of accepted steps over the measured (post-burn-in) phase."""
    return float(np.mean(trace.measured_accepted))


def summarize(trace, wall_time: float | None = None) -> dict:
    """One JSON-able record of chain health: acceptance, ESS, moments."""
    wt = trace.sampling_time if wall_time is None else wall_time
    report = ess(trace.measured_log_target, wall_time=wt)
    record = {
        "n": int(trace.iters - trace.burnin),
        "acceptance": trace.acceptance,
        "ess": report.ess,
        "ess_per_second": report.ess_per_second,
        "ess_per_iter": report.ess_per_iter,
        "act_estimate": report.act_estimate,
        "superefficient": report.superefficient,
        "mean_inner_tries": trace.mean_inner_tries,
        "direction_balance": (trace.direction_balance if trace.guided else None),
        "log_target_mean": float(np.mean(trace.measured_log_target)),
    }
    if trace.states is not None and len(trace.states):
        record["state_mean"] = [float(v) for v in trace.states.mean(axis=0)]
        record["state_var"] = [float(v) for v in trace.states.var(axis=0)]
    return record
