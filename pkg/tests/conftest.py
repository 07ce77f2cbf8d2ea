"""Shared statistical helpers for the test suite.

All randomized tests draw through seeded generators so every run is
deterministic; significance thresholds below are therefore one-time design
choices, not flake budgets.
"""

import numpy as np
from scipy import stats


def ks_pvalue(sample, cdf) -> float:
    """One-sample Kolmogorov-Smirnov p-value against a reference CDF."""
    return float(stats.kstest(np.asarray(sample, dtype=float), cdf).pvalue)


def ks2_pvalue(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov p-value."""
    return float(stats.ks_2samp(np.asarray(a, float), np.asarray(b, float)).pvalue)


def sign_test_pvalue(values) -> float:
    """Two-sided sign test of symmetry about zero (zeros dropped)."""
    v = np.asarray(values, dtype=float)
    v = v[v != 0.0]
    k = int(np.sum(v > 0.0))
    return float(stats.binomtest(k, v.size, 0.5).pvalue)


def mc_se(sample) -> float:
    """Plain Monte Carlo standard error of the sample mean (iid draws)."""
    v = np.asarray(sample, dtype=float)
    return float(np.std(v, ddof=1) / np.sqrt(v.size))
