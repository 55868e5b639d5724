"""Offline (simultaneous) reference procedures.

These see a whole batch of statistics at once. The step-wise Clfdr rule
doubles as the barrier computation of the online engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import MixtureParams, clfdr_oracle


class OracleThresholdUndefined(ValueError):
    pass


def bh_threshold(pvalues, alpha: float) -> Optional[float]:
    """Largest p-value rejected by the BH step-up rule, or None."""
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    if m == 0:
        return None
    p_sorted = np.sort(p)
    below = np.nonzero(p_sorted <= alpha * np.arange(1, m + 1) / m)[0]
    if below.size == 0:
        return None
    return float(p_sorted[below[-1]])


def bh(pvalues: Sequence[float], alpha: float) -> set[int]:
    """Benjamini-Hochberg step-up; returns the indices rejected."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    p = np.asarray(pvalues, dtype=float)
    if p.size == 0:
        return set()
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    cut = bh_threshold(p, alpha)
    if cut is None:
        return set()
    return set(np.nonzero(p <= cut)[0].tolist())


def weighted_bh(pvalues: Sequence[float], weights: Sequence[float], alpha: float) -> set[int]:
    """BH applied to ``min(p / w, 1)``."""
    p = np.asarray(pvalues, dtype=float)
    w = np.asarray(weights, dtype=float)
    if p.shape != w.shape:
        raise ValueError("pvalues and weights must have the same length")
    if np.any(~(w > 0)):
        raise ValueError("weights must be strictly positive")
    return bh(np.minimum(p / w, 1.0), alpha)


def sabha_weights(pi: Sequence[float]) -> np.ndarray:
    """Weights ``1 / (1 - pi)``."""
    return 1.0 / (1.0 - np.asarray(pi, dtype=float))


def gap_weights(pi: Sequence[float]) -> np.ndarray:
    """Weights ``pi / (1 - pi)``."""
    pi = np.asarray(pi, dtype=float)
    return pi / (1.0 - pi)


@dataclass(frozen=True)
class StepwiseResult:
    k: int
    threshold: Optional[float]
    rejections: frozenset

    @property
    def rejects_any(self) -> bool:
        return self.k > 0


def stepwise_k(sorted_values: np.ndarray, alpha: float) -> int:
    """Largest ``j`` whose running mean of the ``j`` smallest values is <= alpha.

    ``sorted_values`` must be ascending. The running mean of sorted values is
    non-decreasing, so the qualifying ``j`` form a prefix.
    """
    if sorted_values.size == 0 or sorted_values[0] > alpha:
        return 0
    excess = np.cumsum(sorted_values - alpha)
    return int(np.searchsorted(excess > 0, True))


def clfdr_stepwise(clfdrs: Sequence[float], alpha: float) -> StepwiseResult:
    """Reject the ``k`` smallest Clfdrs, ``k`` the largest prefix averaging <= alpha."""
    c = np.asarray(clfdrs, dtype=float)
    if np.any((c < 0) | (c > 1)) or np.any(np.isnan(c)):
        raise ValueError("Clfdr values must lie in [0, 1]")
    order = np.argsort(c, kind="stable")
    k = stepwise_k(c[order], alpha)
    if k == 0:
        return StepwiseResult(0, None, frozenset())
    return StepwiseResult(k, float(c[order[k - 1]]), frozenset(order[:k].tolist()))


def _mixture_clfdrs(params: MixtureParams, samples: int, rng: np.random.Generator) -> np.ndarray:
    pi = params.pi_at(1)
    alt = params.alt_at(1)
    theta = rng.random(samples) < pi
    x = np.where(theta,
                 rng.normal(alt.mean, alt.sd, samples),
                 rng.normal(params.null.mean, params.null.sd, samples))
    return clfdr_oracle(x, pi, params.null, alt)


def q_or(clfdrs: np.ndarray, gamma: float) -> float:
    """Monte-Carlo marginal FDR of thresholding Clfdr below ``gamma``; 0 if nothing passes."""
    selected = clfdrs < gamma
    n = selected.sum()
    if n == 0:
        return 0.0
    return float(clfdrs[selected].sum() / n)


def oracle_threshold_from_draws(clfdrs: np.ndarray, alpha: float, tol: float = 1e-4) -> float:
    """Bisection for the largest gamma with ``E[(Clfdr - alpha) 1{Clfdr < gamma}] <= 0``."""
    c = np.asarray(clfdrs, dtype=float)
    if not alpha < q_or(c, 1.0) or not np.any(c < 1.0):
        raise OracleThresholdUndefined(
            "oracle threshold undefined: alpha is not below the marginal FDR at gamma = 1")

    def excess(gamma: float) -> float:
        sel = c < gamma
        return float((c[sel] - alpha).sum())

    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def oracle_threshold_gamma(params: MixtureParams, alpha: float, mc_samples: int = 4_000_000,
                           seed=None, tol: float = 1e-4) -> float:
    """Oracle simultaneous-testing Clfdr threshold for a time-constant mixture."""
    rng = np.random.default_rng(seed)
    return oracle_threshold_from_draws(_mixture_clfdrs(params, mc_samples, rng), alpha, tol)


def oracle_threshold_with_stderr(params: MixtureParams, alpha: float, mc_samples: int = 4_000_000,
                                 seed=None, batches: int = 10, tol: float = 1e-4):
    """Threshold on all draws plus a batch-means standard error."""
    rng = np.random.default_rng(seed)
    c = _mixture_clfdrs(params, mc_samples, rng)
    gamma = oracle_threshold_from_draws(c, alpha, tol)
    parts = [oracle_threshold_from_draws(chunk, alpha, tol) for chunk in np.array_split(c, batches)]
    stderr = float(np.std(parts, ddof=1) / np.sqrt(batches))
    return gamma, stderr
