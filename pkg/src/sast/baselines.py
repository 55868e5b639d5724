"""Competing online FDR rules: LOND, LORD++ and a fixed p-value cutoff."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Constant used by the LORD++ authors so that the log-style sequence sums to ~1.
LOG_SEQUENCE_CONSTANT = 0.07720838


class GammaSequence:
    """Positive, non-increasing discount sequence ``gamma_j`` for ``j >= 1``.

    ``kind="inverse_square"`` is ``6 / (pi^2 j^2)``; ``kind="log"`` is the
    ``log(max(j, 2)) / (j exp(sqrt(log j)))`` sequence of LORD++.
    """

    def __init__(self, kind: str = "inverse_square"):
        if kind not in ("inverse_square", "log"):
            raise ValueError(f"unknown gamma sequence {kind!r}")
        self.kind = kind
        self._cache = np.empty(0)

    def __call__(self, j):
        j = np.asarray(j, dtype=float)
        if np.any(j < 1):
            raise ValueError("gamma sequence is indexed from 1")
        if self.kind == "inverse_square":
            out = 6.0 / (math.pi ** 2 * j * j)
        else:
            out = (LOG_SEQUENCE_CONSTANT * np.log(np.maximum(j, 2.0))
                   / (j * np.exp(np.sqrt(np.log(j)))))
        return out[()]

    def array(self, n: int) -> np.ndarray:
        """``[gamma_1, ..., gamma_n]``, cached."""
        if self._cache.size < n:
            self._cache = np.asarray(self(np.arange(1, max(n, 2 * self._cache.size) + 1)))
        return self._cache[:n]


@dataclass
class BaselineState:
    t: int = 0
    rejection_times: list = field(default_factory=list)
    wealth: float = 0.0

    @property
    def rejection_count(self) -> int:
        return len(self.rejection_times)


def _check_p(p_t: float) -> None:
    if not 0.0 <= p_t <= 1.0:
        raise ValueError(f"p-value must lie in [0, 1], got {p_t}")


def lond_level(state: BaselineState, t: int, alpha: float, gamma: GammaSequence) -> float:
    return alpha * float(gamma(t)) * (state.rejection_count + 1)


def lond_step(state: BaselineState, p_t: float, alpha: float,
              gamma: GammaSequence | None = None) -> bool:
    """Reject iff ``p_t <= alpha gamma_t (rejections so far + 1)``."""
    _check_p(p_t)
    gamma = gamma or GammaSequence()
    state.t += 1
    reject = p_t <= lond_level(state, state.t, alpha, gamma)
    if reject:
        state.rejection_times.append(state.t)
    return reject


def lordpp_level(state: BaselineState, t: int, alpha: float, gamma: GammaSequence,
                 w0: float) -> float:
    """Test level at time ``t`` given the rejections booked in ``state``."""
    level = float(gamma(t)) * w0
    taus = state.rejection_times
    if taus:
        g = gamma.array(t)
        level += (alpha - w0) * g[t - taus[0] - 1]
        if len(taus) > 1:
            level += alpha * g[t - np.asarray(taus[1:]) - 1].sum()
    return level


def lordpp_step(state: BaselineState, p_t: float, alpha: float,
                gamma: GammaSequence | None = None, w0: float | None = None) -> bool:
    """One LORD++ decision.

    ``state.wealth`` tracks the alpha-wealth: it starts at ``w0``, each test
    spends its level and each rejection earns ``alpha`` (``alpha - w0`` for
    the first one).
    """
    _check_p(p_t)
    gamma = gamma or GammaSequence()
    w0 = alpha / 2 if w0 is None else w0
    if not 0.0 < w0 <= alpha:
        raise ValueError("w0 must lie in (0, alpha]")
    if state.t == 0 and not state.rejection_times:
        state.wealth = w0
    state.t += 1
    level = lordpp_level(state, state.t, alpha, gamma, w0)
    state.wealth -= level
    reject = p_t <= level
    if reject:
        state.wealth += alpha - w0 if not state.rejection_times else alpha
        state.rejection_times.append(state.t)
    return reject


def fixed_threshold_step(p_t: float, c: float) -> bool:
    _check_p(p_t)
    if not 0.0 < c <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {c}")
    return p_t <= c


def run_lond(pvalues, alpha: float, gamma: GammaSequence | None = None) -> np.ndarray:
    state = BaselineState()
    gamma = gamma or GammaSequence()
    return np.array([lond_step(state, float(p), alpha, gamma) for p in pvalues], dtype=bool)


def run_lordpp(pvalues, alpha: float, gamma: GammaSequence | None = None,
               w0: float | None = None) -> np.ndarray:
    state = BaselineState()
    gamma = gamma or GammaSequence()
    gamma.array(len(pvalues) + 1)
    return np.array([lordpp_step(state, float(p), alpha, gamma, w0) for p in pvalues], dtype=bool)


def run_fixed(pvalues, c: float) -> np.ndarray:
    p = np.asarray(pvalues, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    return p <= c
