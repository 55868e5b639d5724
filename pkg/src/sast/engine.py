"""Sequential SAST decision engine.

Each step appends the new Clfdr to a rolling window, re-derives the barrier
from the step-wise rule run on that window, then rejects if the Clfdr is
below the barrier and the rejected-set average stays within alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimators import (ClfdrEstimator, KernelConfig, SlidingWindow, TauPolicy,
                         estimate_clfdr)
from .model import MixtureParams, NullParams
from .offline import stepwise_k


class NotReadyError(RuntimeError):
    """Raised when the data-driven engine is asked to decide during burn-in."""


@dataclass
class SastState:
    alpha: float
    d: int = 1000
    use_barrier: bool = True
    t: int = 0
    gamma: float = math.nan
    rej_count: int = 0
    rej_clfdr_sum: float = 0.0
    barrier_updated: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.d < 1:
            raise ValueError("barrier window length must be positive")
        if math.isnan(self.gamma):
            self.gamma = self.alpha
        self._buf = np.empty(self.d)
        self._n = 0

    def push_clfdr(self, value: float) -> None:
        self._buf[self._n % self.d] = value
        self._n += 1

    @property
    def clfdr_window(self) -> np.ndarray:
        """The last ``d`` Clfdr values, oldest first."""
        if self._n <= self.d:
            return self._buf[:self._n].copy()
        start = self._n % self.d
        return np.concatenate([self._buf[start:], self._buf[:start]])

    def _window_view(self) -> np.ndarray:
        return self._buf[:min(self._n, self.d)]

    @property
    def capacity(self) -> float:
        return self.alpha * self.rej_count - self.rej_clfdr_sum

    @property
    def running_average(self) -> float:
        return self.rej_clfdr_sum / max(self.rej_count, 1)


@dataclass(frozen=True)
class DecisionRecord:
    t: int
    x: float
    clfdr: float
    barrier: float
    reject: bool
    capacity_after: float

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "accept"


def update_barrier(state: SastState) -> float:
    """Recompute the barrier from the Clfdr window and store it on ``state``."""
    if state._n == 0:
        raise ValueError("Clfdr window is empty")
    values = np.sort(state._window_view())
    if values[0] > state.alpha:
        return state.gamma
    k = stepwise_k(values, state.alpha)
    state.gamma = 1.0 if k == values.size else float(values[k])
    state.barrier_updated = True
    return state.gamma


def decide(state: SastState, clfdr_t: float) -> bool:
    """Apply the barrier and budget conditions; books the rejection if made."""
    barrier = state.gamma if state.use_barrier else 1.0
    if not clfdr_t < barrier:
        return False
    new_sum = state.rej_clfdr_sum + clfdr_t
    if new_sum / (state.rej_count + 1) <= state.alpha:
        state.rej_clfdr_sum = new_sum
        state.rej_count += 1
        return True
    return False


def step(state: SastState, clfdr_t: float, x: float = math.nan) -> DecisionRecord:
    """Advance the engine by one hypothesis with a known (or estimated) Clfdr."""
    if not 0.0 <= clfdr_t <= 1.0:
        raise ValueError(f"Clfdr must lie in [0, 1], got {clfdr_t}")
    state.t += 1
    state.push_clfdr(clfdr_t)
    if state.use_barrier:
        update_barrier(state)
    reject = decide(state, clfdr_t)
    return DecisionRecord(state.t, x, clfdr_t, state.gamma if state.use_barrier else 1.0,
                          reject, state.capacity)


def step_oracle(state: SastState, x_t: float, params: MixtureParams) -> DecisionRecord:
    return step(state, float(params.clfdr(state.t + 1, x_t)), x_t)


def step_datadriven(state: SastState, x_t: float, window: SlidingWindow, null: NullParams,
                    cfg: KernelConfig, tau: TauPolicy = TauPolicy(),
                    burn_in: int = 500) -> DecisionRecord:
    """One data-driven step estimating the Clfdr afresh from ``window``.

    The window must hold past observations only; the caller pushes ``x_t``
    afterwards. Use :class:`DataDrivenSast` for refresh-cached estimation.
    """
    if len(window) < max(burn_in, 2):
        raise NotReadyError(f"window holds {len(window)} observations, burn-in needs {burn_in}")
    clfdr = float(estimate_clfdr(window, x_t, null, cfg, tau, t=window.last_index + 1))
    return step(state, clfdr, x_t)


class OracleEstimator:
    """Estimator stand-in that returns the true Clfdr; a test seam for the data-driven path."""

    def __init__(self, params: MixtureParams):
        self.params = params
        self._seen = 0

    def observe(self, t: int, x: float, p: float) -> None:
        self._seen += 1

    def __len__(self) -> int:
        return self._seen

    def clfdr(self, t: int, x: float) -> float:
        return float(self.params.clfdr(t, x))


@dataclass
class DataDrivenSast:
    """Streaming data-driven SAST: burn-in, cached estimation, decisions.

    Time indices of burn-in data are non-positive; the first decision is at
    ``t = 1``.
    """

    alpha: float
    null: NullParams = field(default_factory=NullParams)
    cfg: KernelConfig = field(default_factory=KernelConfig)
    tau: TauPolicy = field(default_factory=TauPolicy.bh)
    burn_in: int = 500
    refresh: int = 10
    use_barrier: bool = True
    estimator: Optional[object] = None
    state: SastState = None

    def __post_init__(self):
        if self.estimator is None:
            self.estimator = ClfdrEstimator(self.null, self.cfg, self.tau, self.refresh)
        if self.state is None:
            self.state = SastState(self.alpha, self.cfg.d, self.use_barrier)
        self._n_burn = 0

    @property
    def ready(self) -> bool:
        return self._n_burn >= self.burn_in

    def observe_burn_in(self, x: float, p: float) -> None:
        if self.state.t > 0:
            raise RuntimeError("burn-in data must precede the first decision")
        self._n_burn += 1
        self.estimator.observe(self._n_burn - self.burn_in, x, p)

    def step(self, x: float, p: float) -> DecisionRecord:
        if not self.ready:
            raise NotReadyError(f"{self._n_burn} burn-in observations, need {self.burn_in}")
        t = self.state.t + 1
        clfdr = self.estimator.clfdr(t, x)
        record = step(self.state, clfdr, x)
        self.estimator.observe(t, x, p)
        return record


def run_sast(clfdrs, alpha: float, d: int = 1000, use_barrier: bool = True,
             check_invariant: bool = False):
    """Run the engine over a precomputed Clfdr sequence.

    Returns ``(decisions, barriers)`` as arrays. With ``check_invariant`` the
    rejected-set average is asserted to be within alpha after every step.
    """
    state = SastState(alpha, d, use_barrier)
    n = len(clfdrs)
    decisions = np.zeros(n, dtype=bool)
    barriers = np.empty(n)
    for i, c in enumerate(clfdrs):
        rec = step(state, float(c))
        decisions[i] = rec.reject
        barriers[i] = rec.barrier
        if check_invariant and not state.rej_clfdr_sum / max(state.rej_count, 1) <= alpha:
            raise AssertionError(f"budget invariant broken at t={state.t}")
    return decisions, barriers
