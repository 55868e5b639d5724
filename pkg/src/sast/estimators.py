"""Kernel estimators of the time-varying density, signal proportion and Clfdr.

All estimators look only at observations strictly before the time being
scored, so the time kernel is one-sided by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import DENSITY_FLOOR, NullParams, null_density

PI_EPS = 1e-10
SQRT_2PI = math.sqrt(2.0 * math.pi)


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family, bandwidths and window length.

    A bandwidth left as ``None`` is picked by Silverman's rule on the window
    every time the estimator state is refreshed.
    """

    kernel: str = "gaussian"
    h_t: Optional[float] = None
    h_x: Optional[float] = None
    d: int = 1000

    def __post_init__(self):
        if self.kernel not in ("gaussian", "epanechnikov"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        for name in ("h_t", "h_x"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.d < 2:
            raise ValueError(f"window length d must be at least 2, got {self.d}")


@dataclass(frozen=True)
class TauPolicy:
    """Screening threshold for the proportion estimator: fixed or BH-adaptive."""

    mode: str = "fixed"
    tau: float = 0.5

    def __post_init__(self):
        if self.mode not in ("fixed", "bh"):
            raise ValueError(f"unknown tau mode {self.mode!r}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")

    @classmethod
    def bh(cls) -> "TauPolicy":
        return cls(mode="bh")

    def resolve(self, window: "SlidingWindow") -> float:
        if self.mode == "fixed":
            return self.tau
        return select_tau_bh(window)


class SlidingWindow:
    """The last ``capacity`` observations as (index, x, p) triples, oldest evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data = np.empty((3, capacity))
        self._n = 0

    @classmethod
    def from_arrays(cls, indices: Sequence[int], x: Sequence[float],
                    p: Optional[Sequence[float]] = None,
                    capacity: Optional[int] = None) -> "SlidingWindow":
        if p is None:
            p = [math.nan] * len(x)
        window = cls(capacity or max(len(x), 1))
        for i, xi, pi in zip(indices, x, p):
            window.push(int(i), float(xi), float(pi))
        return window

    def push(self, index: int, x: float, p: float = math.nan) -> None:
        last = self.last_index
        if last is not None and index <= last:
            raise ValueError(f"indices must be strictly increasing ({index} after {last})")
        slot = self._n % self.capacity
        self._data[0, slot] = index
        self._data[1, slot] = x
        self._data[2, slot] = p
        self._n += 1

    def __len__(self) -> int:
        return min(self._n, self.capacity)

    def snapshot(self) -> "WindowSnapshot":
        """Copy of the current contents, oldest first."""
        if self._n == 0:
            raise EstimationError("window is empty")
        if self._n <= self.capacity:
            arr = self._data[:, :self._n].copy()
        else:
            start = self._n % self.capacity
            arr = np.concatenate([self._data[:, start:], self._data[:, :start]], axis=1)
        return WindowSnapshot(arr[0], arr[1], arr[2])

    @property
    def last_index(self) -> Optional[int]:
        if self._n == 0:
            return None
        return int(self._data[0, (self._n - 1) % self.capacity])


@dataclass(frozen=True)
class WindowSnapshot:
    indices: np.ndarray
    x: np.ndarray
    p: np.ndarray


def _as_snapshot(window) -> WindowSnapshot:
    if isinstance(window, WindowSnapshot):
        if window.x.size == 0:
            raise EstimationError("window is empty")
        return window
    return window.snapshot()


def kernel(u: np.ndarray, kind: str = "gaussian") -> np.ndarray:
    """Unit-bandwidth kernel ``K(u)`` integrating to one."""
    if kind == "gaussian":
        return np.exp(-0.5 * u * u) / SQRT_2PI
    if kind == "epanechnikov":
        return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    raise ValueError(f"unknown kernel {kind!r}")


def time_weights(indices: np.ndarray, t: int, h_t: float, kind: str = "gaussian") -> np.ndarray:
    """``K_{h_t}(j - t)`` for each window index ``j``."""
    return kernel((indices - t) / h_t, kind) / h_t


def _check_past(snap: WindowSnapshot, t: int) -> None:
    if np.any(snap.indices >= t):
        raise EstimationError(f"window contains indices at or after t={t}")


def silverman_bandwidths(window) -> tuple[float, float]:
    """Silverman's rule ``1.06 sd n^(-1/5)`` for the time and value axes.

    A degenerate (zero-variance) axis falls back to a bandwidth of 1.
    """
    snap = _as_snapshot(window)
    n = snap.x.size
    if n < 2:
        raise EstimationError("Silverman bandwidths need at least two observations")
    factor = 1.06 * n ** (-0.2)
    sd_x = float(np.std(snap.x, ddof=1))
    sd_idx = float(np.std(snap.indices, ddof=1))
    h_x = factor * sd_x if sd_x > 1e-12 * max(1.0, float(np.abs(snap.x).max())) else 1.0
    h_t = factor * sd_idx if sd_idx > 0 else 1.0
    return h_t, h_x


def _bandwidths(snap: WindowSnapshot, cfg: KernelConfig) -> tuple[float, float]:
    if cfg.h_t is not None and cfg.h_x is not None:
        return cfg.h_t, cfg.h_x
    h_t, h_x = silverman_bandwidths(snap)
    return (cfg.h_t or h_t), (cfg.h_x or h_x)


def estimate_density(window, t: int, x, cfg: KernelConfig):
    """Time-weighted kernel density of past values, evaluated at ``x``.

    ``x`` may be a scalar or an array; the result has the same shape.
    """
    snap = _as_snapshot(window)
    _check_past(snap, t)
    h_t, h_x = _bandwidths(snap, cfg)
    w = time_weights(snap.indices, t, h_t, cfg.kernel)
    total = w.sum()
    if not total > 0:
        raise EstimationError("time weights sum to zero; h_t too small for the window")
    return _density_at(snap.x, w / total, h_x, cfg.kernel, x)


def _density_at(xs: np.ndarray, weights: np.ndarray, h_x: float, kind: str, x):
    x = np.asarray(x, dtype=float)
    u = (xs[None, :] - x.reshape(-1, 1)) / h_x
    dens = kernel(u, kind) @ weights / h_x
    return dens.reshape(x.shape)[()]


def estimate_pi(window, t: int, tau: float, cfg: KernelConfig) -> float:
    """Kernel-weighted screening estimate of the non-null proportion at ``t``.

    Clamped into ``[0, 1 - 1e-10]``.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    snap = _as_snapshot(window)
    _check_past(snap, t)
    h_t, _ = _bandwidths(snap, cfg)
    w = time_weights(snap.indices, t, h_t, cfg.kernel)
    total = w.sum()
    if not total > 0:
        raise EstimationError("time weights sum to zero; h_t too small for the window")
    above = w[snap.p > tau].sum()
    raw = 1.0 - above / ((1.0 - tau) * total)
    return float(min(max(raw, 0.0), 1.0 - PI_EPS))


def select_tau_bh(window) -> float:
    """Largest p-value rejected by BH at level 0.5; 0.5 if none is rejected."""
    from .offline import bh_threshold

    if isinstance(window, (SlidingWindow, WindowSnapshot)):
        p = _as_snapshot(window).p
    else:
        p = np.asarray(window, dtype=float)
    if p.size == 0:
        raise EstimationError("window is empty")
    cut = bh_threshold(p, 0.5)
    if cut is None or not 0.0 < cut < 1.0:
        return 0.5
    return float(cut)


def plugin_clfdr(pi_hat: float, f0, f_hat):
    """``min{(1 - pi_hat) f0 / f_hat, 1}`` with ``f_hat`` floored at 1e-300."""
    ratio = (1.0 - pi_hat) * np.asarray(f0, dtype=float) / np.maximum(f_hat, DENSITY_FLOOR)
    return np.minimum(ratio, 1.0)[()]


def estimate_clfdr(window, x_t, null: NullParams, cfg: KernelConfig,
                   tau: TauPolicy = TauPolicy(), t: Optional[int] = None):
    """Plug-in Clfdr of ``x_t`` from the window alone.

    ``t`` defaults to one step after the newest window entry.
    """
    snap = _as_snapshot(window)
    if t is None:
        t = int(snap.indices[-1]) + 1
    return EstimatorState.fit(snap, t, null, cfg, tau).clfdr(x_t)


@dataclass
class EstimatorState:
    """Everything needed to score new points between refreshes.

    Holds the window snapshot plus the quantities fixed at refresh time
    (proportion, bandwidths, normalised time weights); the density at a new
    point is obtained by re-evaluating the kernel sum on the snapshot.
    """

    t: int
    pi_hat: float
    tau: float
    h_t: float
    h_x: float
    xs: np.ndarray
    weights: np.ndarray
    null: NullParams
    kind: str = "gaussian"

    @classmethod
    def fit(cls, window, t: int, null: NullParams, cfg: KernelConfig,
            tau: TauPolicy = TauPolicy()) -> "EstimatorState":
        snap = _as_snapshot(window)
        _check_past(snap, t)
        h_t, h_x = _bandwidths(snap, cfg)
        fixed = KernelConfig(cfg.kernel, h_t, h_x, cfg.d)
        tau_value = tau.resolve(snap)
        pi_hat = estimate_pi(snap, t, tau_value, fixed)
        w = time_weights(snap.indices, t, h_t, cfg.kernel)
        total = w.sum()
        if not total > 0:
            raise EstimationError("time weights sum to zero; h_t too small for the window")
        return cls(t, pi_hat, tau_value, h_t, h_x, snap.x.copy(), w / total, null, cfg.kernel)

    def density(self, x):
        return _density_at(self.xs, self.weights, self.h_x, self.kind, x)

    def clfdr(self, x):
        return plugin_clfdr(self.pi_hat, null_density(x, self.null), self.density(x))


@dataclass
class ClfdrEstimator:
    """Streaming plug-in Clfdr with periodic refresh of the estimator state.

    Feed every observation through :meth:`observe` after it has been scored;
    :meth:`clfdr` scores the next point using only earlier observations.
    """

    null: NullParams = field(default_factory=NullParams)
    cfg: KernelConfig = field(default_factory=KernelConfig)
    tau: TauPolicy = field(default_factory=TauPolicy)
    refresh: int = 10
    window: SlidingWindow = None
    state: Optional[EstimatorState] = None
    _since_refresh: int = 0

    def __post_init__(self):
        if self.refresh < 1:
            raise ValueError("refresh must be at least 1")
        if self.window is None:
            self.window = SlidingWindow(self.cfg.d)

    def observe(self, t: int, x: float, p: float) -> None:
        self.window.push(t, x, p)

    def _maybe_refresh(self, t: int) -> EstimatorState:
        if self.state is None or self._since_refresh >= self.refresh:
            self.state = EstimatorState.fit(self.window, t, self.null, self.cfg, self.tau)
            self._since_refresh = 0
        return self.state

    def clfdr(self, t: int, x: float) -> float:
        state = self._maybe_refresh(t)
        self._since_refresh += 1
        return float(state.clfdr(x))

    def score_sequence(self, t0: int, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
        """Score and then observe ``xs`` at times ``t0, t0+1, ...``.

        Produces exactly what alternating :meth:`clfdr` and :meth:`observe`
        would, but evaluates each refresh block in one vectorised call.
        """
        xs = np.asarray(xs, dtype=float)
        ps = np.asarray(ps, dtype=float)
        out = np.empty(xs.size)
        pos = 0
        while pos < xs.size:
            state = self._maybe_refresh(t0 + pos)
            n = min(self.refresh - self._since_refresh, xs.size - pos)
            out[pos:pos + n] = state.clfdr(xs[pos:pos + n])
            self._since_refresh += n
            for j in range(pos, pos + n):
                self.window.push(t0 + j, float(xs[j]), float(ps[j]))
            pos += n
        return out
