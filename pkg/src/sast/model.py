"""Two-group Gaussian mixture, Clfdr and p-value/z-score conversions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.stats import norm

DENSITY_FLOOR = 1e-300

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class NullParams:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not (self.sd > 0 and math.isfinite(self.sd)):
            raise ValueError(f"null sd must be positive, got {self.sd}")
        if not math.isfinite(self.mean):
            raise ValueError("null mean must be finite")

    def pdf(self, x: ArrayLike) -> ArrayLike:
        return null_density(x, self)


@dataclass(frozen=True)
class AltParams:
    mean: float
    sd: float = 1.0

    def __post_init__(self):
        if not (self.sd > 0 and math.isfinite(self.sd)):
            raise ValueError(f"alternative sd must be positive, got {self.sd}")

    def pdf(self, x: ArrayLike) -> ArrayLike:
        return norm.pdf(x, loc=self.mean, scale=self.sd)


@dataclass(frozen=True)
class MixtureParams:
    """Time-indexed model ``X_t ~ (1 - pi(t)) f0 + pi(t) f1``.

    ``pi`` maps a (1-based) time index to the non-null probability. ``alt``
    may be a fixed :class:`AltParams` or a callable returning one per time.
    """

    pi: Callable[[int], float]
    null: NullParams
    alt: Union[AltParams, Callable[[int], AltParams]]

    @classmethod
    def constant(cls, pi: float, mu: float, null: NullParams | None = None,
                 alt_sd: float = 1.0) -> "MixtureParams":
        if not 0.0 <= pi <= 1.0:
            raise ValueError(f"pi must lie in [0, 1], got {pi}")
        return cls(pi=lambda t: pi, null=null or NullParams(), alt=AltParams(mu, alt_sd))

    def pi_at(self, t: int) -> float:
        value = float(self.pi(t))
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"pi({t}) = {value} outside [0, 1]")
        return value

    def alt_at(self, t: int) -> AltParams:
        return self.alt if isinstance(self.alt, AltParams) else self.alt(t)

    def clfdr(self, t: int, x: float) -> float:
        return clfdr_oracle(x, self.pi_at(t), self.null, self.alt_at(t))


def _check_finite(x: ArrayLike, name: str = "x") -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")


def null_density(x: ArrayLike, null: NullParams) -> ArrayLike:
    """Gaussian null density, floored so it is strictly positive."""
    _check_finite(x)
    return np.maximum(norm.pdf(x, loc=null.mean, scale=null.sd), DENSITY_FLOOR)


def clfdr_from_densities(pi_t: ArrayLike, f0: ArrayLike, f1: ArrayLike) -> ArrayLike:
    """``(1 - pi) f0 / ((1 - pi) f0 + pi f1)`` clamped into [0, 1].

    ``pi_t`` may be an array aligned with the densities; ``pi = 0`` gives
    exactly 1 and ``pi = 1`` exactly 0.
    """
    pi = np.asarray(pi_t, dtype=float)
    if np.any(~((pi >= 0.0) & (pi <= 1.0))):
        raise ValueError("pi_t must lie in [0, 1]")
    num = (1.0 - pi) * np.asarray(f0, dtype=float)
    denom = num + pi * np.asarray(f1, dtype=float)
    if np.any((denom <= 0) & (pi > 0) & (pi < 1)):
        raise ValueError("both null and alternative densities vanish")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.clip(num / denom, 0.0, 1.0)
    return np.where(pi == 0.0, 1.0, np.where(pi == 1.0, 0.0, ratio))[()]


def clfdr_oracle(x: ArrayLike, pi_t: float, null: NullParams,
                 alt: Union[AltParams, Callable[[ArrayLike], ArrayLike]]) -> ArrayLike:
    """Conditional local fdr of ``x`` under a known mixture.

    ``alt`` may be an :class:`AltParams` or any density callable. Both
    densities are floored at 1e-300 so the ratio is always defined.
    """
    _check_finite(x)
    f0 = null_density(x, null)
    f1_fn = alt.pdf if isinstance(alt, AltParams) else alt
    f1 = np.maximum(np.asarray(f1_fn(x), dtype=float), DENSITY_FLOOR)
    return clfdr_from_densities(pi_t, f0, f1)


def z_to_pvalue(z: ArrayLike, null: NullParams = NullParams()) -> ArrayLike:
    """Two-sided p-value of ``z`` after standardising by the null."""
    _check_finite(z, "z")
    u = np.abs((np.asarray(z, dtype=float) - null.mean) / null.sd)
    return np.minimum(2.0 * norm.sf(u), 1.0)[()]


def p_to_z_randomized(p: ArrayLike, coin: ArrayLike) -> ArrayLike:
    """Map a two-sided p-value to a z-score with a coin-chosen sign.

    ``coin == 1`` gives the positive root, ``coin == 0`` the negative one.
    """
    p = np.asarray(p, dtype=float)
    coin = np.asarray(coin)
    if np.any(~np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
        raise ValueError("p-values must lie in (0, 1]")
    if np.any((coin != 0) & (coin != 1)):
        raise ValueError("coin must be 0 or 1")
    magnitude = -norm.ppf(p / 2.0)
    return np.where(coin == 1, magnitude, -magnitude)[()]
