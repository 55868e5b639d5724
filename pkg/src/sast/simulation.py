"""Synthetic streams, online FDR/MDR evaluation and the replication runner."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import baselines
from .engine import run_sast
from .estimators import ClfdrEstimator, KernelConfig, TauPolicy
from .model import NullParams, clfdr_from_densities, z_to_pvalue
from .offline import bh, clfdr_stepwise, gap_weights, sabha_weights, weighted_bh
from scipy.stats import norm


class ConfigError(ValueError):
    pass


# --- signal-proportion patterns ------------------------------------------------

@dataclass(frozen=True)
class Constant:
    pi: float

    def values(self, m: int) -> np.ndarray:
        return np.full(m, float(self.pi))


@dataclass(frozen=True)
class Linear:
    lo: float = 0.0
    hi: float = 0.5

    def values(self, m: int) -> np.ndarray:
        if m == 1:
            return np.array([self.lo], dtype=float)
        return self.lo + (self.hi - self.lo) * np.arange(m) / (m - 1)


@dataclass(frozen=True)
class Sine:
    """``pi_t = (sin(2 pi t / m) + 1) / 4``."""

    def values(self, m: int) -> np.ndarray:
        t = np.arange(1, m + 1)
        return (np.sin(2.0 * math.pi * t / m) + 1.0) / 4.0


@dataclass(frozen=True)
class Block:
    """Piecewise-constant pattern over half-open ranges ``(start, end]``.

    Times covered by no segment take ``default``.
    """

    segments: tuple
    default: float = 0.0

    def __post_init__(self):
        spans = sorted((float(a), float(b)) for a, b, _ in self.segments)
        for (a, b) in spans:
            if not a < b:
                raise ConfigError(f"empty block segment ({a}, {b}]")
        for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
            if a1 < b0:
                raise ConfigError(f"block segments ({a0}, {b0}] and ({a1}, {b1}] overlap")

    def values(self, m: int) -> np.ndarray:
        t = np.arange(1, m + 1)
        out = np.full(m, float(self.default))
        for a, b, pi in self.segments:
            out[(t > a) & (t <= b)] = pi
        return out


@dataclass(frozen=True)
class Custom:
    fn: Callable[[int], float]

    def values(self, m: int) -> np.ndarray:
        return np.array([self.fn(t) for t in range(1, m + 1)], dtype=float)


def pattern_values(pattern, m: int) -> np.ndarray:
    values = np.asarray(pattern.values(m), dtype=float)
    if np.any((values < 0) | (values > 1)):
        raise ConfigError("pattern produces proportions outside [0, 1]")
    return values


def pi_pattern_value(pattern, t: int, m: int) -> float:
    if not 1 <= t <= m:
        raise ValueError(f"t={t} outside [1, {m}]")
    return float(pattern_values(pattern, m)[t - 1])


SETTING1_BLOCKS = Block(
    segments=((1000, 1200, 0.6), (2000, 2200, 0.6), (3000, 3200, 0.8), (4000, 4200, 0.8)),
    default=0.01,
)
WEIGHTING_BLOCKS = Block(
    segments=((1000, 1150, 0.5), (2000, 2150, 0.5), (3000, 3100, 0.5), (4000, 4150, 0.5)),
    default=0.01,
)


def setting_pattern(number: int):
    """Proportion pattern of simulation setting 1 (block), 2 (constant), 3 (linear) or 4 (sine)."""
    patterns = {1: SETTING1_BLOCKS, 2: Constant(0.05), 3: Linear(0.0, 0.5), 4: Sine()}
    try:
        return patterns[number]
    except KeyError:
        raise ConfigError(f"unknown setting {number}") from None


# --- configuration -------------------------------------------------------------

def default_checkpoints(m: int) -> list[int]:
    points = list(range(1500, m + 1, 500))
    return points or [m]


@dataclass
class SimConfig:
    m: int = 5000
    mu: float = 3.0
    alpha: float = 0.05
    pattern: object = field(default_factory=lambda: Constant(0.05))
    reps: int = 200
    seed: int = 0
    burn_in: int = 500
    refresh: int = 10
    d: int = 1000
    checkpoints: Optional[list] = None
    tau: TauPolicy = field(default_factory=TauPolicy.bh)
    gamma_kind: str = "inverse_square"
    w0: Optional[float] = None
    kernel: KernelConfig = None

    @property
    def kernel_config(self) -> KernelConfig:
        if self.kernel is None:
            return KernelConfig(d=self.d)
        k = self.kernel
        return KernelConfig(k.kernel, k.h_t, k.h_x, self.d)

    def __post_init__(self):
        if self.checkpoints is None:
            self.checkpoints = default_checkpoints(self.m)
        self.validate()

    def validate(self) -> None:
        if self.m < 1:
            raise ConfigError("m must be positive")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be non-negative")
        if self.refresh < 1:
            raise ConfigError("refresh must be positive")
        if self.d < 2:
            raise ConfigError("d must be at least 2")
        if not self.checkpoints or any(not 1 <= int(c) <= self.m for c in self.checkpoints):
            raise ConfigError(f"checkpoints must lie in [1, {self.m}]")
        pattern_values(self.pattern, self.m)


# --- streams -------------------------------------------------------------------

@dataclass
class Stream:
    """One simulated replication; the first ``burn_in`` entries are burn-in."""

    theta: np.ndarray
    x: np.ndarray
    pi: np.ndarray
    burn_in: int

    @property
    def main(self) -> slice:
        return slice(self.burn_in, None)

    @property
    def pvalues(self) -> np.ndarray:
        return z_to_pvalue(self.x)


def rep_seed(seed: int, rep: int) -> np.random.SeedSequence:
    """Independent child seed for replication ``rep``, whatever the execution order."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(rep,))


def generate_stream(cfg: SimConfig, seed) -> Stream:
    rng = np.random.default_rng(seed)
    pi_main = pattern_values(cfg.pattern, cfg.m)
    pi = np.concatenate([np.full(cfg.burn_in, pi_main[0]), pi_main])
    theta = rng.random(pi.size) < pi
    noise = rng.standard_normal(pi.size)
    x = noise + cfg.mu * theta
    return Stream(theta.astype(np.int8), x, pi, cfg.burn_in)


# --- evaluation ----------------------------------------------------------------

def evaluate(decisions, theta, checkpoints: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """False and missed discovery proportions over the first ``t`` hypotheses per checkpoint."""
    delta = np.asarray(decisions).astype(bool)
    th = np.asarray(theta).astype(bool)
    if delta.shape != th.shape:
        raise ValueError(f"decisions ({delta.size}) and theta ({th.size}) lengths differ")
    idx = np.asarray(checkpoints, dtype=int) - 1
    if np.any(idx < 0) or np.any(idx >= delta.size):
        raise ValueError("checkpoint outside the stream")
    rejections = np.cumsum(delta)[idx]
    false_rej = np.cumsum(delta & ~th)[idx]
    signals = np.cumsum(th)[idx]
    true_rej = np.cumsum(delta & th)[idx]
    fdp = false_rej / np.maximum(rejections, 1)
    mdp = np.where(signals > 0, 1.0 - true_rej / np.maximum(signals, 1), 0.0)
    return fdp, mdp


@dataclass
class EvalCurve:
    checkpoints: list
    fdr: np.ndarray
    mdr: np.ndarray
    stderr_fdr: np.ndarray
    stderr_mdr: np.ndarray
    fdp_reps: np.ndarray = None
    mdp_reps: np.ndarray = None

    @classmethod
    def from_reps(cls, checkpoints, fdp: np.ndarray, mdp: np.ndarray) -> "EvalCurve":
        n = fdp.shape[0]
        se = (lambda a: a.std(axis=0, ddof=1) / math.sqrt(n)) if n > 1 else (lambda a: np.zeros(a.shape[1]))
        return cls(list(checkpoints), fdp.mean(axis=0), mdp.mean(axis=0), se(fdp), se(mdp), fdp, mdp)

    def at(self, t: int) -> dict:
        i = self.checkpoints.index(t)
        return {"fdr": self.fdr[i], "mdr": self.mdr[i],
                "stderr_fdr": self.stderr_fdr[i], "stderr_mdr": self.stderr_mdr[i]}


# --- methods -------------------------------------------------------------------

METHODS = ("sast-or", "sast-or-nob", "sast-dd", "sast-dd-nob", "lond", "lordpp", "fixed")


def parse_method(method: str) -> tuple[str, Optional[float]]:
    """``"fixed:0.001"`` -> ``("fixed", 0.001)``; other ids carry no argument."""
    name, _, arg = method.partition(":")
    if name not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    if name == "fixed":
        try:
            return name, float(arg) if arg else 1e-4
        except ValueError:
            raise ConfigError(f"bad fixed threshold in {method!r}") from None
    if arg:
        raise ConfigError(f"method {name!r} takes no argument")
    return name, None


def oracle_clfdrs(stream: Stream, cfg: SimConfig) -> np.ndarray:
    x = stream.x[stream.main]
    pi = stream.pi[stream.main]
    return clfdr_from_densities(pi, norm.pdf(x), norm.pdf(x, loc=cfg.mu))


def datadriven_clfdrs(stream: Stream, cfg: SimConfig, null: NullParams = NullParams()) -> np.ndarray:
    if cfg.burn_in < 2:
        raise ConfigError("the data-driven rule needs a burn-in of at least 2 observations")
    est = ClfdrEstimator(null, cfg.kernel_config, cfg.tau, cfg.refresh)
    p = stream.pvalues
    for i in range(cfg.burn_in):
        est.observe(i - cfg.burn_in + 1, float(stream.x[i]), float(p[i]))
    return est.score_sequence(1, stream.x[stream.main], p[stream.main])


def run_method(method: str, stream: Stream, cfg: SimConfig, cache: Optional[dict] = None,
               check_invariant: bool = False) -> np.ndarray:
    """Decisions of one method on the main (post burn-in) part of ``stream``."""
    name, arg = parse_method(method)
    cache = {} if cache is None else cache
    if name.startswith("sast"):
        kind = "or" if name.startswith("sast-or") else "dd"
        if kind not in cache:
            cache[kind] = oracle_clfdrs(stream, cfg) if kind == "or" else datadriven_clfdrs(stream, cfg)
        decisions, _ = run_sast(cache[kind], cfg.alpha, cfg.d, use_barrier=not name.endswith("nob"),
                                check_invariant=check_invariant)
        return decisions
    p = stream.pvalues[stream.main]
    if name == "lond":
        return baselines.run_lond(p, cfg.alpha, baselines.GammaSequence(cfg.gamma_kind))
    if name == "lordpp":
        return baselines.run_lordpp(p, cfg.alpha, baselines.GammaSequence(cfg.gamma_kind), cfg.w0)
    return baselines.run_fixed(p, arg)


def _one_replication(args) -> dict:
    cfg, methods, rep, check = args
    stream = generate_stream(cfg, rep_seed(cfg.seed, rep))
    theta = stream.theta[stream.main]
    cache: dict = {}
    return {m: evaluate(run_method(m, stream, cfg, cache, check), theta, cfg.checkpoints)
            for m in methods}


def run_replications(cfg: SimConfig, methods: Sequence[str], workers: int = 1,
                     check_invariant: bool = False) -> dict:
    """Average FDP/MDP curves per method over ``cfg.reps`` replications.

    Every method sees the same stream within a replication. Results do not
    depend on ``workers``. ``check_invariant`` asserts the SAST budget
    condition after every step.
    """
    if not methods:
        raise ConfigError("at least one method is required")
    for m in methods:
        parse_method(m)
    jobs = [(cfg, list(methods), rep, check_invariant) for rep in range(cfg.reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one_replication, jobs))
    else:
        results = [_one_replication(job) for job in jobs]
    curves = {}
    for m in methods:
        fdp = np.array([r[m][0] for r in results])
        mdp = np.array([r[m][1] for r in results])
        curves[m] = EvalCurve.from_reps(cfg.checkpoints, fdp, mdp)
    return curves


# --- offline weighting comparison ------------------------------------------------

OFFLINE_METHODS = ("bh", "sabha", "gap", "clfdr")


def offline_comparison(m: int = 5000, mu: float = 2.5, alpha: float = 0.05, reps: int = 200,
                       seed: int = 0, pattern=WEIGHTING_BLOCKS) -> dict:
    """Per-replication FDP and power of the offline rules with known parameters.

    Returns ``{method: (fdp array, power array)}`` over replications.
    """
    cfg = SimConfig(m=m, mu=mu, alpha=alpha, pattern=pattern, reps=reps, seed=seed, burn_in=0,
                    checkpoints=[m])
    out = {k: ([], []) for k in OFFLINE_METHODS}
    for rep in range(reps):
        stream = generate_stream(cfg, rep_seed(seed, rep))
        x, pi, theta = stream.x, stream.pi, stream.theta.astype(bool)
        p = stream.pvalues
        clfdr = clfdr_from_densities(pi, norm.pdf(x), norm.pdf(x, loc=mu))
        rejected = {
            "bh": bh(p, alpha),
            "sabha": weighted_bh(p, sabha_weights(pi), alpha),
            "gap": weighted_bh(p, gap_weights(pi), alpha),
            "clfdr": clfdr_stepwise(clfdr, alpha).rejections,
        }
        for name, rej in rejected.items():
            delta = np.zeros(m, dtype=bool)
            delta[list(rej)] = True
            fdp, mdp = evaluate(delta, theta, [m])
            out[name][0].append(fdp[0])
            out[name][1].append(1.0 - mdp[0])
    return {k: (np.array(v[0]), np.array(v[1])) for k, v in out.items()}
