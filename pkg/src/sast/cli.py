"""Command-line entry points.

    sast simulate CONFIG.json [--out FILE] [--seed N] [--reps N] [--workers N]
    sast stream --method sast-dd [--alpha A] [--input z|p] ... < index,value lines
    sast gamma-or --pi P --mu MU --alpha A [--samples N] [--seed N]

Exit codes: 0 ok, 2 configuration error, 3 runtime or data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Optional, TextIO

import numpy as np

from . import baselines
from .engine import DataDrivenSast, SastState, step
from .estimators import KernelConfig, TauPolicy
from .model import MixtureParams, NullParams, p_to_z_randomized, z_to_pvalue
from .offline import OracleThresholdUndefined, oracle_threshold_with_stderr
from .simulation import (Block, ConfigError, Constant, Linear, Sine, SimConfig,
                         parse_method, pattern_values, run_replications, setting_pattern)


EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

CONFIG_FIELDS = {
    "m", "mu", "alpha", "pattern", "reps", "seed", "burn_in", "refresh", "d", "checkpoints",
    "tau", "gamma_sequence", "w0", "kernel", "h_t", "h_x", "methods", "workers",
}


def _fmt(value: float, precision: int) -> str:
    return f"{value:.{precision}g}"


# --- config parsing ------------------------------------------------------------

def parse_pattern(raw) -> object:
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("pattern: expected an object with a 'kind' field")
    kind = raw["kind"]
    try:
        if kind == "constant":
            return Constant(float(raw["pi"]))
        if kind == "linear":
            return Linear(float(raw.get("lo", 0.0)), float(raw.get("hi", 0.5)))
        if kind == "sine":
            return Sine()
        if kind == "block":
            segments = tuple((float(a), float(b), float(v)) for a, b, v in raw["segments"])
            return Block(segments, float(raw.get("default", 0.0)))
        if kind == "setting":
            return setting_pattern(int(raw["number"]))
    except KeyError as exc:
        raise ConfigError(f"pattern: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"pattern: {exc}") from None
    raise ConfigError(f"pattern.kind: unknown pattern kind {kind!r}")


def parse_tau(value) -> TauPolicy:
    if value in (None, "bh"):
        return TauPolicy.bh()
    try:
        return TauPolicy("fixed", float(value))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"tau: {exc}") from None


def load_config(raw: dict) -> tuple[SimConfig, list, int]:
    """Validate a JSON config; returns the config, the methods and the worker count."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    unknown = set(raw) - CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown config field")
    methods = raw.get("methods", ["sast-or", "sast-dd", "lond", "lordpp"])
    if not isinstance(methods, list) or not methods:
        raise ConfigError("methods: expected a non-empty list")
    for method in methods:
        try:
            parse_method(str(method))
        except ConfigError as exc:
            raise ConfigError(f"methods: {exc}") from None
    kwargs = {}
    for name, cast in (("m", int), ("mu", float), ("alpha", float), ("reps", int),
                       ("seed", int), ("burn_in", int), ("refresh", int), ("d", int)):
        if name in raw:
            try:
                kwargs[name] = cast(raw[name])
            except (TypeError, ValueError):
                raise ConfigError(f"{name}: expected a number, got {raw[name]!r}") from None
    if "pattern" in raw:
        kwargs["pattern"] = parse_pattern(raw["pattern"])
    if "checkpoints" in raw:
        if not isinstance(raw["checkpoints"], list):
            raise ConfigError("checkpoints: expected a list of integers")
        try:
            kwargs["checkpoints"] = [int(c) for c in raw["checkpoints"]]
        except (TypeError, ValueError):
            raise ConfigError("checkpoints: expected a list of integers") from None
    kwargs["tau"] = parse_tau(raw.get("tau"))
    kwargs["gamma_kind"] = raw.get("gamma_sequence", "inverse_square")
    if kwargs["gamma_kind"] not in ("inverse_square", "log"):
        raise ConfigError(f"gamma_sequence: unknown sequence {kwargs['gamma_kind']!r}")
    if raw.get("w0") is not None:
        try:
            kwargs["w0"] = float(raw["w0"])
        except (TypeError, ValueError):
            raise ConfigError(f"w0: expected a number, got {raw['w0']!r}") from None
    try:
        kwargs["kernel"] = KernelConfig(raw.get("kernel", "gaussian"), raw.get("h_t"), raw.get("h_x"))
    except ValueError as exc:
        raise ConfigError(f"kernel: {exc}") from None
    try:
        cfg = SimConfig(**kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        workers = int(raw.get("workers", 1))
    except (TypeError, ValueError):
        raise ConfigError(f"workers: expected an integer, got {raw['workers']!r}") from None
    return cfg, methods, workers


def write_results(curves: dict, out: TextIO, precision: int = 6) -> None:
    out.write("method,t,fdr,mdr,stderr_fdr,stderr_mdr\n")
    for method, curve in curves.items():
        for i, t in enumerate(curve.checkpoints):
            vals = (curve.fdr[i], curve.mdr[i], curve.stderr_fdr[i], curve.stderr_mdr[i])
            out.write(f"{method},{t}," + ",".join(_fmt(v, precision) for v in vals) + "\n")


def cmd_simulate(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.reps is not None:
        raw["reps"] = args.reps
    try:
        cfg, methods, workers = load_config(raw)
        if args.workers is not None:
            workers = args.workers
        curves = run_replications(cfg, methods, workers)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.out:
        with open(args.out, "w") as fh:
            write_results(curves, fh, args.precision)
    else:
        write_results(curves, sys.stdout, args.precision)
    return EXIT_OK


# --- streaming -----------------------------------------------------------------

class _PValueRule:
    """Adapts a p-value baseline to the streaming protocol."""

    def __init__(self, method: str, alpha: float, gamma_kind: str, w0: Optional[float],
                 threshold: float):
        self.method = method
        self.alpha = alpha
        self.gamma = baselines.GammaSequence(gamma_kind)
        self.w0 = alpha / 2 if w0 is None else w0
        self.threshold = threshold
        self.state = baselines.BaselineState()

    def level(self) -> float:
        t = self.state.t + 1
        if self.method == "lond":
            return baselines.lond_level(self.state, t, self.alpha, self.gamma)
        if self.method == "lordpp":
            return baselines.lordpp_level(self.state, t, self.alpha, self.gamma, self.w0)
        return self.threshold

    def decide(self, p: float) -> tuple[float, bool]:
        level = self.level()
        if self.method == "lond":
            reject = baselines.lond_step(self.state, p, self.alpha, self.gamma)
        elif self.method == "lordpp":
            reject = baselines.lordpp_step(self.state, p, self.alpha, self.gamma, self.w0)
        else:
            reject = baselines.fixed_threshold_step(p, self.threshold)
        return level, reject


def load_model(path: str, null: NullParams) -> MixtureParams:
    with open(path) as fh:
        raw = json.load(fh)
    mu = float(raw["mu"])
    alt_sd = float(raw.get("alt_sd", 1.0))
    if "pattern" in raw:
        m = int(raw["m"])
        values = pattern_values(parse_pattern(raw["pattern"]), m)
        pi = lambda t: float(values[min(max(t, 1), m) - 1])
        return dataclasses.replace(MixtureParams.constant(0.0, mu, null, alt_sd), pi=pi)
    return MixtureParams.constant(float(raw["pi"]), mu, null, alt_sd)


def _parse_line(line: str) -> tuple[str, float]:
    index, value = line.split(",")
    v = float(value)
    if not np.isfinite(v):
        raise ValueError(f"non-finite value {value.strip()!r}")
    return index.strip(), v


def cmd_stream(args, stdin: TextIO = None, stdout: TextIO = None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    prec = args.precision
    is_p = args.input == "p"
    # z-scores recovered from p-values are standard normal under the null
    null = NullParams() if is_p else NullParams(args.null_mean, args.null_sd)
    rng = np.random.default_rng(args.seed)
    try:
        tau = parse_tau(args.tau)
        if args.method == "sast-dd":
            engine = DataDrivenSast(args.alpha, null, KernelConfig(d=args.d), tau,
                                    args.burn_in, args.refresh)
        elif args.method == "sast-or":
            if not args.model:
                raise ConfigError("--model is required for sast-or")
            params = load_model(args.model, null)
            state = SastState(args.alpha, args.d)
        else:
            rule = _PValueRule(args.method, args.alpha, args.gamma_sequence, args.w0,
                               args.fixed_threshold)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    while True:
        line = stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        try:
            index, value = _parse_line(line)
            if is_p:
                if not 0.0 < value <= 1.0:
                    raise ValueError(f"p-value {value} outside (0, 1]")
                p = value
                z = float(p_to_z_randomized(p, int(rng.random() < 0.5)))
            else:
                z = value
                p = float(z_to_pvalue(z, null))
        except ValueError as exc:
            head = line.split(",", 1)
            stdout.write(f"{head[0]},{head[1] if len(head) > 1 else ''},,,error\n")
            stdout.flush()
            print(f"warning: skipped line {line!r}: {exc}", file=sys.stderr)
            continue

        if args.method == "sast-dd":
            if not engine.ready:
                engine.observe_burn_in(z, p)
                continue
            rec = engine.step(z, p)
            stat, barrier, reject = rec.clfdr, rec.barrier, rec.reject
        elif args.method == "sast-or":
            rec = step(state, float(params.clfdr(state.t + 1, z)), z)
            stat, barrier, reject = rec.clfdr, rec.barrier, rec.reject
        else:
            stat = p
            barrier, reject = rule.decide(p)
        stdout.write(f"{index},{value!r},{_fmt(stat, prec)},{_fmt(barrier, prec)},"
                     f"{'reject' if reject else 'accept'}\n")
        stdout.flush()
    return EXIT_OK


def cmd_gamma_or(args) -> int:
    try:
        params = MixtureParams.constant(args.pi, args.mu)
        gamma, stderr = oracle_threshold_with_stderr(params, args.alpha, args.samples, args.seed)
    except OracleThresholdUndefined as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"gamma_or={gamma:.4f} stderr={stderr:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sast", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run replicated simulations from a JSON config")
    sim.add_argument("config")
    sim.add_argument("--out")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--reps", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--precision", type=int, default=6)
    sim.set_defaults(func=cmd_simulate)

    st = sub.add_parser("stream", help="make online decisions on index,value lines from stdin")
    st.add_argument("--method", choices=["sast-dd", "sast-or", "lond", "lordpp", "fixed"],
                    default="sast-dd")
    st.add_argument("--alpha", type=float, default=0.05)
    st.add_argument("--input", choices=["z", "p"], default="z")
    st.add_argument("--null-mean", type=float, default=0.0)
    st.add_argument("--null-sd", type=float, default=1.0)
    st.add_argument("--d", type=int, default=1000)
    st.add_argument("--burn-in", type=int, default=500)
    st.add_argument("--refresh", type=int, default=10)
    st.add_argument("--tau", default="bh", help="'bh' or a fixed screening threshold")
    st.add_argument("--model", help="JSON model file (required for sast-or)")
    st.add_argument("--gamma-sequence", choices=["inverse_square", "log"],
                    default="inverse_square")
    st.add_argument("--w0", type=float)
    st.add_argument("--fixed-threshold", type=float, default=1e-4)
    st.add_argument("--seed", type=int, default=0, help="seed for p-to-z sign coins")
    st.add_argument("--precision", type=int, default=6)
    st.set_defaults(func=cmd_stream)

    g = sub.add_parser("gamma-or", help="oracle Clfdr threshold of a constant mixture")
    g.add_argument("--pi", type=float, required=True)
    g.add_argument("--mu", type=float, required=True)
    g.add_argument("--alpha", type=float, default=0.05)
    g.add_argument("--samples", type=int, default=4_000_000)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gamma_or)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
