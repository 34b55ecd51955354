"""Command-line harness: ``ubgd run|compare|check|list``.

Exit codes: 0 for CriticalPoint/MaxIters (and successful compare/check),
2 for a diverging run, 3 for a numerical failure, 1 for a failed check and
64 for a bad config or unknown name.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import LineSearchParams, Mode, Termination, Trace, as_vector
from .corpus import corpus_list, get_entry, gradient_check, lipschitz_audit
from .diagnostics import audit, compare, distance_below, norm_below
from .drivers import Backtracking, Hybrid, RunConfig, Standard, TwoWay, Unbounded, run
from .growth import GrowthFunction

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "CSV_COLUMNS",
    "EXIT_OK",
    "EXIT_DIVERGED",
    "EXIT_NUMERICAL",
    "EXIT_CHECK_FAILED",
    "EXIT_USAGE",
    "load_config",
    "parse_scheme",
    "write_trace_csv",
    "read_trace_csv",
    "cmd_run",
    "cmd_compare",
    "cmd_check",
    "cmd_list",
    "main",
]

log = logging.getLogger("ubgd")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_DIVERGED = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64

CSV_COLUMNS = ("iter", "f", "grad_norm", "delta", "delta_exponent", "step_norm",
               "n_value_evals", "n_grad_evals", "mode")
FD_LIMIT = 1e-5
CRITICAL_LIMIT = 1e-12

_KNOWN_KEYS = {
    "objective", "x0", "scheme", "alpha", "beta", "delta0", "grad_tol", "max_halvings",
    "N", "guard", "delta", "growth", "max_iters", "divergence_x_threshold",
    "divergence_f_threshold", "seeds", "output", "target", "schemes",
}


class ConfigError(ValueError):
    """Invalid experiment config; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str
    x0: Optional[np.ndarray]
    scheme: object
    params: LineSearchParams
    max_iters: int
    seeds: Optional[tuple[int, ...]]
    output: Path
    divergence_x_threshold: float = 1e8
    divergence_f_threshold: float = -1e12
    target: Optional[dict] = None
    raw: Optional[dict] = None

    def starts(self) -> list[tuple[Optional[int], np.ndarray]]:
        """``(seed, x0)`` pairs; seeds sample uniformly from the objective's test box."""
        if self.seeds is None:
            return [(None, self.x0)]
        entry = get_entry(self.objective)
        return [(s, entry.sample(np.random.default_rng(s))) for s in self.seeds]

    def run_config(self, x0, scheme=None) -> RunConfig:
        return RunConfig(scheme or self.scheme, x0, self.params, self.max_iters,
                         self.divergence_x_threshold, self.divergence_f_threshold)


_HYBRID = re.compile(r"^hybrid(?:\((?:n=)?(\d+)\)|:(\d+))?$")
_STANDARD = re.compile(r"^standard(?:\((?:delta=)?([^)]+)\)|:(.+))?$")


def parse_scheme(text: str, cfg: Optional[dict] = None):
    """Scheme from a name: ``backtracking``, ``unbounded``, ``twoway``,
    ``hybrid``/``hybrid:5``/``hybrid(N=5)``, ``standard``/``standard:0.1``.

    Missing numbers come from ``cfg`` (keys ``N``, ``guard``, ``delta``,
    ``delta0``, ``growth``).
    """
    cfg = cfg or {}
    name = text.strip().lower()
    if name == "backtracking":
        return Backtracking()
    if name == "twoway":
        return TwoWay()
    if name == "unbounded":
        growth = cfg.get("growth")
        if growth is None:
            return Unbounded()
        try:
            return Unbounded(GrowthFunction.from_config(growth))
        except (TypeError, ValueError) as exc:
            raise ConfigError("growth", str(exc)) from None
    m = _HYBRID.match(name)
    if m:
        n = m.group(1) or m.group(2)
        try:
            return Hybrid(int(n) if n else int(cfg.get("N", 1)), cfg.get("guard", "armijo"))
        except (TypeError, ValueError) as exc:
            raise ConfigError("N", str(exc)) from None
    m = _STANDARD.match(name)
    if m:
        d = m.group(1) or m.group(2)
        try:
            return Standard(float(d) if d else float(cfg.get("delta", cfg.get("delta0", 1.0))))
        except (TypeError, ValueError) as exc:
            raise ConfigError("delta", str(exc)) from None
    raise ConfigError("scheme", f"unknown scheme {text!r}")


def _number(raw, key, kind=float, default=None):
    if key not in raw:
        return default
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(key, f"expected an integer, got {value!r}")
    return kind(value)


def load_config(path, require_scheme: bool = True) -> ExperimentConfig:
    """Read and validate a flat JSON experiment config."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("<file>", "top level must be a JSON object")
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")

    name = raw.get("objective")
    if not isinstance(name, str):
        raise ConfigError("objective", "missing or not a string")
    try:
        entry = get_entry(name)
    except KeyError as exc:
        raise ConfigError("objective", exc.args[0]) from None

    seeds = raw.get("seeds")
    x0 = None
    if seeds is not None:
        if "x0" in raw:
            raise ConfigError("seeds", "give either x0 or seeds, not both")
        if not isinstance(seeds, list) or not seeds or not all(
                isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
            raise ConfigError("seeds", "expected a non-empty list of non-negative integers")
        seeds = tuple(seeds)
    else:
        if "x0" not in raw:
            raise ConfigError("x0", "missing (or give seeds)")
        try:
            x0 = as_vector(raw["x0"], entry.dim)
        except (TypeError, ValueError) as exc:
            raise ConfigError("x0", str(exc)) from None

    try:
        params = LineSearchParams(
            alpha=_number(raw, "alpha", default=0.5),
            beta=_number(raw, "beta", default=0.5),
            delta0=_number(raw, "delta0", default=1.0),
            grad_tol=_number(raw, "grad_tol", default=1e-10),
            max_halvings=_number(raw, "max_halvings", int, default=200),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        key = str(exc).split(" ", 1)[0]
        raise ConfigError(key if key in _KNOWN_KEYS else "params", str(exc)) from None

    scheme = None
    if require_scheme:
        if not isinstance(raw.get("scheme"), str):
            raise ConfigError("scheme", "missing or not a string")
        scheme = parse_scheme(raw["scheme"], raw)

    max_iters = _number(raw, "max_iters", int, default=100_000)
    env = os.environ.get("UBGD_MAX_ITERS")
    if env is not None:
        try:
            max_iters = int(env)
        except ValueError:
            raise ConfigError("UBGD_MAX_ITERS", f"not an integer: {env!r}") from None
    if max_iters < 0:
        raise ConfigError("max_iters", "must be non-negative")

    div_x = _number(raw, "divergence_x_threshold", default=1e8)
    if not div_x > 0:
        raise ConfigError("divergence_x_threshold", "must be positive")
    div_f = _number(raw, "divergence_f_threshold", default=-1e12)

    output = raw.get("output")
    if not isinstance(output, str) or not output:
        raise ConfigError("output", "missing or not a string")
    target = raw.get("target")
    if target is not None:
        _target_predicate(target)

    return ExperimentConfig(name, x0, scheme, params, max_iters, seeds, Path(output),
                            div_x, div_f, target, raw)


def _target_predicate(spec):
    """``{"type": "norm_below", "tol": t}`` or ``{"type": "distance_below", "point": [...], "tol": t}``."""
    if not isinstance(spec, dict):
        raise ConfigError("target", "expected an object")
    kind = spec.get("type", "norm_below")
    tol = spec.get("tol")
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not tol > 0:
        raise ConfigError("target", "tol must be a positive number")
    if kind == "norm_below":
        return norm_below(float(tol))
    if kind == "distance_below":
        try:
            return distance_below(as_vector(spec.get("point")), float(tol))
        except (TypeError, ValueError) as exc:
            raise ConfigError("target", f"bad point: {exc}") from None
    raise ConfigError("target", f"unknown target type {kind!r}")


def _fmt(v: float) -> str:
    return format(v, ".17g")


def write_trace_csv(trace: Trace, path) -> None:
    """One row per step with floats printed to 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in trace.records:
            w.writerow([
                rec.iter, _fmt(rec.f_val), _fmt(rec.grad_norm), _fmt(rec.delta),
                "" if rec.exponent is None else rec.exponent, _fmt(rec.step_norm),
                rec.n_value_evals, rec.n_grad_evals, rec.mode.value,
            ])


def read_trace_csv(path) -> list[dict]:
    """Parse a trace CSV back into typed rows."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        for r in reader:
            rows.append({
                "iter": int(r["iter"]),
                "f": float(r["f"]),
                "grad_norm": float(r["grad_norm"]),
                "delta": float(r["delta"]),
                "delta_exponent": None if r["delta_exponent"] == "" else int(r["delta_exponent"]),
                "step_norm": float(r["step_norm"]),
                "n_value_evals": int(r["n_value_evals"]),
                "n_grad_evals": int(r["n_grad_evals"]),
                "mode": Mode(r["mode"]),
            })
    return rows


def _audit_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".audit.json")


def _seeded_path(path: Path, seed: Optional[int]) -> Path:
    if seed is None:
        return path
    return path.with_name(f"{path.stem}.seed{seed}{path.suffix}")


def _exit_code(termination: Termination) -> int:
    if termination in (Termination.DIVERGING_F, Termination.DIVERGING_X):
        return EXIT_DIVERGED
    if termination is Termination.NUMERICAL_FAILURE:
        return EXIT_NUMERICAL
    return EXIT_OK


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def cmd_run(config_path) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code = EXIT_OK
    for seed, x0 in cfg.starts():
        entry = get_entry(cfg.objective)
        run_cfg = cfg.run_config(x0)
        trace = run(entry.objective, run_cfg)
        report = audit(trace, entry.objective, run_cfg)
        out = _seeded_path(cfg.output, seed)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_trace_csv(trace, out)
        summary = {
            "objective": cfg.objective,
            "scheme": run_cfg.scheme.name,
            "seed": seed,
            "x0": [float(v) for v in x0],
            "final_x": [float(v) for v in trace.final_x],
            "final_f": trace.final_f,
            "params": {"alpha": cfg.params.alpha, "beta": cfg.params.beta,
                       "delta0": cfg.params.delta0, "grad_tol": cfg.params.grad_tol},
            "max_iters": cfg.max_iters,
            "audit": report.to_dict(),
        }
        with open(_audit_path(out), "w") as fh:
            json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"{cfg.objective} {run_cfg.scheme.name} seed={seed}: {trace.termination.value} "
              f"after {trace.n_steps} steps, |grad|={trace.final_grad_norm:.3e} -> {out}")
        code = max(code, _exit_code(trace.termination))
    return code


def cmd_compare(config_path, schemes: list[str]) -> int:
    """Run several schemes from the same start and write a comparison table CSV."""
    try:
        cfg = load_config(config_path, require_scheme=False)
        if not schemes:
            schemes = list(cfg.raw.get("schemes") or [])
        if len(schemes) < 2:
            raise ConfigError("schemes", "compare needs at least two schemes")
        parsed = [parse_scheme(s, cfg.raw) for s in schemes]
        if cfg.seeds is not None and len(cfg.seeds) != 1:
            raise ConfigError("seeds", "compare uses a single start; give x0 or one seed")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _, x0 = cfg.starts()[0]
    target = _target_predicate(cfg.target) if cfg.target else norm_below(1e-6)
    traces = []
    for scheme in parsed:
        entry = get_entry(cfg.objective)
        traces.append((scheme.name, run(entry.objective, cfg.run_config(x0, scheme))))
    rows = compare(traces, target)
    cfg.output.parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.output, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "iters_to_target", "value_evals", "grad_evals", "termination"])
        for r in rows:
            iters = "inf" if math.isinf(r.iters_to_target) else int(r.iters_to_target)
            w.writerow([r.scheme, iters, r.value_evals, r.grad_evals, r.termination.value])
    width = max(len(r.scheme) for r in rows)
    print(f"{'scheme':<{width}}  {'iters':>9}  {'f-evals':>9}  {'g-evals':>9}  termination")
    for r in rows:
        iters = "inf" if math.isinf(r.iters_to_target) else str(int(r.iters_to_target))
        print(f"{r.scheme:<{width}}  {iters:>9}  {r.value_evals:>9}  {r.grad_evals:>9}  "
              f"{r.termination.value}")
    return EXIT_OK


def check_entry(entry) -> dict:
    """Gradient check, Lipschitz audit and critical-point check for one corpus entry."""
    fd = gradient_check(entry, n_samples=100, fd_step=1e-6)
    lip = lipschitz_audit(entry, n_pairs=1000)
    obj = entry.objective
    crit = obj.metadata.critical_points or ()
    crit_norm = max((float(np.linalg.norm(obj.grad(c))) for c in crit), default=0.0)
    passed = fd["max_rel_error"] < FD_LIMIT and lip["passed"] and crit_norm < CRITICAL_LIMIT
    return {"name": entry.name, "max_fd_error": fd["max_rel_error"],
            "worst_lipschitz_ratio": lip["worst_ratio"],
            "max_critical_grad_norm": crit_norm, "passed": passed}


def cmd_check(name: str) -> int:
    if name == "all":
        entries = corpus_list()
    else:
        try:
            entries = [get_entry(name)]
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return EXIT_USAGE
    ok = True
    print(f"{'objective':<14} {'max FD err':>11} {'Lip ratio':>10} {'|g(x*)|':>9}  status")
    for entry in entries:
        r = check_entry(entry)
        ok &= r["passed"]
        ratio = "n/a" if r["worst_lipschitz_ratio"] is None else f"{r['worst_lipschitz_ratio']:.4f}"
        print(f"{r['name']:<14} {r['max_fd_error']:>11.3e} {ratio:>10} "
              f"{r['max_critical_grad_norm']:>9.1e}  {'pass' if r['passed'] else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_list() -> int:
    for e in corpus_list():
        print(f"{e.name:<14} dim={e.dim:<3} {','.join(sorted(e.scenario_tags))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ubgd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one configured experiment")
    p.add_argument("config")
    p = sub.add_parser("compare", help="compare schemes from the same start")
    p.add_argument("config")
    p.add_argument("schemes", nargs="*",
                   help="e.g. backtracking unbounded twoway hybrid:5 standard:0.1")
    p = sub.add_parser("check", help="gradient and Lipschitz checks on the corpus")
    p.add_argument("name", nargs="?", default="all")
    sub.add_parser("list", help="list corpus objectives")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "compare":
        return cmd_compare(args.config, args.schemes)
    if args.command == "check":
        return cmd_check(args.name)
    return cmd_list()


if __name__ == "__main__":
    sys.exit(main())
