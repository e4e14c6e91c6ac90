"""Command-line front end.

Subcommands::

    nmfbs run       --config PATH [--out TRACE.csv] [--snapshots] [--demo-nonconvergence]
    nmfbs compare   --config PATH [--rules CSV-LIST] [--out TABLE.csv] [--threads N]
    nmfbs gradcheck --config PATH [--debug-flip-adjoint]
    nmfbs verify    --trace TRACE.csv --ctx CTX.json [--out REPORT.json]

Exit codes: 0 success, 1 configuration or input error, 2 iteration limit,
3 numeric failure, 4 failed check.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .config import BuiltProblem, ConfigError, RunConfig, build_problem, load_config
from .errors import NumericError
from .hilbert import HilbertVec, InnerProductSpace
from .pde import directional_fd_check
from .prox import ProxOperator
from .solver import SolverConfig, SolverResult, Status, format_float, read_trace_csv, solve, write_trace_csv
from .stepsize import StepRule
from .verify import FAIL, TheoryContext, run_checks

__all__ = ["main", "cmd_run", "cmd_compare", "cmd_gradcheck", "cmd_verify", "parse_rule_token", "DEFAULT_COMPARE_RULES"]

log = logging.getLogger("nmfbs")

EXIT_OK, EXIT_CONFIG, EXIT_MAX_ITER, EXIT_NUMERIC, EXIT_CHECK_FAILED = 0, 1, 2, 3, 4

COMPARE_HEADER = ("rule", "grad_evals", "f_evals", "wall_ms", "status")
# default comparison: fixed baseline, six BB rules without linesearch,
# then BB1b with nonmonotone and with monotone linesearch
DEFAULT_COMPARE_RULES = (
    "fixed", "bb1a@nols", "bb2a@nols", "abba@nols", "bb1b@nols", "bb2b@nols", "abbb@nols", "bb1b@nmls", "bb1b@mls",
)
LS_MODES = ("nols", "nmls", "mls")
GRADCHECK_TOL = 1e-4
GRADCHECK_EPS = {"elliptic": 1e-5, "parabolic": 1e-4, "quadratic_l1": 1e-6}
GRADCHECK_DIRECTIONS = 5


def _status_exit(status: Status) -> int:
    if status is Status.CONVERGED:
        return EXIT_OK
    if status is Status.MAX_ITER:
        return EXIT_MAX_ITER
    return EXIT_NUMERIC


def _jsonable(x):
    """Recursively convert to JSON-safe values; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else format_float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, Enum):
        return x.value
    return x


def _dump_json(obj, path: Optional[Path] = None) -> str:
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _sibling(trace_path: Path, suffix: str) -> Path:
    return trace_path.with_name(trace_path.stem + suffix)


# ----------------------------------------------------------------------------
# theory context files


def context_to_dict(built: BuiltProblem, config: SolverConfig, snapshots: Optional[str]) -> dict:
    op = built.prox
    return {
        "L": built.L,
        "F_lower": built.F_star,
        "F_star": built.F_star,
        "u_star": None if built.u_star is None else built.u_star.coeffs.tolist(),
        "solver": dataclasses.asdict(config),
        "prox": {
            "sigma": op.sigma,
            "lam": op.lam,
            "ua": op.ua if math.isfinite(op.ua) else None,
            "ub": op.ub if math.isfinite(op.ub) else None,
            "weights": op.space.weights.tolist(),
        },
        "snapshots": snapshots,
    }


def context_from_dict(d: dict, base_dir: Path):
    """Returns ``(TheoryContext, iterates, grads)``; snapshots are loaded when referenced."""
    sol = dict(d["solver"])
    sol["rule"] = StepRule.parse(sol["rule"])
    config = SolverConfig(**sol)
    prox = None
    if d.get("prox") is not None:
        p = d["prox"]
        space = InnerProductSpace(np.asarray(p["weights"], dtype=float))
        prox = ProxOperator(
            space, sigma=p["sigma"], lam=p["lam"],
            ua=-math.inf if p["ua"] is None else p["ua"], ub=math.inf if p["ub"] is None else p["ub"],
        )
    u_star = d.get("u_star")
    if u_star is not None:
        u_star = np.asarray(u_star, dtype=float)
    ctx = TheoryContext(config=config, L=d.get("L"), F_lower=d.get("F_lower"), F_star=d.get("F_star"), u_star=u_star, prox=prox)
    iterates = grads = None
    if d.get("snapshots"):
        with np.load(base_dir / d["snapshots"]) as npz:
            iterates, grads = list(npz["iterates"]), list(npz["grads"])
        if prox is not None:
            iterates = [HilbertVec(u, prox.space) for u in iterates]
    return ctx, iterates, grads


# ----------------------------------------------------------------------------
# run


def cmd_run(config_path, out: Optional[str] = None, snapshots: bool = False, demo_nonconvergence: bool = False) -> int:
    try:
        cfg = load_config(config_path)
        store = snapshots or cfg.output.snapshots
        config = cfg.solver.to_solver_config(store_iterates=store)
        if demo_nonconvergence:
            if cfg.problem.kind != "elliptic":
                raise ConfigError("--demo-nonconvergence needs an elliptic problem")
            if config.rule is StepRule.FIXED:
                raise ConfigError("--demo-nonconvergence needs a BB rule")
            config = config.replace(alpha0=1.0, linesearch_enabled=False)
        built = build_problem(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    result = solve(built.objective, config, built.u0)
    timing = cfg.output.timing
    trace_path = Path(out if out is not None else cfg.output.trace_path)
    write_trace_csv(result.trace, trace_path, timing=timing)
    summary = result.summary(timing)
    if result.message:
        summary["message"] = result.message
    _dump_json(summary, _sibling(trace_path, ".summary.json"))

    snap_name = None
    if store and result.iterates:
        snap_path = _sibling(trace_path, ".snapshots.npz")
        np.savez(snap_path, iterates=np.array([u.coeffs for u in result.iterates]), grads=np.array([g.coeffs for g in result.grads]))
        snap_name = snap_path.name
    _dump_json(context_to_dict(built, config, snap_name), _sibling(trace_path, ".ctx.json"))

    print(
        f"{result.status.value}: iterations={result.iterations} grad_evals={result.grad_evals} "
        f"f_evals={result.f_evals} gmap_norm={format_float(result.final_gmap_norm)}"
    )
    if demo_nonconvergence:
        # an illustration of what can go wrong without the linesearch; never an error
        log.warning("nonconvergence demo (alpha0=1, no linesearch, rule %s) ended with status %s", config.rule.value, result.status.value)
        return EXIT_OK
    return _status_exit(result.status)


# ----------------------------------------------------------------------------
# compare


def parse_rule_token(token: str, base: SolverConfig) -> SolverConfig:
    """``rule[@mode]`` with mode ``nols`` (no linesearch), ``nmls`` (nonmonotone) or ``mls`` (monotone).

    Without a mode the fixed rule runs without linesearch and BB rules follow ``base``.
    """
    name, _, mode = token.strip().partition("@")
    rule = StepRule.parse(name)
    if not mode:
        mode = "nols" if rule is StepRule.FIXED or not base.linesearch_enabled else "nmls"
    if mode not in LS_MODES:
        raise ValueError(f"unknown linesearch mode {mode!r} in {token!r}; expected one of {', '.join(LS_MODES)}")
    cfg = base.replace(rule=rule, linesearch_enabled=mode != "nols", store_iterates=False)
    if mode == "mls":
        cfg = cfg.replace(m_max=0)
    return cfg


def _run_token(cfg: RunConfig, token: str, config: SolverConfig) -> SolverResult:
    built = build_problem(cfg)
    log.info("compare: starting %s", token)
    return solve(built.objective, config, built.u0)


def compare_rows(cfg: RunConfig, tokens: Sequence[str], threads: int = 1) -> List[tuple]:
    """Run each rule token on a fresh problem instance; returns ``(token, SolverResult)`` in input order."""
    base = cfg.solver.to_solver_config()
    configs = [parse_rule_token(t, base) for t in tokens]
    if threads <= 1:
        results = [_run_token(cfg, t, c) for t, c in zip(tokens, configs)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda tc: _run_token(cfg, *tc), zip(tokens, configs)))
    return list(zip(tokens, results))


def format_compare_csv(rows, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_HEADER)
    for token, res in rows:
        w.writerow([token, res.grad_evals, res.f_evals, format_float(res.wall_ms if timing else 0.0), res.status.value])
    return buf.getvalue()


def cmd_compare(config_path, rules: Optional[Sequence[str]] = None, out: Optional[str] = None, threads: int = 1) -> int:
    try:
        cfg = load_config(config_path)
        tokens = list(rules) if rules else list(DEFAULT_COMPARE_RULES)
        base = cfg.solver.to_solver_config()
        for t in tokens:
            parse_rule_token(t, base)
        build_problem(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = compare_rows(cfg, tokens, threads)
    text = format_compare_csv(rows, cfg.output.timing)
    if out is not None:
        Path(out).write_text(text)
    sys.stdout.write(text)
    worst = EXIT_OK
    for _, res in rows:
        code = _status_exit(res.status)
        worst = max(worst, code)
    return worst


# ----------------------------------------------------------------------------
# gradcheck


def gradcheck_report(cfg: RunConfig, flip_adjoint: bool = False):
    built = build_problem(cfg, adjoint_sign=-1.0 if flip_adjoint else 1.0)
    space = built.u0.space
    rng = np.random.default_rng(cfg.seed)
    u = HilbertVec(np.clip(rng.uniform(-1.0, 1.0, space.dim), built.prox.ua, built.prox.ub), space)
    dirs = [HilbertVec(rng.standard_normal(space.dim), space) for _ in range(GRADCHECK_DIRECTIONS)]
    obj = built.objective
    _, grad = obj.value_and_grad(u)
    return directional_fd_check(obj.smooth_eval, grad, u, dirs, GRADCHECK_EPS[built.kind])


def cmd_gradcheck(config_path, flip_adjoint: bool = False) -> int:
    try:
        cfg = load_config(config_path)
        checks = gradcheck_report(cfg, flip_adjoint)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    ok = True
    for c in checks:
        passed = c.passed(GRADCHECK_TOL)
        ok &= passed
        print(f"direction {c.index}: fd={format_float(c.fd)} adjoint={format_float(c.adjoint)} rel_error={c.rel_error:.3e} {'pass' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ----------------------------------------------------------------------------
# verify


def cmd_verify(trace_path, ctx_path, out: Optional[str] = None) -> int:
    try:
        trace = read_trace_csv(trace_path)
        ctx_file = Path(ctx_path)
        ctx, iterates, grads = context_from_dict(json.loads(ctx_file.read_text()), ctx_file.resolve().parent)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"cannot read inputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    reports = run_checks(trace, ctx, iterates, grads)
    text = _dump_json({"checks": [r.to_dict() for r in reports]})
    if out is not None:
        Path(out).write_text(text)
    sys.stdout.write(text)
    return EXIT_CHECK_FAILED if any(r.status == FAIL for r in reports) else EXIT_OK


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nmfbs", description="Nonmonotone forward-backward splitting solver.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve one configured problem")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="trace CSV path (overrides output.trace_path)")
    r.add_argument("--snapshots", action="store_true", help="store iterates for the quasi-Fejer check")
    r.add_argument("--demo-nonconvergence", action="store_true", help="alpha0=1 without linesearch; outcome is only logged")

    c = sub.add_parser("compare", help="run several step-size rules and tabulate evaluation counts")
    c.add_argument("--config", required=True)
    c.add_argument("--rules", help="comma separated rule[@nols|@nmls|@mls] tokens")
    c.add_argument("--out", help="comparison CSV path")
    c.add_argument("--threads", type=int, default=1)

    g = sub.add_parser("gradcheck", help="finite-difference check of the reduced gradient")
    g.add_argument("--config", required=True)
    g.add_argument("--debug-flip-adjoint", action="store_true", help=argparse.SUPPRESS)

    v = sub.add_parser("verify", help="replay a trace against the theory checks")
    v.add_argument("--trace", required=True)
    v.add_argument("--ctx", required=True)
    v.add_argument("--out", help="report JSON path")
    return p


def _setup_logging():
    level = os.environ.get("NMFBS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.snapshots, args.demo_nonconvergence)
    if args.command == "compare":
        rules = [t for t in args.rules.split(",") if t.strip()] if args.rules else None
        return cmd_compare(args.config, rules, args.out, max(1, args.threads))
    if args.command == "gradcheck":
        return cmd_gradcheck(args.config, args.debug_flip_adjoint)
    return cmd_verify(args.trace, args.ctx, args.out)


if __name__ == "__main__":
    sys.exit(main())
