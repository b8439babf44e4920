"""``proxkit`` command line: run, check and norms.

Exit codes: 0 converged, 1 I/O or parse failure, 2 iteration cap reached,
3 invalid configuration, 4 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import oracle
from .core import operator_norm
from .errors import CapabilityError, ConfigError, DomainError, ProxkitError
from .problemfile import (Instance, ProblemFile, ProblemFileError, build_instance,
                          parse_problem, solver_config)
from .solve import SolveReport, SolverConfig

EXIT_OK = 0
EXIT_IO = 1
EXIT_MAX_ITER = 2
EXIT_CONFIG = 3
EXIT_CHECK_FAILED = 4

TRACE_HEADER = ["n", "objective", "gap_if_mu_known", "step", "displacement", "grad_residual"]

CHECK_RUN_ITERS = 200
GRAD_RTOL = 1e-5


def _fmt(x) -> str:
    return "[" + ", ".join(f"{v:.12g}" for v in np.atleast_1d(x)) + "]"


def _full(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def write_trace(path, report: SolveReport, pf: ProblemFile, cfg: SolverConfig,
                mu: Optional[float] = None) -> int:
    """Write the trace CSV; returns the number of data rows."""
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# kind={pf.kind} algorithm={report.algorithm}\n")
        sched = report.schedule.describe() if report.schedule else "n/a"
        if report.schedule is not None:
            lo, hi = report.schedule.interval
            sched += (f" beta={report.schedule.beta:.12g} epsilon={report.schedule.epsilon:.12g}"
                      f" interval=[{lo:.12g}, {hi:.12g}]")
        fh.write(f"# step={pf.solver['step']} schedule: {sched}\n")
        fh.write(f"# max_iter={cfg.max_iter} tol={cfg.tol:.6g} trace_every={cfg.trace_every}\n")
        fh.write(f"# termination={report.termination} iterations={report.iterations}"
                 f" mu={'unknown' if mu is None else repr(mu)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for n, obj in report.objective_trace:
            gap = None if mu is None else obj - mu
            if n == 0:
                step = disp = gres = None
            else:
                step = report.step_trace[n - 1]
                disp = report.displacement[n - 1]
                gres = report.grad_residuals[n - 1]
            writer.writerow([n, _full(obj), _full(gap), _full(step), _full(disp), _full(gres)])
            rows += 1
    return rows


def read_trace(path):
    """Parse a trace CSV into a header comment list and a list of row dicts."""
    comments, lines = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            (comments if line.startswith("#") else lines).append(line)
    return comments, list(csv.DictReader(lines))


def _load(path):
    pf = parse_problem(path)
    return pf, build_instance(pf)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def cmd_run(args, out=None) -> int:
    out = out or sys.stdout
    try:
        pf, inst = _load(args.file)
    except (OSError, ProblemFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    step = args.step
    if step is not None and step != "auto":
        try:
            step = float(step)
        except ValueError:
            print(f"error: --step must be a number or 'auto', got {args.step!r}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        cfg = solver_config(pf, inst, max_iter=args.max_iter, tol=args.tol, step=step)
        report = inst.run(cfg)
    except (ConfigError, DomainError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"kind: {pf.kind}  algorithm: {report.algorithm}", file=out)
    print(f"termination: {report.termination} after {report.iterations} iterations", file=out)
    print(f"final point: {_fmt(report.final_point)}", file=out)
    for key in ("p", "x", "v", "w"):
        if key in report.extras:
            print(f"{key}: {_fmt(report.extras[key])}", file=out)
    if "blocks" in report.extras:
        for i, b in enumerate(report.extras["blocks"]):
            print(f"block[{i}]: {_fmt(b)}", file=out)
    final_obj = report.objective_trace[-1][1]
    print(f"objective: {final_obj:.12g}", file=out)
    if args.trace:
        try:
            write_trace(args.trace, report, pf, cfg, inst.mu)
        except OSError as exc:
            print(f"error: cannot write trace: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK if report.converged else EXIT_MAX_ITER


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    status: str  # PASS, FAIL or SKIP
    detail: str = ""


def _sample_points(rng, dim, n, scale=3.0):
    return [rng.normal(scale=scale, size=dim) for _ in range(n)]


def run_checks(inst: Instance, cfg: SolverConfig, seed: Optional[int] = None,
               corrupt: Optional[Callable[[str, np.ndarray], np.ndarray]] = None
               ) -> list[CheckResult]:
    """Run every applicable verification; each check is independent.

    ``corrupt(name, p)`` lets tests inject faults into prox and projection
    outputs before they reach the oracles.
    """
    seed = oracle.oracle_seed(seed)
    rng = np.random.default_rng(seed)
    tamper = corrupt or (lambda name, p: p)
    results: list[CheckResult] = []

    def guarded(name, fn):
        try:
            results.append(fn())
        except (CapabilityError, ProxkitError) as exc:
            results.append(CheckResult(name, "SKIP", str(exc)))

    for name, f in inst.prox_terms:
        for gamma in (0.5, 2.0):
            label = f"prox {name} gamma={gamma}"

            def prox_check(f=f, gamma=gamma, label=label, name=name):
                worst, ok, count = -math.inf, True, 0
                for x in _sample_points(rng, f.dim, 3):
                    p = tamper(name, f.prox(gamma, x))
                    res = oracle.verify_prox_inequality(f, gamma, x, p, samples=100, seed=seed)
                    worst, ok, count = max(worst, res.worst_margin), ok and res.passed, count + res.samples
                return CheckResult(label, "PASS" if ok else "FAIL",
                                   f"worst margin {worst:.3e} over {count} competitors")
            guarded(label, prox_check)

    for name, C in inst.sets:
        label = f"projection {name}"

        def proj_check(C=C, label=label, name=name):
            worst, ok, count = -math.inf, True, 0
            for x in _sample_points(rng, C.dim, 3):
                p = tamper(name, C.project(x))
                res = oracle.verify_projection_inequality(C, x, p, samples=100, seed=seed)
                worst, ok, count = max(worst, res.worst_margin), ok and res.passed, count + res.samples
            return CheckResult(label, "PASS" if ok else "FAIL",
                               f"worst margin {worst:.3e} over {count} competitors")
        guarded(label, proj_check)

    for name, g in inst.smooth_terms:
        label = f"gradient {name}"

        def grad_check(g=g, label=label):
            worst = 0.0
            for x in _sample_points(rng, g.dim, 5):
                fd = oracle.finite_diff_grad(g, x)
                an = g.grad(x)
                err = np.linalg.norm(fd - an) / max(1.0, np.linalg.norm(an))
                worst = max(worst, err)
            return CheckResult(label, "PASS" if worst <= GRAD_RTOL else "FAIL",
                               f"max relative error {worst:.3e}")
        guarded(label, grad_check)

    def monotone_check():
        short = SolverConfig(cfg.schedule, min(cfg.max_iter, CHECK_RUN_ITERS), cfg.tol, 1)
        report = inst.run(short)
        vals = report.objective_values()
        finite = vals[np.isfinite(vals)]
        if not inst.monotone:
            return CheckResult("monotone objective", "SKIP",
                               f"{report.algorithm} is not a descent method")
        rise = float(np.max(np.diff(finite))) if finite.size > 1 else 0.0
        ok = rise <= 1e-10 * max(1.0, float(np.max(np.abs(finite)))) if finite.size else True
        return CheckResult("monotone objective", "PASS" if ok else "FAIL",
                           f"{report.iterations} iterations, largest increase {rise:.3e}")
    guarded("monotone objective", monotone_check)

    if inst.objective is not None and inst.kind in ("lasso", "elastic_net", "custom_fg",
                                                    "envelope", "constrained_ls"):
        def grid_check():
            if inst.dim > oracle.MAX_GRID_DIM:
                raise CapabilityError(f"grid oracle needs dimension <= {oracle.MAX_GRID_DIM}")
            report = inst.run(cfg)
            xh = report.final_point
            res = {1: 2001, 2: 401, 3: 61}[inst.dim]
            pt, val = oracle.grid_minimize(inst.objective, [(c - 2.0, c + 2.0) for c in xh], res)
            mine = inst.objective(xh)
            ok = mine <= val + 1e-6 * max(1.0, abs(val))
            return CheckResult("grid minimum", "PASS" if ok else "FAIL",
                               f"solver {mine:.9g} vs grid {val:.9g} at {_fmt(pt)}")
        guarded("grid minimum", grid_check)
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results) if results else 10
    lines = [f"{'check':<{width}}  status  detail", "-" * (width + 30)]
    for r in results:
        lines.append(f"{r.name:<{width}}  {r.status:<6}  {r.detail}")
    return "\n".join(lines)


def cmd_check(args, out=None, corrupt=None) -> int:
    out = out or sys.stdout
    try:
        pf, inst = _load(args.file)
        cfg = solver_config(pf, inst)
    except (OSError, ProblemFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    results = run_checks(inst, cfg, corrupt=corrupt)
    print(format_table(results), file=out)
    failed = [r for r in results if r.status == "FAIL"]
    counts = {k: sum(r.status == k for r in results) for k in ("PASS", "SKIP", "FAIL")}
    print(f"{counts['PASS']} passed, {counts['SKIP']} skipped, {counts['FAIL']} failed", file=out)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def cmd_norms(args, out=None) -> int:
    out = out or sys.stdout
    try:
        pf, inst = _load(args.file)
    except (OSError, ProblemFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for name, L in inst.operators.items():
        if L.is_zero():
            print(f"||{name}|| = 0", file=out)
            continue
        est = operator_norm(L)
        how = "exact" if L.norm_is_exact else ("estimated" if L.norm_converged
                                                else "estimated, not converged (inflated)")
        print(f"||{name}|| = {est:.12g} ({how})", file=out)
    print(f"beta = {inst.beta:.12g}", file=out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors are parse failures; exit 2 is reserved for the iteration cap
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proxkit", description="Proximal gradient toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="solve a problem file")
    run.add_argument("file")
    run.add_argument("--max-iter", type=int, dest="max_iter")
    run.add_argument("--tol", type=float)
    run.add_argument("--step", help="constant step size or 'auto'")
    run.add_argument("--trace", help="write the iteration trace to this CSV file")
    run.set_defaults(func=cmd_run)
    check = sub.add_parser("check", help="verify prox, gradient and descent properties")
    check.add_argument("file")
    check.set_defaults(func=cmd_check)
    norms = sub.add_parser("norms", help="print operator norms and beta")
    norms.add_argument("file")
    norms.set_defaults(func=cmd_norms)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
