"""Command-line entry point.

Exit codes: 0 success, 1 bad input (parse, validation, missing file),
2 infeasible constraints, 3 solver did not converge.  Data and tables go
to stdout, diagnostics to stderr.  Relative ``--out`` paths resolve under
``$UISBENCH_OUTDIR`` when it is set.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .belief import pathology_csv, pathology_sweep
from .engines import EngineKind, PropagationError, propagate, traces_to_csv
from .harness import Case, Experiment, SweepSpec, figure_spec, reactor_benchmark, run_pipeline, sweep
from .joint import (
    ConvergenceError,
    InfeasibleError,
    SolverOptions,
    compile_constraints,
    joint_to_csv,
    max_entropy,
)
from .metrics import interval_abs_error, interval_sq_error, random_guess_baseline
from .rules import RuleSetError, parse_assignments, parse_evidence, parse_ruleset

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NOCONV = 0, 1, 2, 3
OUTDIR_ENV = "UISBENCH_OUTDIR"
ENGINE_NAMES = {e.value: e for e in EngineKind}

log = logging.getLogger("uisbench")


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _engines(text: str) -> tuple[EngineKind, ...]:
    out = []
    for name in text.split(","):
        name = name.strip().lower()
        if name == "myc":
            name = "mycin"
        if name not in ENGINE_NAMES:
            raise InputError(f"unknown engine {name!r}; choose from {','.join(ENGINE_NAMES)}")
        out.append(ENGINE_NAMES[name])
    return tuple(out)


def _solver(args) -> SolverOptions:
    return SolverOptions(tol=args.tol, max_iter=args.max_iter)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if not path.is_absolute() and os.environ.get(OUTDIR_ENV):
        path = Path(os.environ[OUTDIR_ENV]) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")
    print(f"wrote {path}", file=sys.stderr)


def _priors(args, rs):
    if args.priors != "file":
        return None
    if not args.priors_file:
        raise InputError("--priors file needs --priors-file")
    vals = {}
    for name, v, _ in parse_assignments(_read(args.priors_file)):
        if name not in rs.names:
            raise InputError(f"prior for undeclared proposition {name}")
        vals[name] = v
    missing = sorted(set(rs.names) - set(vals))
    if missing:
        raise InputError(f"priors file lacks {', '.join(missing)}")
    return vals


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_maxent(args) -> int:
    rs = parse_ruleset(_read(args.rules), allow_cycles=True)
    jd, rep = max_entropy(rs.names, compile_constraints(rs), _solver(args))
    print(f"maxent: {rep}", file=sys.stderr)
    for r in rs.rules:
        achieved = jd.conditional(r.consequent, r.antecedent)
        print(f"check {r.render()}: achieved {achieved:.10g}", file=sys.stderr)
    for name, v in jd.marginals().items():
        print(f"marginal P({name}) = {v:.10g}", file=sys.stderr)
    _emit(joint_to_csv(jd), args.out)
    return EXIT_OK


def cmd_infer(args) -> int:
    rs = parse_ruleset(_read(args.rules))
    ev = parse_evidence(_read(args.evidence), rs)
    priors = _priors(args, rs)
    if priors is None:
        jd, _ = max_entropy(rs.names, compile_constraints(rs), _solver(args))
        priors = jd.marginals()
    traces = [propagate(e, rs, ev, priors) for e in _engines(args.engines)]
    if args.format == "json":
        text = json.dumps([t.to_dict() for t in traces], indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = traces_to_csv(traces)
    else:
        width = max(len(n) for n in rs.names)
        lines = [" " * width + "  " + "  ".join(f"{t.engine.label:>13}" for t in traces)]
        for n in rs.names:
            cells = []
            for t in traces:
                v = t.verdict(n)
                cells.append(f"{v.point:13.6f}" if v.point is not None else f"[{v.interval[0]:.3f},{v.interval[1]:.3f}]".rjust(13))
            lines.append(n.ljust(width) + "  " + "  ".join(cells))
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    rs = parse_ruleset(_read(args.rules))
    cases = tuple(Case(Path(p).stem, parse_evidence(_read(p), rs)) for p in args.evidence)
    exp = Experiment(rs, cases, _engines(args.engines), _solver(args), priors=_priors(args, rs))
    res = run_pipeline(exp)
    for d in res.diagnostics:
        print(d, file=sys.stderr)
    if res.pooled is None:
        print("no engine produced a report", file=sys.stderr)
        return EXIT_INPUT
    if args.format == "csv":
        sys.stdout.write(res.to_csv())
    else:
        sys.stdout.write(res.to_table())
    if args.out:
        _emit(res.to_csv(), args.out)
    return EXIT_OK


def cmd_reactor(args) -> int:
    res = reactor_benchmark(_engines(args.engines), _solver(args))
    print(f"prior: {res.prior_report}", file=sys.stderr)
    for c in res.cases:
        print(f"case {c.name}: {c.solver_report}", file=sys.stderr)
    for d in res.diagnostics:
        print(d, file=sys.stderr)
    sys.stdout.write(res.to_csv() if args.format == "csv" else res.to_table())
    if args.out:
        _emit(res.to_csv(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.figure is not None:
        spec = figure_spec(args.figure, args.grid_step)
    else:
        if args.op is None:
            raise InputError("sweep needs --figure or --op")
        fixed = {k: v for k, v in (("pA", args.pA), ("pB", args.pB), ("strength", args.strength)) if v is not None}
        x = args.x or ("strength" if args.op == "mp" and "pA" in fixed else "pA")
        fixed.pop(x, None)
        engines = tuple(e.upper() for e in args.engines.split(",")) if args.engines else None
        if engines is None:
            engines = ("MEP", "IND", "FST", "MYC") if args.op == "rule2" else ("MAXC", "IND", "MINC")
        priors = tuple(float(q) for q in args.mycin_priors.split(",")) if args.mycin_priors else ()
        try:
            spec = SweepSpec(args.op, x, fixed, args.start, args.stop, args.grid_step or 0.01, engines, priors)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    _emit(sweep(spec).to_csv(), args.out)
    return EXIT_OK


def cmd_dst_pathology(args) -> int:
    betas = [10.0**-k for k in range(1, 10)]
    _emit(pathology_csv(pathology_sweep(betas)), args.out)
    return EXIT_OK


def cmd_verify_baselines(args) -> int:
    rng = np.random.default_rng(args.seed)
    n = args.samples
    u = rng.uniform(0, 1, n)
    cf = rng.uniform(-1, 1, n)
    ab = np.sort(rng.uniform(0, 1, (n, 2)), axis=1)
    rows = [("domain", "p", "p0", "metric", "closed_form", "monte_carlo", "diff")]
    for p in (0.05, 0.3, 0.5, 0.7, 0.95):
        cfm = random_guess_baseline(EngineKind.FST, p)
        mc = (np.abs(u - p).mean(), ((u - p) ** 2).mean())
        rows += [("FST", p, "", m, c, s, s - c) for m, c, s in zip(("abs", "sq"), cfm, mc)]
        for p0 in (0.1, 0.3, 0.5):
            x = np.where(cf >= 0, p0 + cf * (1 - p0), p0 * (1 + cf))
            cfm = random_guess_baseline(EngineKind.MYCIN, p, p0)
            mc = (np.abs(x - p).mean(), ((x - p) ** 2).mean())
            rows += [("MYC", p, p0, m, c, s, s - c) for m, c, s in zip(("abs", "sq"), cfm, mc)]
        cfm = random_guess_baseline(EngineKind.DST, p)
        mc = (interval_abs_error(ab[:, 0], ab[:, 1], p).mean(), interval_sq_error(ab[:, 0], ab[:, 1], p).mean())
        rows += [("DST", p, "", m, c, s, s - c) for m, c, s in zip(("abs", "sq"), cfm, mc)]
    text = "\n".join(",".join(r if isinstance(r, str) else f"{r:.6g}" for r in row) for row in rows) + "\n"
    _emit(text, args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uisbench", description="Compare uncertain inference systems with probability.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, engines="fst,mycin,dst,ind", formats=("table", "csv"), priors=True):
        sp.add_argument("-o", "--out")
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--max-iter", type=int, default=10_000)
        sp.add_argument("--engines", default=engines)
        sp.add_argument("--format", choices=formats, default="table")
        if priors:
            sp.add_argument("--priors", choices=("maxent", "file"), default="maxent")
            sp.add_argument("--priors-file")

    sp = sub.add_parser("maxent", help="fit the maximum-entropy joint to a rule set")
    sp.add_argument("rules")
    common(sp, priors=False)
    sp.set_defaults(func=cmd_maxent)

    sp = sub.add_parser("infer", help="propagate one evidence case with each engine")
    sp.add_argument("rules")
    sp.add_argument("evidence")
    common(sp, "fst,mycin,dst,ind,minc,maxc", formats=("table", "csv", "json"))
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("compare", help="score engines against the two-stage MaxEnt reference")
    sp.add_argument("rules")
    sp.add_argument("evidence", nargs="+")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("reactor", help="run the bundled reactor diagnosis benchmark")
    common(sp, priors=False)
    sp.set_defaults(func=cmd_reactor)

    sp = sub.add_parser("sweep", help="single-rule sensitivity curves as CSV")
    sp.add_argument("-o", "--out")
    sp.add_argument("--figure", type=int, choices=range(1, 8))
    sp.add_argument("--op", choices=("disj", "conj", "mp", "rule2"))
    sp.add_argument("--x", choices=("pA", "pB", "strength"))
    sp.add_argument("--pA", type=float)
    sp.add_argument("--pB", type=float)
    sp.add_argument("--strength", type=float)
    sp.add_argument("--start", type=float, default=0.0)
    sp.add_argument("--stop", type=float, default=1.0)
    sp.add_argument("--grid-step", type=float)
    sp.add_argument("--engines")
    sp.add_argument("--mycin-priors")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("dst-pathology", help="belief under vanishing incompatibility")
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_dst_pathology)

    sp = sub.add_parser("verify-baselines", help="Monte-Carlo check of the random-guess baselines")
    sp.add_argument("-o", "--out")
    sp.add_argument("--samples", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify_baselines)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; keep 2 for infeasibility
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (InputError, RuleSetError, PropagationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
