"""Experiment pipeline, single-rule sweeps and the reactor benchmark.

The pipeline is two-stage: a maximum-entropy prior is fitted to the rule
set alone, then each case's evidence is folded in by minimum cross-entropy.
The posterior marginals are the reference every engine is scored against.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .engines import EngineKind, PropagationError, PropagationTrace, conj, disj, modus_ponens, propagate
from .joint import (
    JointDistribution,
    SolverOptions,
    SolverReport,
    compile_constraints,
    evidence_constraints,
    max_entropy,
    min_cross_entropy,
)
from .metrics import ComparisonReport, ErrorSample, aggregate, score
from .rules import Evidence, Kind, RuleSet, Var, parse_ruleset, propagation_diagnostics

log = logging.getLogger(__name__)

NODE_CLASS = {Kind.MID: "I", Kind.GOAL: "C"}
DEFAULT_ENGINES = (EngineKind.FST, EngineKind.MYCIN, EngineKind.DST, EngineKind.IND)


@dataclass(frozen=True)
class Case:
    name: str
    evidence: Evidence


@dataclass(frozen=True)
class Experiment:
    ruleset: RuleSet
    cases: tuple[Case, ...]
    engines: tuple[EngineKind, ...] = DEFAULT_ENGINES
    solver: SolverOptions = SolverOptions()
    missing: str = "prior"
    priors: Mapping[str, float] | None = None  # overrides the MaxEnt marginals

    def __post_init__(self):
        leaves = set(self.ruleset.leaves)
        for c in self.cases:
            bad = sorted(set(c.evidence) - leaves)
            if bad:
                raise ValueError(f"case {c.name}: evidence on non-leaf propositions {bad}")


@dataclass
class CaseResult:
    name: str
    posterior: JointDistribution
    solver_report: SolverReport
    reference: dict[str, float]
    traces: dict[EngineKind, PropagationTrace] = field(default_factory=dict)
    samples: list[ErrorSample] = field(default_factory=list)
    report: ComparisonReport | None = None


@dataclass
class PipelineResult:
    prior: JointDistribution
    prior_report: SolverReport
    priors: dict[str, float]
    cases: list[CaseResult]
    engines: tuple[EngineKind, ...]
    pooled: ComparisonReport | None
    diagnostics: list[str] = field(default_factory=list)

    def to_table(self) -> str:
        parts = [c.report.to_table() for c in self.cases if c.report is not None]
        if self.pooled is not None and len(self.cases) > 1:
            parts.append(self.pooled.to_table())
        return "\n".join(parts)

    def to_csv(self) -> str:
        out = []
        for c in self.cases:
            if c.report is not None:
                out.append(c.report.to_csv(header=not out, case=c.name))
        if self.pooled is not None and len(self.cases) > 1:
            out.append(self.pooled.to_csv(header=not out, case="pooled"))
        return "".join(out)


def _classes(rs: RuleSet) -> tuple[str, ...]:
    present = [cls for kind, cls in NODE_CLASS.items() if rs.of_kind(kind)]
    return tuple(present) + ("IC",) if len(present) > 1 else tuple(present)


def run_pipeline(exp: Experiment) -> PipelineResult:
    rs = exp.ruleset
    prior, prior_rep = max_entropy(rs.names, compile_constraints(rs), exp.solver)
    priors = dict(exp.priors) if exp.priors is not None else prior.marginals()
    diagnostics: list[str] = []

    engines = list(dict.fromkeys(EngineKind(e) for e in exp.engines))
    shape = propagation_diagnostics(rs)
    if shape and engines:
        diagnostics += [f"all engines skipped: {d}" for d in shape]
        engines = []

    scored_nodes = [n for n in rs.names if rs.kind(n) in NODE_CLASS]
    classes = _classes(rs)
    results = []
    for case in exp.cases:
        post, rep = min_cross_entropy(prior, evidence_constraints(case.evidence, rs.names), exp.solver)
        ref = post.marginals()
        results.append(CaseResult(case.name, post, rep, ref))

    for e in list(engines):
        try:
            for case, res in zip(exp.cases, results):
                trace = propagate(e, rs, case.evidence, priors, missing=exp.missing)
                samples = [
                    score(e, trace.verdict(n), res.reference[n], NODE_CLASS[rs.kind(n)],
                          priors[n] if e is EngineKind.MYCIN else None)
                    for n in scored_nodes
                ]
                res.traces[e] = trace
                res.samples.extend(samples)
        except (PropagationError, ValueError) as exc:
            diagnostics.append(f"engine {e.label} skipped: {exc}")
            engines.remove(e)
            for res in results:
                res.traces.pop(e, None)
                res.samples = [s for s in res.samples if s.engine is not e]

    for d in diagnostics:
        log.warning(d)

    pooled = None
    if engines and classes:
        for res in results:
            res.report = aggregate(res.samples, classes, engines, title=f"case {res.name}")
        pooled = aggregate([s for r in results for s in r.samples], classes, engines, title="pooled over cases")
    return PipelineResult(prior, prior_rep, priors, results, tuple(engines), pooled, diagnostics)


def one_stage_reference(rs: RuleSet, ev: Evidence, solver: SolverOptions = SolverOptions()) -> dict[str, float]:
    """Marginals of the MaxEnt fit to rules and evidence together.

    Raises :class:`~uisbench.joint.InfeasibleError` when the case contradicts
    assumptions baked into the rules.
    """
    cons = compile_constraints(rs) + evidence_constraints(ev, rs.names)
    jd, _ = max_entropy(rs.names, cons, solver)
    return jd.marginals()


# --------------------------------------------------------------------------
# reactor benchmark
# --------------------------------------------------------------------------


def reactor_text() -> str:
    return resources.files("uisbench").joinpath("data/reactor.rules").read_text(encoding="utf-8")


def load_reactor() -> RuleSet:
    return parse_ruleset(reactor_text())


def support_cases(rs: RuleSet, high: float = 0.95, low: float = 0.05) -> tuple[Case, ...]:
    """One case per conclusion: leaves that support it directly or
    indirectly get ``high``, all other leaves ``low``."""
    cases = []
    leaves = rs.leaves
    for goal in rs.conclusions:
        up = rs.ancestors(goal)
        cases.append(Case(goal, Evidence({n: high if n in up else low for n in leaves})))
    return tuple(cases)


def reactor_benchmark(
    engines: Sequence[EngineKind] = DEFAULT_ENGINES, solver: SolverOptions = SolverOptions(), rs: RuleSet | None = None
) -> PipelineResult:
    rs = rs or load_reactor()
    return run_pipeline(Experiment(rs, support_cases(rs), tuple(engines), solver))


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

OPS = ("disj", "conj", "mp", "rule2")
_X_VARS = {"disj": ("pA", "pB"), "conj": ("pA", "pB"), "mp": ("pA", "strength"), "rule2": ("pA", "pB", "strength")}
_DEFAULTS = {"pA": 0.5, "pB": 0.5, "strength": 0.5}


def mycin_label(prior: float | None) -> str:
    if prior is None:
        return "MYC"
    return "MYC" + f"{prior:g}".lstrip("0")


@dataclass(frozen=True)
class SweepSpec:
    op: str
    x: str
    fixed: Mapping[str, float] = field(default_factory=dict)
    start: float = 0.0
    stop: float = 1.0
    step: float = 0.01
    engines: tuple[str, ...] = ("MAXC", "IND", "MINC")
    mycin_priors: tuple[float, ...] = ()

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"op must be one of {OPS}")
        if self.x not in _X_VARS[self.op]:
            raise ValueError(f"{self.op} sweeps one of {_X_VARS[self.op]}, not {self.x!r}")
        if not (0.0 <= self.start < self.stop <= 1.0) or self.step <= 0:
            raise ValueError(f"bad grid [{self.start}, {self.stop}] step {self.step}")
        for k, v in self.fixed.items():
            if k not in _DEFAULTS or not 0.0 <= v <= 1.0:
                raise ValueError(f"bad fixed value {k}={v}")
        for q in self.mycin_priors:
            if not 0.0 < q < 1.0:
                raise ValueError(f"Mycin prior {q} outside (0, 1)")

    def grid(self) -> np.ndarray:
        n = int(round((self.stop - self.start) / self.step))
        xs = self.start + self.step * np.arange(n + 1)
        return np.clip(np.round(xs, 12), self.start, self.stop)

    def point(self, x: float) -> dict[str, float]:
        vals = {**_DEFAULTS, **self.fixed}
        vals[self.x] = float(x)
        return vals


@dataclass(frozen=True)
class CurveTable:
    x_name: str
    rows: tuple[tuple[float, str, float], ...]

    def engines(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(e for _, e, _ in self.rows))

    def series(self, engine: str) -> tuple[np.ndarray, np.ndarray]:
        pts = [(x, v) for x, e, v in self.rows if e == engine]
        if not pts:
            raise KeyError(engine)
        xs, vs = zip(*pts)
        return np.array(xs), np.array(vs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "engine", "value"])
        for x, e, v in self.rows:
            w.writerow([repr(float(x)), e, repr(float(v))])
        return buf.getvalue()


_RULE2 = "prop A, B leaf; prop C goal; P(C | A & B) = 0.5"


@lru_cache(maxsize=1)
def _rule2_template() -> RuleSet:
    return parse_ruleset(_RULE2)


@lru_cache(maxsize=512)
def _rule2_prior(strength: float) -> JointDistribution:
    rs = _rule2_template().with_strength(0, strength)
    return max_entropy(rs.names, compile_constraints(rs))[0]


def rule2_point(strength: float, pa: float, pb: float, engines: Sequence[str], mycin_priors=()) -> dict[str, float]:
    """p(C) for the rule p(C | A & B) = strength given p(A), p(B)."""
    rs = _rule2_template().with_strength(0, strength)
    prior = _rule2_prior(float(strength))
    ev = Evidence({"A": pa, "B": pb})
    out = {}
    for e in engines:
        if e == "MEP":
            post, _ = min_cross_entropy(prior, evidence_constraints(ev, rs.names))
            out[e] = post.marginal(Var("C"))
        elif e == "MYC":
            out[e] = propagate(EngineKind.MYCIN, rs, ev, prior.marginals()).point("C")
        else:
            out[e] = propagate(EngineKind[e], rs, ev, prior.marginals()).point("C")
    for q in mycin_priors:
        out[mycin_label(q)] = propagate(EngineKind.MYCIN, rs, ev, {"A": q, "B": q, "C": q}).point("C")
    return out


def _engine_kind(label: str) -> EngineKind:
    return EngineKind.MYCIN if label.startswith("MYC") else EngineKind[label]


def sweep(spec: SweepSpec) -> CurveTable:
    rows = []
    for x in spec.grid():
        v = spec.point(x)
        if spec.op == "rule2":
            vals = rule2_point(v["strength"], v["pA"], v["pB"], spec.engines, spec.mycin_priors)
            rows.extend((float(x), e, val) for e, val in vals.items())
            continue
        labels = list(spec.engines) + [mycin_label(q) for q in spec.mycin_priors]
        for label in labels:
            kind = _engine_kind(label)
            if spec.op in ("conj", "disj"):
                # certainty factors share one prior here, so min/max commute
                # with the CF map and MYCIN coincides with MAXC
                if kind is EngineKind.MYCIN:
                    kind = EngineKind.MAXC
                f = conj if spec.op == "conj" else disj
                val = f(kind, v["pA"], v["pB"])
            else:
                prior = None
                if kind is EngineKind.MYCIN:
                    q = float(label[3:]) if len(label) > 3 else 0.5
                    prior = q
                val = modus_ponens(kind, v["pA"], v["strength"], prior)
            rows.append((float(x), label, val))
    return CurveTable(spec.x, tuple(rows))


MYCIN_PRIORS = (0.1, 0.3, 0.5)

FIGURES: dict[int, SweepSpec] = {
    1: SweepSpec("disj", "pA", {"pB": 0.4}),
    2: SweepSpec("conj", "pA", {"pB": 0.6}),
    3: SweepSpec("mp", "strength", {"pA": 0.4}, engines=("MAXC", "IND", "MINC"), mycin_priors=MYCIN_PRIORS),
    4: SweepSpec("mp", "pA", {"strength": 0.3}, engines=("MAXC", "IND", "MINC"), mycin_priors=MYCIN_PRIORS),
    # the fixed antecedent probabilities of the two-antecedent figures are
    # not given numerically; these choose the regimes the figures illustrate
    5: SweepSpec("rule2", "strength", {"pA": 0.7, "pB": 0.8}, engines=("MEP", "IND", "FST", "MYC")),
    6: SweepSpec("rule2", "strength", {"pA": 0.2, "pB": 0.7}, engines=("MEP", "IND", "FST", "MYC"),
                 mycin_priors=MYCIN_PRIORS),
    7: SweepSpec("rule2", "pA", {"strength": 0.3, "pB": 0.6}, engines=("MEP", "IND", "FST", "MYC")),
}


def figure_spec(n: int, step: float | None = None) -> SweepSpec:
    try:
        spec = FIGURES[n]
    except KeyError:
        raise ValueError(f"no preset for figure {n}; choose 1-7") from None
    if step is not None:
        spec = SweepSpec(spec.op, spec.x, spec.fixed, spec.start, spec.stop, step, spec.engines, spec.mycin_priors)
    return spec
