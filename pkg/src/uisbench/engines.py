"""Approximate uncertain-inference engines.

Each probabilistic engine embodies one correlation assumption for
conjunction, disjunction and modus ponens:

=====  ==================  ======================  ==========================
kind   p(A & B)            p(A or B)               p(B) from p(A), s=p(B|A)
=====  ==================  ======================  ==========================
MAXC   min(a, b)           max(a, b)               s·a
MINC   max(0, a + b - 1)   min(1, a + b)           s·a + 1 - a
IND    a·b                 a + b - a·b             s·a + (1 - a)/2
=====  ==================  ======================  ==========================

FST shares the MAXC combinators.  MYCIN works in certainty-factor space,
converting to and from probability through the piecewise-linear map
anchored at (0, -1), (prior, 0), (1, +1).  DST propagates [support,
plausibility] intervals.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from graphlib import TopologicalSorter
from typing import Mapping

from .rules import Evidence, Kind, RuleSet, Var, literals, propagation_diagnostics

log = logging.getLogger(__name__)


class EngineKind(str, Enum):
    MAXC = "maxc"
    FST = "fst"
    MINC = "minc"
    IND = "ind"
    MYCIN = "mycin"
    DST = "dst"

    @property
    def label(self) -> str:
        return "MYC" if self is EngineKind.MYCIN else self.name


POINT_KINDS = (EngineKind.MAXC, EngineKind.FST, EngineKind.MINC, EngineKind.IND)


class PropagationError(ValueError):
    pass


def _check_prob(*ps: float) -> None:
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p!r} outside [0, 1]")


def _point_kind(kind: EngineKind) -> EngineKind:
    kind = EngineKind(kind)
    if kind not in POINT_KINDS:
        raise ValueError(f"{kind.name} has no probability combinator")
    return EngineKind.MAXC if kind is EngineKind.FST else kind


def conj(kind: EngineKind, pa: float, pb: float) -> float:
    _check_prob(pa, pb)
    k = _point_kind(kind)
    if k is EngineKind.MAXC:
        return min(pa, pb)
    if k is EngineKind.MINC:
        return max(0.0, pa + pb - 1.0)
    # clamp rounding so the Frechet bounds hold exactly
    return min(max(pa * pb, pa + pb - 1.0), pa, pb)


def disj(kind: EngineKind, pa: float, pb: float) -> float:
    _check_prob(pa, pb)
    k = _point_kind(kind)
    if k is EngineKind.MAXC:
        return max(pa, pb)
    if k is EngineKind.MINC:
        return min(1.0, pa + pb)
    return max(min(pa + pb - pa * pb, pa + pb, 1.0), pa, pb)


def modus_ponens(
    kind: EngineKind,
    pa: float,
    strength: float,
    prior_b: float | None = None,
    *,
    prior_a: float | None = None,
) -> float:
    """p(B) from p(A) and the rule strength p(B|A).

    For MYCIN the antecedent prior defaults to ``prior_b`` (the single
    shared prior used in the Myc.1 / Myc.3 / Myc.5 curves).
    """
    _check_prob(pa, strength)
    kind = EngineKind(kind)
    if kind is EngineKind.MYCIN:
        if prior_b is None:
            raise ValueError("MYCIN modus ponens needs the consequent prior")
        prior_a = prior_b if prior_a is None else prior_a
        _check_prob(prior_a, prior_b)
        cf_rule = cf_from_prob(strength, prior_b)
        return prob_from_cf(mycin_attenuate(cf_rule, cf_from_prob(pa, prior_a)), prior_b)
    k = _point_kind(kind)
    if k is EngineKind.MAXC:
        return strength * pa
    if k is EngineKind.MINC:
        return strength * pa + 1.0 - pa
    return strength * pa + (1.0 - pa) / 2.0


# --------------------------------------------------------------------------
# certainty factors
# --------------------------------------------------------------------------


def cf_from_prob(p: float, prior: float) -> float:
    _check_prob(p, prior)
    if not 0.0 < prior < 1.0:
        raise ValueError(f"prior {prior!r} must lie strictly inside (0, 1)")
    if p >= prior:
        return (p - prior) / (1.0 - prior)
    return (p - prior) / prior


def prob_from_cf(cf: float, prior: float) -> float:
    if not -1.0 <= cf <= 1.0:
        raise ValueError(f"certainty factor {cf!r} outside [-1, 1]")
    _check_prob(prior)
    if cf >= 0:
        return prior + cf * (1.0 - prior)
    return prior * (1.0 + cf)


def mycin_combine(x: float, y: float) -> float:
    """Pool two certainty factors bearing on the same hypothesis."""
    for v in (x, y):
        if not -1.0 <= v <= 1.0:
            raise ValueError(f"certainty factor {v!r} outside [-1, 1]")
    if x >= 0 and y >= 0:
        return x + y * (1.0 - x)
    if x <= 0 and y <= 0:
        return x + y * (1.0 + x)
    if min(abs(x), abs(y)) == 1.0:
        raise ValueError("cannot combine certain truth with certain falsity")
    return (x + y) / (1.0 - min(abs(x), abs(y)))


def mycin_attenuate(cf_rule: float, cf_antecedent: float, clip: bool = False) -> float:
    """Contribution of a rule to its consequent.

    Unclipped by default: a disconfirmed antecedent pushes the consequent
    away from its prior.  This is what produces the negative slope in rule
    strength when p(A) is below its prior.  ``clip=True`` gives the EMYCIN
    behaviour of ignoring rules whose premise has negative CF.
    """
    if clip:
        cf_antecedent = max(0.0, cf_antecedent)
    return cf_rule * cf_antecedent


# --------------------------------------------------------------------------
# propagation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeVerdict:
    node: str
    point: float | None = None
    interval: tuple[float, float] | None = None

    def __post_init__(self):
        if (self.point is None) == (self.interval is None):
            raise ValueError("exactly one of point / interval must be set")
        if self.interval is not None:
            a, b = self.interval
            if not 0.0 <= a <= b <= 1.0:
                raise ValueError(f"bad interval {self.interval!r}")


@dataclass(frozen=True)
class RuleFiring:
    rule: int
    antecedent: float | tuple[float, float]
    strength: float
    output: float | tuple[float, float]


@dataclass(frozen=True)
class NodeRecord:
    node: str
    kind: Kind
    native: float | tuple[float, float]
    verdict: NodeVerdict
    firings: tuple[RuleFiring, ...] = ()


@dataclass(frozen=True)
class PropagationTrace:
    engine: EngineKind
    records: tuple[NodeRecord, ...]
    ignored_rules: tuple[int, ...] = field(default=())

    @property
    def verdicts(self) -> tuple[NodeVerdict, ...]:
        return tuple(r.verdict for r in self.records)

    def verdict(self, node: str) -> NodeVerdict:
        for r in self.records:
            if r.node == node:
                return r.verdict
        raise KeyError(node)

    def point(self, node: str) -> float:
        v = self.verdict(node)
        if v.point is None:
            raise ValueError(f"{self.engine.name} gives an interval for {node}")
        return v.point

    def to_dict(self) -> dict:
        def val(x):
            return list(x) if isinstance(x, tuple) else x

        nodes = []
        for r in self.records:
            d = {"node": r.node, "class": r.kind.value, "native": val(r.native)}
            if r.verdict.point is not None:
                d["point"] = r.verdict.point
            else:
                d["interval"] = list(r.verdict.interval)
            d["firings"] = [
                {"rule": f.rule, "antecedent": val(f.antecedent), "strength": f.strength, "output": val(f.output)}
                for f in r.firings
            ]
            nodes.append(d)
        return {"engine": self.engine.value, "nodes": nodes, "ignored_rules": list(self.ignored_rules)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self, header: bool = True) -> str:
        """Columns: node, engine, class, point, support, plausibility, native."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["node", "engine", "class", "point", "support", "plausibility", "native"])
        for r in self.records:
            v = r.verdict
            a, b = v.interval if v.interval is not None else ("", "")
            native = ";".join(repr(x) for x in r.native) if isinstance(r.native, tuple) else repr(r.native)
            w.writerow([r.node, self.engine.value, r.kind.value, "" if v.point is None else repr(v.point),
                        repr(a) if a != "" else "", repr(b) if b != "" else "", native])
        return buf.getvalue()


def _order(rs: RuleSet) -> list[str]:
    ts: TopologicalSorter = TopologicalSorter({n: set() for n in rs.names})
    for a, c in sorted(rs.edges()):
        ts.add(c, a)
    return list(ts.static_order())


def _check_propagatable(rs: RuleSet) -> list[int]:
    diags = propagation_diagnostics(rs)
    if diags:
        raise PropagationError("; ".join(str(d) for d in diags))
    ignored = [i for i, r in enumerate(rs.rules) if not r.is_conditional]
    if ignored:
        log.info("propagation ignores %d unconditional rule(s): %s", len(ignored),
                 ", ".join(rs.rules[i].render() for i in ignored))
    return ignored


def _rules_for(rs: RuleSet) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for i, r in enumerate(rs.rules):
        if r.is_conditional:
            assert isinstance(r.consequent, Var)
            out.setdefault(r.consequent.name, []).append(i)
    return out


def propagate(
    kind: EngineKind,
    rs: RuleSet,
    ev: Evidence,
    priors: Mapping[str, float],
    *,
    missing: str = "prior",
    mycin_clip: bool = False,
) -> PropagationTrace:
    """Evaluate every node of ``rs`` bottom-up with a point engine or MYCIN.

    Leaves without evidence take their prior (``missing="prior"``) or are
    an error (``missing="error"``); under MYCIN the prior means CF 0.
    Several rules concluding the same node are pooled with the engine's
    disjunction, or with :func:`mycin_combine` under MYCIN.
    """
    kind = EngineKind(kind)
    if kind is EngineKind.DST:
        return dst_propagate(rs, ev)
    if missing not in ("prior", "error"):
        raise ValueError(f"missing must be 'prior' or 'error', not {missing!r}")
    ignored = _check_propagatable(rs)
    by_node = _rules_for(rs)
    mycin = kind is EngineKind.MYCIN

    def prior(n: str) -> float:
        try:
            return priors[n]
        except KeyError:
            raise PropagationError(f"no prior for {n}") from None

    native: dict[str, float] = {}
    records = []
    for node in _order(rs):
        cls = rs.kind(node)
        firings = []
        if node not in by_node:
            if node in ev:
                x = ev[node]
            elif missing == "error":
                raise PropagationError(f"no evidence for leaf {node}")
            else:
                x = None
            if mycin:
                if x is None or x == prior(node):
                    value = 0.0
                else:
                    value = cf_from_prob(x, prior(node))
            else:
                value = prior(node) if x is None else x
        else:
            value = None
            for i in by_node[node]:
                r = rs.rules[i]
                lits = literals(r.antecedent)
                ant = None
                for name, positive in lits:
                    x = native[name]
                    if not positive:
                        x = -x if mycin else 1.0 - x
                    if ant is None:
                        ant = x
                    else:
                        ant = min(ant, x) if mycin else conj(kind, ant, x)
                if mycin:
                    cf_rule = cf_from_prob(r.strength, prior(node))
                    out = mycin_attenuate(cf_rule, ant, mycin_clip)
                    value = out if value is None else mycin_combine(value, out)
                else:
                    out = modus_ponens(kind, ant, r.strength)
                    value = out if value is None else disj(kind, value, out)
                firings.append(RuleFiring(i, ant, r.strength, out))
        native[node] = value
        point = prob_from_cf(value, prior(node)) if mycin else value
        records.append(NodeRecord(node, cls, value, NodeVerdict(node, point=point), tuple(firings)))
    return PropagationTrace(kind, tuple(records), tuple(ignored))


def dst_propagate(rs: RuleSet, ev: Evidence) -> PropagationTrace:
    """[support, plausibility] intervals under the compatibility reading.

    A rule of strength strictly between 0 and 1 rules out no joint outcome,
    so it transmits nothing.  A strength-1 rule lifts the consequent's
    support to the antecedent's support; a strength-0 rule caps the
    consequent's plausibility at one minus it.  Only evidence of exactly 0
    or 1 is definitive; anything else is vacuous ``[0, 1]``.
    """
    ignored = _check_propagatable(rs)
    by_node = _rules_for(rs)
    iv: dict[str, tuple[float, float]] = {}
    records = []
    for node in _order(rs):
        firings = []
        if node not in by_node:
            x = ev.values.get(node)
            a, b = (x, x) if x in (0.0, 1.0) else (0.0, 1.0)
        else:
            a, b = 0.0, 1.0
            for i in by_node[node]:
                r = rs.rules[i]
                # Frechet bounds for a conjunction of literals
                lo, hi = 1.0, 1.0
                for name, positive in literals(r.antecedent):
                    la, lb = iv[name]
                    if not positive:
                        la, lb = 1.0 - lb, 1.0 - la
                    lo, hi = max(0.0, lo + la - 1.0), min(hi, lb)
                if r.strength == 1.0:
                    out = (lo, 1.0)
                elif r.strength == 0.0:
                    out = (0.0, 1.0 - lo)
                else:
                    out = (0.0, 1.0)
                a, b = max(a, out[0]), min(b, out[1])
                firings.append(RuleFiring(i, (lo, hi), r.strength, out))
            if a > b:
                raise PropagationError(f"definitive rules contradict each other at {node}")
        iv[node] = (a, b)
        records.append(NodeRecord(node, rs.kind(node), (a, b), NodeVerdict(node, interval=(a, b)), tuple(firings)))
    return PropagationTrace(EngineKind.DST, tuple(records), tuple(ignored))


def traces_to_csv(traces) -> str:
    traces = list(traces)
    return "".join(t.to_csv(header=(i == 0)) for i, t in enumerate(traces))
