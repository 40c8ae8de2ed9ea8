import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uisbench.engines import EngineKind
from uisbench.harness import (
    FIGURES,
    Case,
    Experiment,
    SweepSpec,
    figure_spec,
    load_reactor,
    one_stage_reference,
    reactor_text,
    rule2_point,
    run_pipeline,
    support_cases,
    sweep,
)
from uisbench.joint import InfeasibleError, max_residual, evidence_constraints
from uisbench.rules import TRUE, Evidence, Var, parse_evidence, parse_ruleset

PREGNANCY = """
prop swollen, sick, male leaf
prop preg goal
P(preg | swollen & sick) = 0.4
P(preg | male) = 0
"""
ALL = (EngineKind.FST, EngineKind.MYCIN, EngineKind.DST, EngineKind.IND)


def pregnancy():
    rs = parse_ruleset(PREGNANCY)
    return rs, Case("male", parse_evidence("swollen = 1; sick = 1; male = 1", rs))


# pipeline -----------------------------------------------------------------


def test_pregnancy_pipeline():
    rs, case = pregnancy()
    res = run_pipeline(Experiment(rs, (case,), ALL))
    (c,) = res.cases
    assert c.reference["preg"] <= 1e-12
    assert res.pooled.classes == ("C",)
    errs = {s.engine: s.abs_err for s in c.samples}
    assert errs[EngineKind.IND] == pytest.approx(0.4)
    assert errs[EngineKind.FST] == pytest.approx(0.4)
    assert errs[EngineKind.DST] == pytest.approx(0.0, abs=1e-12)
    # the posterior keeps the hard rule
    assert c.posterior.conditional(Var("preg"), Var("male")) == 0.0


def test_two_stage_differs_from_one_stage():
    rs, case = pregnancy()
    two = run_pipeline(Experiment(rs, (case,), ())).cases[0].reference["preg"]
    try:
        one = one_stage_reference(rs, case.evidence)["preg"]
    except InfeasibleError:
        one = None
    assert two <= 1e-12
    assert one is None or abs(one - two) > 1e-6


def test_empty_evidence_keeps_prior():
    rs = parse_ruleset("prop A, B, C; P(B | A) = 0.8; P(C | B) = 0.7; P(A) = 0.4")
    res = run_pipeline(Experiment(rs, (Case("none", Evidence({})),), (EngineKind.IND, EngineKind.FST)))
    c = res.cases[0]
    assert c.posterior is res.prior
    assert c.reference == res.prior.marginals()
    for s in c.samples:
        assert s.reference == res.prior.marginals()[s.node]


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_ind_tracks_the_reference(s, pa, pb):
    v = rule2_point(s, pa, pb, ("MEP", "IND"))
    assert abs(v["MEP"] - v["IND"]) <= 0.025


def test_single_rule_pipeline_ind_close():
    rs = parse_ruleset("prop A, B leaf; prop C goal; P(C | A & B) = 0.8")
    cases = tuple(Case(f"c{k}", Evidence({"A": a, "B": b})) for k, (a, b) in enumerate([(0.9, 0.9), (0.3, 0.7), (0.5, 0.2)]))
    res = run_pipeline(Experiment(rs, cases, (EngineKind.IND, EngineKind.FST)))
    assert res.pooled.get(EngineKind.IND, "C", "abs") <= 0.025
    assert res.pooled.get(EngineKind.IND, "C", "abs") < res.pooled.get(EngineKind.FST, "C", "abs")


def test_reference_satisfies_evidence():
    rs = load_reactor()
    cases = support_cases(rs)[:1]
    res = run_pipeline(Experiment(rs, cases, (EngineKind.IND,)))
    c = res.cases[0]
    assert max_residual(c.posterior.weights, evidence_constraints(cases[0].evidence, rs.names)) <= 1e-8
    assert res.prior_report.max_residual <= 1e-8


def test_engine_failure_is_a_diagnostic():
    # C is certain under the prior, so MYCIN has no usable CF scale for it
    rs = parse_ruleset("prop A leaf; prop C goal; P(A) = 1; P(C | A) = 1")
    res = run_pipeline(Experiment(rs, (Case("c", Evidence({"A": 1.0})),), (EngineKind.MYCIN, EngineKind.IND)))
    assert res.engines == (EngineKind.IND,)
    assert any("MYC" in d for d in res.diagnostics)
    assert res.pooled.get(EngineKind.IND, "C", "abs") == pytest.approx(0.0, abs=1e-12)


def test_shape_failure_skips_every_engine():
    rs = parse_ruleset("prop A, B, C; P(B & C | A) = 0.5")
    res = run_pipeline(Experiment(rs, (Case("c", Evidence({"A": 1.0})),), (EngineKind.IND,)))
    assert res.engines == () and res.pooled is None and res.diagnostics


def test_experiment_rejects_non_leaf_evidence():
    rs, _ = pregnancy()
    with pytest.raises(ValueError):
        Experiment(rs, (Case("bad", Evidence({"preg": 1.0})),))


def test_pipeline_deterministic():
    rs, case = pregnancy()
    exp = Experiment(rs, (case, Case("none", Evidence({}))), ALL)
    a, b = run_pipeline(exp), run_pipeline(exp)
    assert a.to_csv() == b.to_csv()
    assert a.to_table() == b.to_table()


# reactor ------------------------------------------------------------------


def test_reactor_counts():
    rs = load_reactor()
    assert len(rs.names) == 18
    assert (len(rs.leaves), len(rs.intermediates), len(rs.conclusions)) == (10, 4, 4)
    conditional = [r for r in rs.rules if r.is_conditional]
    assert len(conditional) == 9 and len(rs.rules) == 11
    assert all(r.antecedent == TRUE for r in rs.rules if not r.is_conditional)
    assert all(0.70 <= r.strength <= 0.95 for r in conditional)
    assert rs.priors == {}
    assert reactor_text().startswith("#")


def test_reactor_cases():
    rs = load_reactor()
    cases = support_cases(rs)
    assert [c.name for c in cases] == list(rs.conclusions)
    for c in cases:
        high = {n for n, v in c.evidence.items() if v == 0.95}
        assert high and high == rs.ancestors(c.name) & set(rs.leaves)
        assert set(c.evidence) == set(rs.leaves)
        assert set(c.evidence.values.values()) == {0.95, 0.05}


# sweeps -------------------------------------------------------------------


def _at(table, x):
    return {e: v for xx, e, v in table.rows if abs(xx - x) < 1e-12}


def test_figure_1_point():
    vals = _at(sweep(figure_spec(1)), 0.4)
    assert vals == pytest.approx({"MAXC": 0.4, "IND": 0.64, "MINC": 0.8})


def test_figure_3_point():
    vals = _at(sweep(figure_spec(3)), 0.0)
    assert {k: vals[k] for k in ("MAXC", "IND", "MINC")} == pytest.approx({"MAXC": 0.0, "IND": 0.3, "MINC": 0.6})
    assert set(vals) == {"MAXC", "IND", "MINC", "MYC.1", "MYC.3", "MYC.5"}


@pytest.mark.parametrize("n", [1, 2])
def test_frechet_envelope(n):
    t = sweep(figure_spec(n))
    xs, ind = t.series("IND")
    a, b = t.series("MAXC")[1], t.series("MINC")[1]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    assert np.all(lo <= ind + 1e-15) and np.all(ind <= hi + 1e-15)
    assert len(xs) == 101


def test_figure_presets():
    assert sorted(FIGURES) == list(range(1, 8))
    assert figure_spec(4).fixed == {"strength": 0.3}
    assert figure_spec(2).fixed == {"pB": 0.6}
    assert figure_spec(1, 0.1).grid().tolist() == pytest.approx([k / 10 for k in range(11)])
    with pytest.raises(ValueError):
        figure_spec(8)


def test_rule2_sweep_has_reference_curve():
    t = sweep(SweepSpec("rule2", "strength", {"pA": 0.7, "pB": 0.8}, step=0.25, engines=("MEP", "IND", "FST", "MYC")))
    assert t.engines() == ("MEP", "IND", "FST", "MYC")
    xs, mep = t.series("MEP")
    assert xs.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert np.all(np.diff(mep) > 0)
    assert all(0.0 <= v <= 1.0 for _, _, v in t.rows)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("mp", "pB")
    with pytest.raises(ValueError):
        SweepSpec("disj", "pA", step=0.0)
    with pytest.raises(ValueError):
        SweepSpec("disj", "pA", start=0.5, stop=0.2)
    with pytest.raises(ValueError):
        SweepSpec("disj", "pA", {"pB": 1.5})
    with pytest.raises(ValueError):
        SweepSpec("nand", "pA")


def test_curve_csv():
    text = sweep(SweepSpec("conj", "pA", {"pB": 0.6}, step=0.5)).to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["x", "engine", "value"]
    assert rows[1:4] == [["0.0", "MAXC", "0.0"], ["0.0", "IND", "0.0"], ["0.0", "MINC", "0.0"]]
    assert len(rows) == 1 + 3 * 3
