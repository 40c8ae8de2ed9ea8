import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import condition, grid_max_entropy, random_feasible
from uisbench.joint import (
    ConvergenceError,
    InfeasibleError,
    JointDistribution,
    SolverOptions,
    SupportConflictError,
    compile_constraints,
    cross_entropy,
    entropy,
    event_mask,
    evidence_constraints,
    marginal,
    max_entropy,
    max_residual,
    min_cross_entropy,
    normalization,
    probability_constraint,
    read_joint_csv,
    uniform_joint,
    write_joint_csv,
)
from uisbench.rules import And, Var, parse_evidence, parse_ruleset

AB = ("A", "B")
PREGNANCY = """
prop swollen, sick, male leaf
prop preg goal
P(preg | swollen & sick) = 0.4
P(preg | male) = 0
"""


# basic distributions ------------------------------------------------------


def test_uniform():
    assert list(uniform_joint(["A"]).weights) == [0.5, 0.5]
    assert list(uniform_joint(AB).weights) == [0.25] * 4
    assert entropy(uniform_joint("ABC")) == pytest.approx(3 * math.log(2), abs=1e-15)
    with pytest.raises(ValueError):
        uniform_joint([f"x{i}" for i in range(21)])


def test_marginal_examples():
    u = uniform_joint(AB)
    assert marginal(u, Var("A")) == 0.5
    assert marginal(u, And(Var("A"), Var("B"))) == 0.25
    jd = JointDistribution(AB, np.array([0.4, 0.1, 0.25, 0.25]))
    # bit 0 is A: A holds at indices 1 and 3
    assert marginal(jd, Var("A")) == pytest.approx(0.1 + 0.25)
    assert marginal(jd, Var("B")) == pytest.approx(0.25 + 0.25)
    with pytest.raises(KeyError):
        marginal(jd, Var("Z"))


def test_joint_validation():
    with pytest.raises(ValueError):
        JointDistribution(AB, np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        JointDistribution(AB, np.array([0.5, 0.5, 0.5, -0.5]))
    with pytest.raises(ValueError):
        JointDistribution(AB, np.array([0.3, 0.3, 0.3, 0.3]))


def test_entropy_examples():
    assert entropy(uniform_joint(AB)) == pytest.approx(2 * math.log(2), abs=1e-15)
    p = JointDistribution(["A"], np.array([0.3, 0.7]))
    assert cross_entropy(p, p) == 0.0
    q = JointDistribution(["A"], np.array([1.0, 0.0]))
    assert cross_entropy(q, uniform_joint(["A"])) == pytest.approx(math.log(2), abs=1e-15)
    with pytest.raises(ValueError):
        cross_entropy(uniform_joint(["A"]), q)


# compilation --------------------------------------------------------------


def test_compile_prior():
    (norm, c) = compile_constraints(parse_ruleset("prop A; P(A) = 0.3"))
    assert norm.coefficients == {0: 1.0, 1: 1.0} and norm.target == 1.0
    assert c.coefficients == {1: 1.0} and c.target == 0.3


def test_compile_conditional():
    (_, c) = compile_constraints(parse_ruleset("prop A, B; P(B | A) = 0.8"))
    assert c.target == 0.0
    coef = c.coefficients
    assert coef[3] == pytest.approx(0.2) and coef[1] == pytest.approx(-0.8)
    assert set(coef) == {1, 3}


def test_compile_exactly_one():
    (_, c) = compile_constraints(parse_ruleset("prop A, B; P(exactly 1 of {A, B}) = 0.95"))
    assert c.coefficients == {1: 1.0, 2: 1.0} and c.target == 0.95


def test_constraint_needs_nonzero_coefficient():
    from uisbench.joint import LinearConstraint

    with pytest.raises(ValueError):
        LinearConstraint(np.array([0]), np.array([0.0]), 0.0)


# maximum entropy ----------------------------------------------------------


def test_maxent_no_constraints_is_uniform():
    jd, rep = max_entropy("ABC", [normalization("ABC")])
    np.testing.assert_allclose(jd.weights, 1 / 8, atol=1e-12)
    assert rep.max_residual <= 1e-8


def test_maxent_marginals_give_product():
    rs = parse_ruleset("prop A, B; P(A) = 0.3; P(B) = 0.6")
    jd, _ = max_entropy(rs.names, compile_constraints(rs))
    pa, pb = 0.3, 0.6
    expected = [(1 - pa) * (1 - pb), pa * (1 - pb), (1 - pa) * pb, pa * pb]
    np.testing.assert_allclose(jd.weights, expected, atol=1e-9)


def test_maxent_conditional_example():
    rs = parse_ruleset("prop A, B; P(A) = 0.5; P(B | A) = 0.8")
    cons = compile_constraints(rs)
    jd, rep = max_entropy(rs.names, cons)
    # index order: ~A~B, A~B, ~AB, AB
    np.testing.assert_allclose(jd.weights, [0.25, 0.1, 0.25, 0.4], atol=1e-9)
    h_grid, _ = grid_max_entropy(cons, 4)
    assert abs(entropy(jd) - h_grid) <= 1e-4


def test_maxent_respects_cycles():
    rs = parse_ruleset("prop A, B; P(A | B) = 0.7; P(B | A) = 0.4", allow_cycles=True)
    cons = compile_constraints(rs)
    jd, _ = max_entropy(rs.names, cons)
    assert jd.conditional(Var("A"), Var("B")) == pytest.approx(0.7, abs=1e-8)
    assert jd.conditional(Var("B"), Var("A")) == pytest.approx(0.4, abs=1e-8)
    h_grid, _ = grid_max_entropy(cons, 4)
    assert entropy(jd) >= h_grid - 1e-4


def test_infeasible_reports_violations():
    rs = parse_ruleset("prop A, B; P(A) = 0.3; P(A & B) = 0.5")
    with pytest.raises(InfeasibleError) as exc:
        max_entropy(rs.names, compile_constraints(rs))
    assert exc.value.violated


def test_non_convergence():
    rs = parse_ruleset("prop A, B, C; P(A) = 0.3; P(B | A) = 0.9; P(C | A & B) = 0.2")
    with pytest.raises(ConvergenceError):
        max_entropy(rs.names, compile_constraints(rs), SolverOptions(max_iter=1))


def test_hard_zero_handled_exactly():
    rs = parse_ruleset("prop A, B; P(B | A) = 0; P(A) = 0.5")
    jd, _ = max_entropy(rs.names, compile_constraints(rs))
    assert jd.weights[3] == 0.0
    np.testing.assert_allclose(jd.weights, [0.25, 0.5, 0.25, 0.0], atol=1e-9)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_solver_output_invariants(seed, m):
    props, cons, _ = random_feasible(np.random.default_rng(seed), m)
    jd, rep = max_entropy(props, cons)
    assert np.all(jd.weights >= 0)
    assert abs(jd.weights.sum() - 1) <= 1e-9
    assert max_residual(jd.weights, cons) <= 1e-8
    assert rep.max_residual <= 1e-8


@settings(max_examples=30)
@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=4))
def test_marginal_only_is_product(ps):
    props = tuple("ABCD"[: len(ps)])
    cons = [normalization(props)] + [probability_constraint(Var(p), v, props) for p, v in zip(props, ps)]
    jd, _ = max_entropy(props, cons)
    expected = np.ones(1 << len(ps))
    for j, v in enumerate(ps):
        expected *= np.where(event_mask(Var(props[j]), props), v, 1 - v)
    np.testing.assert_allclose(jd.weights, expected, atol=1e-6)


# minimum cross-entropy ----------------------------------------------------


def test_mxe_satisfied_constraints_return_prior():
    prior = JointDistribution(AB, np.array([0.1, 0.2, 0.3, 0.4]))
    cons = [normalization(AB), probability_constraint(Var("A"), 0.6, AB)]
    post, rep = min_cross_entropy(prior, cons)
    assert np.array_equal(post.weights, prior.weights)


def test_mxe_certain_evidence_is_conditioning():
    prior = JointDistribution(AB, np.array([0.1, 0.2, 0.3, 0.4]))
    post, _ = min_cross_entropy(prior, [probability_constraint(Var("A"), 1.0, AB)])
    np.testing.assert_allclose(post.weights, condition(prior.weights, event_mask(Var("A"), AB)), atol=1e-12)


def test_pregnancy_two_stage():
    rs = parse_ruleset(PREGNANCY)
    prior, _ = max_entropy(rs.names, compile_constraints(rs))
    assert prior.conditional(Var("preg"), Var("male")) == 0.0
    ev = parse_evidence("swollen = 1; sick = 1; male = 1", rs)
    post, _ = min_cross_entropy(prior, evidence_constraints(ev, rs.names))
    assert post.marginal(Var("preg")) <= 1e-12


def test_support_conflict():
    prior = JointDistribution(AB, np.array([0.5, 0.0, 0.5, 0.0]))
    with pytest.raises(SupportConflictError):
        min_cross_entropy(prior, [probability_constraint(Var("A"), 0.5, AB)])


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_mxe_idempotent(seed, m):
    rng = np.random.default_rng(seed)
    props = tuple("ABCD"[:m])
    prior = JointDistribution(props, rng.dirichlet(np.ones(1 << m)) * 0.9 + 0.1 / (1 << m))
    cons = [probability_constraint(Var(p), float(rng.uniform(0.05, 0.95)), props) for p in props]
    once, _ = min_cross_entropy(prior, cons)
    twice, _ = min_cross_entropy(once, cons)
    assert np.max(np.abs(once.weights - twice.weights)) <= 1e-9


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_mxe_never_beats_an_arbitrary_feasible_point(seed, m):
    """The MXE posterior has the least KL divergence among feasible points;
    compare against the prior rescaled within each evidence cell, which is
    feasible for marginal evidence on a single proposition."""
    rng = np.random.default_rng(seed)
    props = tuple("ABCD"[:m])
    prior = rng.dirichlet(np.ones(1 << m)) * 0.9 + 0.1 / (1 << m)
    v = float(rng.uniform(0.05, 0.95))
    mask = event_mask(Var("A"), props)
    post, _ = min_cross_entropy(JointDistribution(props, prior), [probability_constraint(Var("A"), v, props)])
    other = rng.dirichlet(np.ones(1 << m))
    other = np.where(mask, other / other[mask].sum() * v, other / other[~mask].sum() * (1 - v))
    assert cross_entropy(post.weights, prior) <= cross_entropy(other, prior) + 1e-10
    # the exact answer is Jeffrey's rule
    jeffrey = np.where(mask, prior / prior[mask].sum() * v, prior / prior[~mask].sum() * (1 - v))
    np.testing.assert_allclose(post.weights, jeffrey, atol=1e-9)


# CSV ----------------------------------------------------------------------


def test_csv_round_trip_exact():
    rng = np.random.default_rng(3)
    jd = JointDistribution("ABC", rng.dirichlet(np.ones(8)))
    buf = io.StringIO()
    write_joint_csv(jd, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "A,B,C,weight"
    assert "\r" not in text
    back = read_joint_csv(io.StringIO(text))
    assert back.props == jd.props
    assert np.array_equal(back.weights, jd.weights)
