"""Explicit joint distributions over 2^m truth assignments.

Event ``i`` assigns proposition ``props[j]`` the truth value of bit ``j``
of ``i``.  Rules and priors compile to linear equality constraints on the
weight vector; :func:`max_entropy` and :func:`min_cross_entropy` solve the
resulting I-projection problems by damped Newton ascent on the convex dual,
where the solution has the form ``p_i ∝ q_i exp(λ · d_i)``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy.special import logsumexp

from .rules import And, Evidence, ExactlyK, Formula, Not, Or, Rule, RuleSet, Top, Var

log = logging.getLogger(__name__)

MAX_PROPS = 20


class InfeasibleError(ValueError):
    """No distribution satisfies the constraints."""

    def __init__(self, message: str, violated: Sequence["LinearConstraint"] = ()):
        self.violated = tuple(violated)
        if self.violated:
            message += "; violated: " + ", ".join(c.label for c in self.violated)
        super().__init__(message)


class SupportConflictError(InfeasibleError):
    """Constraints need mass on events the prior rules out."""


class ConvergenceError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# events
# --------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _bits(m: int) -> tuple[np.ndarray, ...]:
    idx = np.arange(1 << m, dtype=np.int64)
    out = []
    for j in range(m):
        b = ((idx >> j) & 1).astype(bool)
        b.flags.writeable = False
        out.append(b)
    return tuple(out)


def event_mask(f: Formula, props: Sequence[str]) -> np.ndarray:
    """Boolean vector over the 2^m events: True where ``f`` holds."""
    props = tuple(props)
    bits = _bits(len(props))
    pos = {p: j for j, p in enumerate(props)}

    def go(g: Formula) -> np.ndarray:
        if isinstance(g, Top):
            return np.ones(1 << len(props), dtype=bool)
        if isinstance(g, Var):
            try:
                return bits[pos[g.name]]
            except KeyError:
                raise KeyError(f"unknown proposition {g.name!r}") from None
        if isinstance(g, Not):
            return ~go(g.operand)
        if isinstance(g, And):
            return go(g.left) & go(g.right)
        if isinstance(g, Or):
            return go(g.left) | go(g.right)
        if isinstance(g, ExactlyK):
            count = np.zeros(1 << len(props), dtype=np.int32)
            for n in g.names:
                count += go(Var(n))
            return count == g.k
        raise TypeError(f"not a formula: {g!r}")

    return go(f)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    props: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        props = tuple(self.props)
        w = np.array(self.weights, dtype=float)
        if len(set(props)) != len(props):
            raise ValueError("duplicate proposition names")
        if w.shape != (1 << len(props),):
            raise ValueError(f"expected {1 << len(props)} weights, got {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        w.flags.writeable = False
        object.__setattr__(self, "props", props)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return len(self.props)

    def marginal(self, f: Formula) -> float:
        return marginal(self, f)

    def marginals(self) -> dict[str, float]:
        bits = _bits(self.m)
        return {p: float(self.weights[bits[j]].sum()) for j, p in enumerate(self.props)}

    def conditional(self, f: Formula, given: Formula) -> float:
        g = event_mask(given, self.props)
        den = self.weights[g].sum()
        if den == 0:
            return math.nan
        return float(self.weights[g & event_mask(f, self.props)].sum() / den)


def uniform_joint(props: Sequence[str], max_props: int = MAX_PROPS) -> JointDistribution:
    m = len(props)
    if not 1 <= m <= max_props:
        raise ValueError(f"need 1 <= m <= {max_props}, got {m}")
    return JointDistribution(tuple(props), np.full(1 << m, 2.0**-m))


def marginal(jd: JointDistribution, f: Formula) -> float:
    return float(jd.weights[event_mask(f, jd.props)].sum())


def entropy(jd: JointDistribution | np.ndarray) -> float:
    w = jd.weights if isinstance(jd, JointDistribution) else np.asarray(jd, dtype=float)
    w = w[w > 0]
    return float(-(w * np.log(w)).sum())


def cross_entropy(p: JointDistribution | np.ndarray, q: JointDistribution | np.ndarray) -> float:
    """Kullback-Leibler divergence sum p ln(p/q), in nats."""
    pw = p.weights if isinstance(p, JointDistribution) else np.asarray(p, dtype=float)
    qw = q.weights if isinstance(q, JointDistribution) else np.asarray(q, dtype=float)
    if pw.shape != qw.shape:
        raise ValueError("distributions differ in size")
    if np.any((qw == 0) & (pw > 0)):
        raise ValueError("p puts mass where q has none")
    s = pw > 0
    return float(max(0.0, (pw[s] * np.log(pw[s] / qw[s])).sum()))


# --------------------------------------------------------------------------
# constraints
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """``sum_i coef_i * w_i == target``; coefficients stored sparsely."""

    indices: np.ndarray
    values: np.ndarray
    target: float
    origin: Rule | None = None
    label: str = ""

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=float)
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        keep = val != 0
        if not keep.any():
            raise ValueError(f"constraint {self.label!r} has no nonzero coefficient")
        object.__setattr__(self, "indices", idx[keep])
        object.__setattr__(self, "values", val[keep])

    @property
    def coefficients(self) -> dict[int, float]:
        return dict(zip(self.indices.tolist(), self.values.tolist()))

    def dense(self, n: int) -> np.ndarray:
        row = np.zeros(n)
        row[self.indices] = self.values
        return row

    def residual(self, weights: np.ndarray) -> float:
        return float(np.dot(self.values, np.asarray(weights)[self.indices]) - self.target)


def normalization(props: Sequence[str]) -> LinearConstraint:
    n = 1 << len(props)
    return LinearConstraint(np.arange(n), np.ones(n), 1.0, None, "normalization")


def probability_constraint(f: Formula, v: float, props: Sequence[str], origin: Rule | None = None, label: str = "") -> LinearConstraint:
    idx = np.flatnonzero(event_mask(f, props))
    if idx.size == 0:
        if v != 0:
            raise InfeasibleError(f"{label or f} is impossible but given probability {v}")
        # P(contradiction) = 0 holds for every distribution
        idx = np.arange(1 << len(props))
        return LinearConstraint(idx, np.ones(idx.size), 1.0, origin, label)
    return LinearConstraint(idx, np.ones(idx.size), v, origin, label)


def conditional_constraint(
    f: Formula, given: Formula, v: float, props: Sequence[str], origin: Rule | None = None, label: str = ""
) -> LinearConstraint:
    g = event_mask(given, props)
    fg = g & event_mask(f, props)
    idx = np.flatnonzero(g)
    vals = np.where(fg[idx], 1.0 - v, -v)
    if not np.any(vals):
        # v in {0, 1} and F & G (or ~F & G) empty: the statement is vacuous
        return LinearConstraint(np.arange(1 << len(props)), np.ones(1 << len(props)), 1.0, origin, label)
    return LinearConstraint(idx, vals, 0.0, origin, label)


def compile_constraints(rs: RuleSet, props: Sequence[str] | None = None) -> list[LinearConstraint]:
    """Normalization row followed by one row per prior and rule."""
    props = tuple(props or rs.names)
    out = [normalization(props)]
    for name, v in rs.priors.items():
        out.append(probability_constraint(Var(name), v, props, Rule(Var(name), strength=v), f"P({name}) = {v!r}"))
    for r in rs.rules:
        label = r.render()
        if r.is_conditional:
            out.append(conditional_constraint(r.consequent, r.antecedent, r.strength, props, r, label))
        else:
            out.append(probability_constraint(r.consequent, r.strength, props, r, label))
    return out


def evidence_constraints(ev: Evidence, props: Sequence[str]) -> list[LinearConstraint]:
    return [probability_constraint(Var(k), v, props, Rule(Var(k), strength=v), f"{k} = {v!r}") for k, v in ev.items()]


# --------------------------------------------------------------------------
# solver
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 10_000
    stall_tol: float = 1e-4
    stall_iter: int = 500
    max_props: int = MAX_PROPS


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    max_residual: float
    objective: float
    support_size: int = 0
    objective_name: str = "entropy"

    def __str__(self) -> str:
        return (
            f"iterations={self.iterations} max_residual={self.max_residual:.3e} "
            f"{self.objective_name}={self.objective:.12g} support={self.support_size}"
        )


def max_residual(weights: np.ndarray, constraints: Iterable[LinearConstraint]) -> float:
    r = [abs(c.residual(weights)) for c in constraints]
    r.append(abs(float(np.sum(weights)) - 1.0))
    return max(r)


_ZERO = 1e-14


def _reduce_support(rows: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Drop events that a one-signed homogeneous row forces to zero.

    A row ``d`` with ``E_p[d] = 0`` and ``d >= 0`` on the support can only
    hold if ``p`` vanishes wherever ``d > 0``; this handles probability-0/1
    statements exactly instead of sending multipliers to infinity.
    """
    support = support.copy()
    changed = True
    while changed and support.any():
        changed = False
        for d in rows:
            ds = d[support]
            pos = ds > _ZERO
            neg = ds < -_ZERO
            if pos.any() and not neg.any():
                kill = pos
            elif neg.any() and not pos.any():
                kill = neg
            else:
                continue
            idx = np.flatnonzero(support)[kill]
            support[idx] = False
            changed = True
    return support


def _i_projection(q: np.ndarray, constraints: Sequence[LinearConstraint], opts: SolverOptions, conflict_cls) -> tuple[np.ndarray, int, float]:
    n = q.size
    cons = list(constraints)
    # homogeneous rows d = c - b * 1, valid because weights sum to one;
    # the normalization row itself becomes zero and drops out
    rows = np.empty((len(cons), n))
    for k, c in enumerate(cons):
        rows[k] = c.dense(n) - c.target
    support = _reduce_support(rows, q > 0)
    if not support.any():
        raise conflict_cls("constraints leave no event with positive probability", cons)
    rows_s = rows[:, support]
    active = np.flatnonzero(np.abs(rows_s).max(axis=1) > _ZERO) if len(cons) else np.array([], dtype=int)
    D = rows_s[active]
    logq = np.log(q[support] / q[support].sum())
    lam = np.zeros(len(active))

    def state(lmb):
        z = logq + lmb @ D
        lz = logsumexp(z)
        return lz, np.exp(z - lz)

    f, p = state(lam)
    it = 0
    best = math.inf
    since_best = 0
    while True:
        g = D @ p
        res = float(np.abs(g).max()) if g.size else 0.0
        # one extra Newton step is cheap and keeps the reported residual
        # comfortably inside tol after renormalization
        if res <= opts.tol * 1e-2:
            break
        if res < best * 0.99:
            best = res
            since_best = 0
        else:
            since_best += 1
        if since_best >= opts.stall_iter and res > opts.stall_tol:
            raise InfeasibleError(
                f"residual stalled at {res:.3e} after {it} iterations",
                [cons[active[k]] for k in np.flatnonzero(np.abs(g) > opts.stall_tol)],
            )
        if it >= opts.max_iter:
            raise ConvergenceError(f"no convergence in {it} iterations (residual {res:.3e})")
        it += 1
        Dp = D * p
        H = Dp @ D.T - np.outer(g, g)
        H[np.diag_indices_from(H)] += 1e-12 * max(1.0, float(np.trace(H)))
        step = np.linalg.lstsq(H, -g, rcond=None)[0]
        slope = float(g @ step)
        if slope >= 0:  # numerically singular Hessian: fall back to gradient
            step = -g
            slope = -float(g @ g)
        t = 1.0
        noise = 8 * np.finfo(float).eps * max(1.0, abs(f))
        while True:
            f_new, p_new = state(lam + t * step)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * t * slope:
                # near the optimum the decrease drowns in rounding; insist
                # on a smaller residual instead
                if f - f_new > noise or float(np.abs(D @ p_new).max()) < res:
                    break
            elif np.isfinite(f_new) and f_new - f <= noise and float(np.abs(D @ p_new).max()) < res:
                break
            t *= 0.5
            if t < 1e-20:
                break
        if t < 1e-20:
            # no descent possible: either the optimum is reached to machine
            # precision or the dual is unbounded (infeasible)
            if res <= opts.tol:
                break
            if res > opts.stall_tol:
                raise InfeasibleError(f"line search failed at residual {res:.3e}", cons)
            raise ConvergenceError(f"line search failed at residual {res:.3e}")
        lam = lam + t * step
        f, p = f_new, p_new

    w = np.zeros(n)
    w[support] = p
    return w, it, res


def max_entropy(
    props: Sequence[str], constraints: Sequence[LinearConstraint], opts: SolverOptions = SolverOptions()
) -> tuple[JointDistribution, SolverReport]:
    """Maximum-entropy joint satisfying ``constraints``."""
    base = uniform_joint(props, opts.max_props)
    w, it, _ = _i_projection(base.weights, constraints, opts, InfeasibleError)
    jd = JointDistribution(base.props, w / w.sum())
    rep = SolverReport(it, max_residual(jd.weights, constraints), entropy(jd), int((w > 0).sum()), "entropy")
    log.debug("max_entropy: %s", rep)
    return jd, rep


def min_cross_entropy(
    prior: JointDistribution, constraints: Sequence[LinearConstraint], opts: SolverOptions = SolverOptions()
) -> tuple[JointDistribution, SolverReport]:
    """Posterior closest to ``prior`` in KL divergence among those satisfying
    ``constraints``.  Returns ``prior`` itself when it already complies."""
    n = prior.weights.size
    for c in constraints:
        if c.indices.size and c.indices.max() >= n:
            raise ValueError(f"constraint {c.label!r} does not fit {prior.m} propositions")
    res0 = max_residual(prior.weights, constraints)
    if res0 <= opts.tol:
        return prior, SolverReport(0, res0, 0.0, int((prior.weights > 0).sum()), "cross_entropy")
    w, it, _ = _i_projection(prior.weights, constraints, opts, SupportConflictError)
    post = JointDistribution(prior.props, w / w.sum())
    rep = SolverReport(
        it, max_residual(post.weights, constraints), cross_entropy(post, prior), int((w > 0).sum()), "cross_entropy"
    )
    log.debug("min_cross_entropy: %s", rep)
    return post, rep


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def write_joint_csv(jd: JointDistribution, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow([*jd.props, "weight"])
    bits = _bits(jd.m)
    cols = np.stack([b.astype(int) for b in bits], axis=1) if jd.m else np.zeros((1, 0), int)
    for i, weight in enumerate(jd.weights):
        w.writerow([*cols[i].tolist(), f"{weight:.17g}"])


def joint_to_csv(jd: JointDistribution) -> str:
    buf = io.StringIO()
    write_joint_csv(jd, buf)
    return buf.getvalue()


def read_joint_csv(src: TextIO) -> JointDistribution:
    rows = list(csv.reader(src))
    header, body = rows[0], rows[1:]
    if header[-1] != "weight":
        raise ValueError("last column must be 'weight'")
    props = tuple(header[:-1])
    w = np.zeros(1 << len(props))
    for r in body:
        idx = sum(int(b) << j for j, b in enumerate(r[:-1]))
        w[idx] = float(r[-1])
    return JointDistribution(props, w)
