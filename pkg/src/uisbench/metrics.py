"""Error measures against reference probabilities, random-guess baselines,
and normalized scores.

A score is 1 for a perfect estimate, 0 for an error equal to that of a
uniformly random guess over the estimator's output domain, and -1 for the
worst possible error; in between it is linear.  Point estimators guess on
[0, 1], MYCIN on CF in [-1, 1] mapped through the prior, and DST on the
triangle of intervals 0 <= a <= b <= 1.  An interval verdict is scored as
a point drawn uniformly from it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engines import EngineKind, NodeVerdict

METRICS = ("abs", "eta", "sq", "zeta")
METRIC_LABELS = {"abs": "|e|", "eta": "eta", "sq": "e^2", "zeta": "zeta"}
CLASSES = ("I", "C", "IC")


def _check_prob(*ps: float) -> None:
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p!r} outside [0, 1]")


def point_errors(estimate: float, reference: float) -> tuple[float, float]:
    _check_prob(estimate, reference)
    e = estimate - reference
    return abs(e), e * e


def interval_abs_error(a, b, p):
    """E|x - p| for x uniform on [a, b]; vectorized over numpy arrays."""
    a, b, p = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, p)))
    mid = (a + b) / 2
    width = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = ((p - a) ** 2 + (b - p) ** 2) / (2 * width)
    out = np.where(p <= a, mid - p, np.where(p >= b, p - mid, inside))
    out = np.where(width <= 0, np.abs(a - p), out)
    return out if out.ndim else float(out)


def interval_sq_error(a, b, p):
    """E(x - p)^2 for x uniform on [a, b]; vectorized."""
    a, b, p = (np.asarray(v, dtype=float) for v in (a, b, p))
    out = ((a + b) / 2 - p) ** 2 + (b - a) ** 2 / 12
    return out if np.ndim(out) else float(out)


def interval_errors(a: float, b: float, reference: float) -> tuple[float, float]:
    _check_prob(a, b, reference)
    if a > b:
        raise ValueError(f"interval [{a}, {b}] is reversed")
    return float(interval_abs_error(a, b, reference)), float(interval_sq_error(a, b, reference))


def _xlogx3(x: float) -> float:
    return 0.0 if x <= 0 else x**3 * math.log(x)


def random_guess_baseline(kind: EngineKind, p: float, p0: float | None = None) -> tuple[float, float]:
    """Expected (absolute, squared) error of a uniform random guess."""
    _check_prob(p)
    kind = EngineKind(kind)
    q = p * (1 - p)
    if kind is EngineKind.MYCIN:
        if p0 is None:
            raise ValueError("the MYCIN baseline needs the prior p0")
        if not 0.0 < p0 < 1.0:
            raise ValueError(f"prior {p0!r} must lie strictly inside (0, 1)")
        Q = p0 if p < p0 else 1 - p0
        mu_abs = (2 * (p * p + p0 * p0) + Q - 4 * p * p0) / (4 * Q)
        mu_sq = (2 * p0 * p0 - 6 * p * p0 + 6 * p * p + 1 + p0 - 3 * p) / 6
        return mu_abs, mu_sq
    if kind is EngineKind.DST:
        mu_abs = (
            31 / 18 * (p**3 + (1 - p) ** 3)
            + 3.5 * q
            - 2 / 3 * (_xlogx3(p) + _xlogx3(1 - p))
            - 11 / 9
        )
        return mu_abs, 11 / 36 - q
    return 0.5 - q, 1 / 3 - q


def worst_errors(p: float) -> tuple[float, float]:
    return max(p, 1 - p), max(p * p, (1 - p) ** 2)


def normalize(err: float, mu: float, worst: float) -> float:
    """Piecewise-linear score: err 0 -> 1, err mu -> 0, err worst -> -1."""
    if err < 0 or mu < 0:
        raise ValueError("errors are nonnegative")
    if mu > worst + 1e-15:
        raise ValueError(f"baseline {mu!r} exceeds the worst case {worst!r}")
    if err <= mu:
        score = 1.0 if mu == 0 else 1.0 - err / mu
    elif worst <= mu:
        score = -1.0
    else:
        score = -(err - mu) / (worst - mu)
    return min(1.0, max(-1.0, score))


@dataclass(frozen=True)
class ErrorSample:
    node: str
    engine: EngineKind
    node_class: str
    reference: float
    prior: float | None
    abs_err: float
    sq_err: float
    eta: float
    zeta: float

    def metric(self, name: str) -> float:
        return {"abs": self.abs_err, "sq": self.sq_err, "eta": self.eta, "zeta": self.zeta}[name]


def score(
    engine: EngineKind, verdict: NodeVerdict, reference: float, node_class: str, prior: float | None = None
) -> ErrorSample:
    engine = EngineKind(engine)
    if verdict.interval is not None:
        abs_err, sq_err = interval_errors(*verdict.interval, reference)
    else:
        abs_err, sq_err = point_errors(verdict.point, reference)
    mu_abs, mu_sq = random_guess_baseline(engine, reference, prior)
    w_abs, w_sq = worst_errors(reference)
    return ErrorSample(
        verdict.node,
        engine,
        node_class,
        reference,
        prior,
        abs_err,
        sq_err,
        normalize(abs_err, mu_abs, w_abs),
        normalize(sq_err, mu_sq, w_sq),
    )


@dataclass(frozen=True)
class ComparisonReport:
    engines: tuple[EngineKind, ...]
    classes: tuple[str, ...]
    values: Mapping[tuple[EngineKind, str, str], float]
    counts: Mapping[tuple[EngineKind, str], int] = field(default_factory=dict)
    title: str = ""

    def get(self, engine: EngineKind, node_class: str, metric: str) -> float:
        return self.values[(EngineKind(engine), node_class, metric)]

    def to_table(self) -> str:
        head = ["", ""] + [e.label for e in self.engines]
        rows = [head]
        for metric in METRICS:
            for k, cls in enumerate(self.classes):
                rows.append(
                    [METRIC_LABELS[metric] if k == 0 else "", cls]
                    + [f"{self.get(e, cls, metric):.3f}" for e in self.engines]
                )
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        if self.title:
            lines.insert(0, self.title)
        return "\n".join(lines) + "\n"

    def to_csv(self, header: bool = True, case: str | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["engine", "class", "metric", "value"]
        if case is not None:
            cols.insert(0, "case")
        if header:
            w.writerow(cols)
        for e in self.engines:
            for cls in self.classes:
                for metric in METRICS:
                    row = [e.label, cls, metric, repr(self.get(e, cls, metric))]
                    if case is not None:
                        row.insert(0, case)
                    w.writerow(row)
        return buf.getvalue()


def aggregate(
    samples: Iterable[ErrorSample],
    classes: Sequence[str] = CLASSES,
    engines: Sequence[EngineKind] | None = None,
    title: str = "",
) -> ComparisonReport:
    """Means of each metric per engine and node class.

    ``"IC"`` pools intermediates and conclusions.  A requested class with
    no samples for some engine is an error.
    """
    samples = list(samples)
    if engines is None:
        engines = tuple(dict.fromkeys(s.engine for s in samples))
    engines = tuple(EngineKind(e) for e in engines)
    values = {}
    counts = {}
    for e in engines:
        for cls in classes:
            members = ("I", "C") if cls == "IC" else (cls,)
            group = [s for s in samples if s.engine is e and s.node_class in members]
            if not group:
                raise ValueError(f"no samples for engine {e.label} in class {cls}")
            counts[(e, cls)] = len(group)
            for metric in METRICS:
                values[(e, cls, metric)] = math.fsum(s.metric(metric) for s in group) / len(group)
    return ComparisonReport(engines, tuple(classes), values, counts, title)
