"""Dempster-Shafer frames, mass functions and compatibility-relation beliefs.

Subsets of a frame are int bitmasks over its basic events.  Belief in a
target subset ``tau`` induced by a source distribution and a
compatibility relation is the source mass of those ``s`` whose every
compatible target lies inside ``tau``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rules import RuleSyntaxError, tokenize

MAX_FRAME = 16


@dataclass(frozen=True)
class Frame:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        if not 1 <= len(labels) <= MAX_FRAME:
            raise ValueError(f"frame needs 1..{MAX_FRAME} basic events, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in frame")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def subset(self, labels: Iterable[str]) -> int:
        mask = 0
        for lab in labels:
            try:
                mask |= 1 << self.labels.index(lab)
            except ValueError:
                raise ValueError(f"{lab!r} is not in the frame") from None
        return mask

    def members(self, mask: int) -> tuple[str, ...]:
        self.check(mask)
        return tuple(lab for j, lab in enumerate(self.labels) if mask >> j & 1)

    def check(self, mask: int) -> int:
        if not 0 <= mask <= self.full:
            raise ValueError(f"subset {mask:#x} lies outside the frame")
        return mask

    def render(self, mask: int) -> str:
        return "{" + ", ".join(self.members(mask)) + "}"


@dataclass(frozen=True)
class MassFunction:
    frame: Frame
    masses: Mapping[int, float]

    def __post_init__(self):
        clean = {}
        for s, v in self.masses.items():
            self.frame.check(s)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"mass {v!r} outside [0, 1]")
            if v > 0:
                if s == 0:
                    raise ValueError("the empty set cannot carry mass")
                clean[s] = v
        if abs(sum(clean.values()) - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {sum(clean.values())!r}")
        object.__setattr__(self, "masses", clean)

    @classmethod
    def vacuous(cls, frame: Frame) -> "MassFunction":
        return cls(frame, {frame.full: 1.0})


@dataclass(frozen=True)
class BeliefInterval:
    support: float
    plausibility: float

    def __post_init__(self):
        if not 0.0 <= self.support <= self.plausibility <= 1.0 + 1e-12:
            raise ValueError(f"bad interval [{self.support}, {self.plausibility}]")

    def __iter__(self):
        return iter((self.support, self.plausibility))


@dataclass(frozen=True, eq=False)
class CompatibilityRelation:
    """``matrix[s, t]`` is True iff source event s can co-occur with target t."""

    source: Frame
    target: Frame
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=bool)
        if m.shape != (self.source.n, self.target.n):
            raise ValueError(f"matrix shape {m.shape} does not match frames")
        if not m.any(axis=1).all():
            bad = [self.source.labels[i] for i in np.flatnonzero(~m.any(axis=1))]
            raise ValueError(f"source events compatible with nothing: {bad}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def focal(self, s: int) -> int:
        """Bitmask of targets compatible with source event ``s``."""
        return int(sum(1 << j for j in np.flatnonzero(self.matrix[s])))

    @classmethod
    def from_joint(cls, source: Frame, target: Frame, p_st: np.ndarray) -> "CompatibilityRelation":
        return cls(source, target, np.asarray(p_st) > 0)


def _check_dist(p: Sequence[float], frame: Frame) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (frame.n,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("source distribution must be a probability vector over the source frame")
    return p


def bel_from_masses(m: MassFunction, tau: int) -> float:
    m.frame.check(tau)
    return float(sum(v for s, v in m.masses.items() if s & ~tau == 0))


def pl_from_masses(m: MassFunction, tau: int) -> float:
    return 1.0 - bel_from_masses(m, m.frame.full & ~tau)


def masses_from_compatibility(p_s: Sequence[float], rel: CompatibilityRelation) -> MassFunction:
    p = _check_dist(p_s, rel.source)
    masses: dict[int, float] = {}
    for s, ps in enumerate(p):
        if ps > 0:
            f = rel.focal(s)
            masses[f] = masses.get(f, 0.0) + float(ps)
    return MassFunction(rel.target, masses)


def bel_from_compatibility(p_s: Sequence[float], rel: CompatibilityRelation, tau: int) -> float:
    """Source probability of the events all of whose compatible targets lie in ``tau``."""
    p = _check_dist(p_s, rel.source)
    rel.target.check(tau)
    inside = [s for s in range(rel.source.n) if rel.focal(s) & ~tau == 0]
    return float(p[inside].sum()) if inside else 0.0


def bel_max_form(p_s: Sequence[float], rel: CompatibilityRelation, tau: int) -> float:
    """Same belief as a maximum over source subsets sigma whose every member
    has conditional target probability 1 on ``tau``, found by enumeration."""
    p = _check_dist(p_s, rel.source)
    rel.target.check(tau)
    best = 0.0
    for sigma in range(1 << rel.source.n):
        members = [s for s in range(rel.source.n) if sigma >> s & 1]
        # p_ST(tau | s) = 1 iff every compatible target lies in tau
        if all(rel.focal(s) & ~tau == 0 for s in members):
            best = max(best, float(p[members].sum()) if members else 0.0)
    return best


def interval(p_s: Sequence[float], rel: CompatibilityRelation, tau: int) -> BeliefInterval:
    a = bel_from_compatibility(p_s, rel, tau)
    b = 1.0 - bel_from_compatibility(p_s, rel, rel.target.full & ~tau)
    return BeliefInterval(a, max(a, b))


def interval_from_masses(m: MassFunction, tau: int) -> BeliefInterval:
    a = bel_from_masses(m, tau)
    return BeliefInterval(a, max(a, pl_from_masses(m, tau)))


# --------------------------------------------------------------------------
# the icy-streets example and its perturbation
# --------------------------------------------------------------------------

ICY_SOURCE = Frame(("s1", "s2"))  # careful and honest / careless
ICY_TARGET = Frame(("t1", "t2"))  # not icy / icy
ICY_P_S = (0.8, 0.2)


def icy_joint(beta: float = 0.0, alpha: float = 0.1) -> np.ndarray:
    """Joint p_ST over (s, t).  ``beta`` is the remote chance that a careful
    report is still wrong; ``alpha`` splits the careless mass."""
    if not 0.0 <= beta <= 0.8:
        raise ValueError(f"beta {beta!r} outside [0, 0.8]")
    if not 0.0 < alpha < 0.2:
        raise ValueError(f"alpha {alpha!r} outside (0, 0.2)")
    return np.array([[0.8 - beta, beta], [alpha, 0.2 - alpha]])


@dataclass(frozen=True)
class PathologyRow:
    beta: float
    bel_t1: float
    bel_t2: float
    bel_t: float


def pathology_sweep(betas: Iterable[float]) -> list[PathologyRow]:
    rows = []
    for beta in betas:
        if not 0.0 <= beta <= 0.2:
            raise ValueError(f"beta {beta!r} outside [0, 0.2]")
        rel = CompatibilityRelation.from_joint(ICY_SOURCE, ICY_TARGET, icy_joint(beta))
        t1, t2 = ICY_TARGET.subset(["t1"]), ICY_TARGET.subset(["t2"])
        rows.append(
            PathologyRow(
                beta,
                bel_from_compatibility(ICY_P_S, rel, t1),
                bel_from_compatibility(ICY_P_S, rel, t2),
                bel_from_compatibility(ICY_P_S, rel, ICY_TARGET.full),
            )
        )
    return rows


def pathology_csv(rows: Iterable[PathologyRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "bel_t1", "bel_t2"])
    for r in rows:
        w.writerow([repr(r.beta), repr(r.bel_t1), repr(r.bel_t2)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# text format
# --------------------------------------------------------------------------


@dataclass
class BeliefSpec:
    """Contents of a belief file: optional masses and/or a compatibility setup."""

    masses: MassFunction | None = None
    relation: CompatibilityRelation | None = None
    p_source: tuple[float, ...] | None = None
    target: Frame | None = None


def parse_belief(text: str) -> BeliefSpec:
    """Parse belief statements::

        frame {t1, t2}          # optional; fixes the target frame order
        mass {t1} = 0.8
        compat s1 ~ {t1}
        p s1 = 0.8

    Frames not declared are taken in order of first appearance.
    """
    toks = tokenize(text)
    i = 0

    def tok():
        return toks[i]

    def err(msg):
        return RuleSyntaxError(msg, tok().line, tok().col)

    def expect(v):
        nonlocal i
        if tok().value != v:
            raise err(f"expected {v!r}, found {tok().value or 'end of input'!r}")
        i += 1

    def name():
        nonlocal i
        if tok().type != "name":
            raise err("expected a label")
        i += 1
        return toks[i - 1].value

    def label_set():
        expect("{")
        out = [name()]
        while tok().value == ",":
            expect(",")
            out.append(name())
        expect("}")
        return out

    def number():
        nonlocal i
        if tok().type != "number":
            raise err("expected a number")
        i += 1
        v = float(toks[i - 1].value)
        if tok().value == "%":
            i += 1
            v /= 100
        return v

    declared: list[str] | None = None
    targets: list[str] = []
    sources: list[str] = []
    masses: list[tuple[list[str], float]] = []
    compat: dict[str, list[str]] = {}
    probs: dict[str, float] = {}

    def see(labels, bucket):
        for lab in labels:
            if lab not in bucket:
                bucket.append(lab)

    while tok().type != "end":
        if tok().value == ";":
            i += 1
            continue
        head = name()
        if head == "frame":
            declared = label_set()
        elif head == "mass":
            s = label_set()
            expect("=")
            masses.append((s, number()))
            see(s, targets)
        elif head == "compat":
            s = name()
            expect("~")
            ts = label_set()
            compat.setdefault(s, []).extend(ts)
            see([s], sources)
            see(ts, targets)
        elif head == "p":
            s = name()
            expect("=")
            probs[s] = number()
            see([s], sources)
        else:
            i -= 1
            raise err(f"unknown statement {head!r}")
        if tok().type != "end" and tok().value != ";":
            raise err("expected end of statement")

    if declared is not None:
        extra = [t for t in targets if t not in declared]
        if extra:
            raise ValueError(f"labels outside the declared frame: {extra}")
        targets = declared
    spec = BeliefSpec()
    if targets:
        spec.target = Frame(tuple(targets))
    if masses:
        ms: dict[int, float] = {}
        for labels, v in masses:
            k = spec.target.subset(labels)
            ms[k] = ms.get(k, 0.0) + v
        spec.masses = MassFunction(spec.target, ms)
    if compat:
        src = Frame(tuple(sources))
        mat = np.zeros((src.n, spec.target.n), dtype=bool)
        for s, ts in compat.items():
            for t in ts:
                mat[src.labels.index(s), spec.target.labels.index(t)] = True
        spec.relation = CompatibilityRelation(src, spec.target, mat)
        if probs:
            spec.p_source = tuple(probs.get(s, 0.0) for s in src.labels)
    return spec
