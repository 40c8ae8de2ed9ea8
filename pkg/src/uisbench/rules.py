"""Propositions, Boolean formulas, rules and case evidence.

Rule sets are written in a small line-oriented language::

    # comments run to end of line
    prop swollen, sick, male leaf
    prop preg goal
    P(preg | swollen & sick) = 0.4
    P(preg | male) = 0%
    P(exactly 1 of {A, B, C}) = 95%

Statements are separated by newlines or ``;``.  ``P(name) = v`` with a bare
proposition name is a prior; any other unconditional formula becomes a rule
whose antecedent is ``TRUE``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Union


class Kind(str, Enum):
    LEAF = "leaf"
    MID = "mid"
    GOAL = "goal"


KEYWORDS = frozenset({"prop", "or", "exactly", "of", "leaf", "mid", "goal"})


# --------------------------------------------------------------------------
# formulas
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Top:
    """The constant TRUE; antecedent of unconditional statements."""


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Not:
    operand: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class ExactlyK:
    names: tuple[str, ...]
    k: int


Formula = Union[Top, Var, Not, And, Or, ExactlyK]
TRUE = Top()


def variables(f: Formula) -> set[str]:
    if isinstance(f, Var):
        return {f.name}
    if isinstance(f, Not):
        return variables(f.operand)
    if isinstance(f, (And, Or)):
        return variables(f.left) | variables(f.right)
    if isinstance(f, ExactlyK):
        return set(f.names)
    return set()


def evaluate(f: Formula, assignment: Mapping[str, bool]) -> bool:
    if isinstance(f, Top):
        return True
    if isinstance(f, Var):
        return bool(assignment[f.name])
    if isinstance(f, Not):
        return not evaluate(f.operand, assignment)
    if isinstance(f, And):
        return evaluate(f.left, assignment) and evaluate(f.right, assignment)
    if isinstance(f, Or):
        return evaluate(f.left, assignment) or evaluate(f.right, assignment)
    if isinstance(f, ExactlyK):
        return sum(bool(assignment[n]) for n in f.names) == f.k
    raise TypeError(f"not a formula: {f!r}")


def literals(f: Formula) -> list[tuple[str, bool]] | None:
    """Return ``[(name, positive), ...]`` if ``f`` is a conjunction of literals.

    ``TRUE`` gives an empty list; anything else (disjunction, EXACTLY-K,
    negated compound) gives None.
    """
    if isinstance(f, Top):
        return []
    if isinstance(f, Var):
        return [(f.name, True)]
    if isinstance(f, Not) and isinstance(f.operand, Var):
        return [(f.operand.name, False)]
    if isinstance(f, And):
        left, right = literals(f.left), literals(f.right)
        if left is None or right is None:
            return None
        return left + right
    return None


_PREC = {Or: 1, And: 2}


def render_formula(f: Formula) -> str:
    if isinstance(f, Top):
        return "TRUE"
    if isinstance(f, Var):
        return f.name
    if isinstance(f, ExactlyK):
        return f"exactly {f.k} of {{{', '.join(f.names)}}}"
    if isinstance(f, Not):
        inner = render_formula(f.operand)
        if isinstance(f.operand, (And, Or)):
            inner = f"({inner})"
        return "~" + inner
    op = " & " if isinstance(f, And) else " or "
    prec = _PREC[type(f)]
    left = render_formula(f.left)
    right = render_formula(f.right)
    # binary operators are left-associative: a same-precedence right child
    # needs parentheses to survive a round trip
    if type(f.left) in _PREC and _PREC[type(f.left)] < prec:
        left = f"({left})"
    if type(f.right) in _PREC and _PREC[type(f.right)] <= prec:
        right = f"({right})"
    return left + op + right


# --------------------------------------------------------------------------
# rule sets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Proposition:
    name: str
    kind: Kind | None = None


@dataclass(frozen=True)
class Rule:
    consequent: Formula
    antecedent: Formula = TRUE
    strength: float = 1.0

    @property
    def is_conditional(self) -> bool:
        return not isinstance(self.antecedent, Top)

    def render(self) -> str:
        body = render_formula(self.consequent)
        if self.is_conditional:
            body += " | " + render_formula(self.antecedent)
        return f"P({body}) = {self.strength!r}"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    maxent_ok: bool = False

    def __str__(self) -> str:
        suffix = " [propagation engines only]" if self.maxent_ok else ""
        return f"{self.code}: {self.message}{suffix}"


class RuleSetError(ValueError):
    def __init__(self, code: str, message: str, line: int | None = None, col: int | None = None):
        self.code = code
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(f"{where}{code}: {message}")


class RuleSyntaxError(RuleSetError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__("syntax-error", message, line, col)


@dataclass(frozen=True)
class RuleSet:
    propositions: tuple[Proposition, ...]
    rules: tuple[Rule, ...] = ()
    priors: Mapping[str, float] = field(default_factory=dict)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.propositions)

    def edges(self) -> set[tuple[str, str]]:
        """Antecedent-to-consequent edges of every conditional rule."""
        out = set()
        for r in self.rules:
            if r.is_conditional:
                for a in variables(r.antecedent):
                    for c in variables(r.consequent):
                        out.add((a, c))
        return out

    def classify(self) -> dict[str, Kind]:
        """Node class from topology: never a consequent -> leaf, never an
        antecedent -> goal, otherwise mid."""
        edges = self.edges()
        heads = {c for _, c in edges}
        tails = {a for a, _ in edges}
        out = {}
        for name in self.names:
            if name not in heads:
                out[name] = Kind.LEAF
            elif name not in tails:
                out[name] = Kind.GOAL
            else:
                out[name] = Kind.MID
        return out

    def kind(self, name: str) -> Kind:
        for p in self.propositions:
            if p.name == name and p.kind is not None:
                return p.kind
        return self.classify()[name]

    def of_kind(self, kind: Kind) -> tuple[str, ...]:
        return tuple(n for n in self.names if self.kind(n) is kind)

    @property
    def leaves(self) -> tuple[str, ...]:
        return self.of_kind(Kind.LEAF)

    @property
    def intermediates(self) -> tuple[str, ...]:
        return self.of_kind(Kind.MID)

    @property
    def conclusions(self) -> tuple[str, ...]:
        return self.of_kind(Kind.GOAL)

    def ancestors(self, name: str) -> set[str]:
        parents: dict[str, set[str]] = {}
        for a, c in self.edges():
            parents.setdefault(c, set()).add(a)
        seen: set[str] = set()
        stack = [name]
        while stack:
            for a in parents.get(stack.pop(), ()):
                if a not in seen:
                    seen.add(a)
                    stack.append(a)
        return seen

    def with_strength(self, index: int, strength: float) -> "RuleSet":
        rules = list(self.rules)
        r = rules[index]
        rules[index] = Rule(r.consequent, r.antecedent, strength)
        return RuleSet(self.propositions, tuple(rules), dict(self.priors))


@dataclass(frozen=True)
class Evidence:
    values: Mapping[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def __contains__(self, name: object) -> bool:
        return name in self.values

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def items(self):
        return self.values.items()


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def _cyclic_components(nodes, edges) -> list[list[str]]:
    succ: dict[str, set[str]] = {n: set() for n in nodes}
    for a, c in edges:
        succ.setdefault(a, set()).add(c)
        succ.setdefault(c, set())

    def reach(start):
        seen: set[str] = set()
        stack = list(succ[start])
        while stack:
            n = stack.pop()
            if n not in seen:
                seen.add(n)
                stack.extend(succ[n])
        return seen

    reachable = {n: reach(n) for n in succ}
    comps = set()
    for n in succ:
        if n in reachable[n]:
            comps.add(tuple(sorted(m for m in reachable[n] if n in reachable[m])))
    return [list(c) for c in sorted(comps)]


def _check_range(v: float) -> bool:
    return 0.0 <= v <= 1.0


def validate(rs: RuleSet) -> list[Diagnostic]:
    """All invariant violations of ``rs``, sorted; empty when valid.

    Cycles in the single-consequent rule graph are reported with
    ``maxent_ok=True``: the maximum-entropy engine accepts them.
    """
    diags: list[Diagnostic] = []
    names = [p.name for p in rs.propositions]
    declared = set(names)
    for n in sorted({n for n in names if names.count(n) > 1}):
        diags.append(Diagnostic("duplicate-proposition", f"{n} declared more than once"))
    for n in sorted(declared & KEYWORDS):
        diags.append(Diagnostic("reserved-name", f"{n} is a keyword"))

    for name, v in sorted(rs.priors.items()):
        if name not in declared:
            diags.append(Diagnostic("unknown-proposition", f"prior on undeclared {name}"))
        if not _check_range(v):
            diags.append(Diagnostic("probability-out-of-range", f"P({name}) = {v}"))

    for r in rs.rules:
        text = r.render()
        for n in sorted((variables(r.consequent) | variables(r.antecedent)) - declared):
            diags.append(Diagnostic("unknown-proposition", f"{n} in {text}"))
        if not _check_range(r.strength):
            diags.append(Diagnostic("probability-out-of-range", text))
        for f in (r.consequent, r.antecedent):
            for sub in _subformulas(f):
                if isinstance(sub, ExactlyK) and not 0 <= sub.k <= len(sub.names):
                    diags.append(Diagnostic("bad-exactly-k", f"k={sub.k} in {text}"))
        if isinstance(r.consequent, Top):
            diags.append(Diagnostic("empty-consequent", text))

    topo = rs.classify()
    edges = rs.edges()
    heads = {c for _, c in edges}
    tails = {a for a, _ in edges}
    for p in rs.propositions:
        if p.kind is None or p.name not in topo:
            continue
        bad = (
            (p.kind is Kind.LEAF and p.name in heads)
            or (p.kind is Kind.GOAL and p.name in tails)
            or (p.kind is Kind.MID and not (p.name in heads and p.name in tails))
        )
        if bad:
            diags.append(
                Diagnostic("kind-mismatch", f"{p.name} declared {p.kind.value}, topology says {topo[p.name].value}")
            )

    single = {
        (a, c)
        for r in rs.rules
        if r.is_conditional and isinstance(r.consequent, Var)
        for a in variables(r.antecedent)
        for c in variables(r.consequent)
    }
    for comp in _cyclic_components(declared, single):
        diags.append(Diagnostic("cycle", "rule cycle through " + ", ".join(comp), maxent_ok=True))

    return sorted(set(diags), key=lambda d: (d.code, d.message))


def propagation_diagnostics(rs: RuleSet) -> list[Diagnostic]:
    """Extra shape checks for the propagation engines.

    Conditional rules must have a single proposition as consequent and a
    conjunction of literals as antecedent.  Unconditional rules are not
    checked; the engines ignore them.
    """
    diags = list(validate(rs))
    for r in rs.rules:
        if not r.is_conditional:
            continue
        if not isinstance(r.consequent, Var):
            diags.append(Diagnostic("non-atomic-consequent", r.render(), maxent_ok=True))
        if literals(r.antecedent) is None:
            diags.append(Diagnostic("non-conjunctive-antecedent", r.render(), maxent_ok=True))
    return sorted(set(diags), key=lambda d: (d.code, d.message))


def _subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, Not):
        yield from _subformulas(f.operand)
    elif isinstance(f, (And, Or)):
        yield from _subformulas(f.left)
        yield from _subformulas(f.right)


# --------------------------------------------------------------------------
# tokenizer / parser
# --------------------------------------------------------------------------


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[()|=&~{},;%])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    type: str  # name | number | op | end
    value: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            tokens.append(Token("op", ";", line, col))
            line += 1
            line_start = m.end()
        elif kind in ("number", "name", "op"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("end", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        return RuleSyntaxError(msg, tok.line, tok.col)

    def at(self, value: str) -> bool:
        return self.tok.type in ("op", "name") and self.tok.value == value

    def expect(self, value: str) -> Token:
        if not self.at(value):
            found = self.tok.value or "end of input"
            raise self.error(f"expected {value!r}, found {found!r}")
        return self.advance()

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def name(self) -> Token:
        if self.tok.type != "name" or self.tok.value in KEYWORDS:
            raise self.error(f"expected a proposition name, found {self.tok.value or 'end of input'!r}")
        return self.advance()

    def statements(self) -> Iterator[Token]:
        """Yield the first token of every statement and leave the cursor on it."""
        while self.tok.type != "end":
            if self.at(";"):
                self.advance()
                continue
            start = self.tok
            yield start
            if not (self.at(";") or self.tok.type == "end"):
                raise self.error(f"expected end of statement, found {self.tok.value!r}")

    def probability(self) -> tuple[float, Token]:
        tok = self.tok
        if tok.type != "number":
            raise self.error(f"expected a probability, found {tok.value or 'end of input'!r}")
        self.advance()
        v = float(tok.value)
        if self.at("%"):
            self.advance()
            v /= 100.0
        if not _check_range(v):
            raise RuleSetError("probability-out-of-range", f"{tok.value} is not in [0, 1]", tok.line, tok.col)
        return v, tok

    # formula := disj ; disj := conj ('or' conj)* ; conj := unary ('&' unary)*
    def formula(self) -> Formula:
        f = self.conjunction()
        while self.at("or"):
            self.advance()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.at("&"):
            self.advance()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        if self.at("~"):
            self.advance()
            return Not(self.unary())
        if self.at("("):
            self.advance()
            f = self.formula()
            self.expect(")")
            return f
        if self.at("exactly"):
            self.advance()
            ktok = self.tok
            if ktok.type != "number" or not ktok.value.isdigit():
                raise self.error("expected an integer after 'exactly'")
            self.advance()
            self.expect("of")
            self.expect("{")
            names = [self.name().value]
            while self.at(","):
                self.advance()
                names.append(self.name().value)
            self.expect("}")
            k = int(ktok.value)
            if k > len(names):
                raise RuleSetError("bad-exactly-k", f"k={k} exceeds set size {len(names)}", ktok.line, ktok.col)
            return ExactlyK(tuple(names), k)
        return Var(self.name().value)


def _check_names(f: Formula, declared: set[str], tok: Token) -> None:
    for n in sorted(variables(f) - declared):
        raise RuleSetError("unknown-proposition", f"{n} is not declared", tok.line, tok.col)


def parse_ruleset(text: str, *, allow_cycles: bool = False) -> RuleSet:
    """Parse and validate a rule set.

    With ``allow_cycles=True`` cyclic rule graphs (acceptable to the
    maximum-entropy engine only) are let through.
    """
    p = _Parser(text)
    props: list[Proposition] = []
    rules: list[Rule] = []
    priors: dict[str, float] = {}
    pending: list[tuple[Formula, Token]] = []
    for start in p.statements():
        if p.at("prop"):
            p.advance()
            toks = [p.name()]
            while p.at(","):
                p.advance()
                toks.append(p.name())
            kind = None
            if p.tok.type == "name" and p.tok.value in ("leaf", "mid", "goal"):
                kind = Kind(p.advance().value)
            for t in toks:
                if any(q.name == t.value for q in props):
                    raise RuleSetError("duplicate-proposition", f"{t.value} declared twice", t.line, t.col)
                props.append(Proposition(t.value, kind))
        elif p.at("P"):
            p.advance()
            p.expect("(")
            cons = p.formula()
            ante: Formula = TRUE
            if p.at("|"):
                p.advance()
                ante = p.formula()
            p.expect(")")
            p.expect("=")
            v, _ = p.probability()
            pending.append((cons, start))
            pending.append((ante, start))
            if isinstance(cons, Var) and isinstance(ante, Top):
                if cons.name in priors:
                    raise RuleSetError("duplicate-prior", f"P({cons.name}) given twice", start.line, start.col)
                priors[cons.name] = v
            else:
                rules.append(Rule(cons, ante, v))
        else:
            raise p.error(f"expected 'prop' or 'P(', found {start.value!r}")

    declared = {q.name for q in props}
    for f, tok in pending:
        _check_names(f, declared, tok)

    rs = RuleSet(tuple(props), tuple(rules), priors)
    for d in validate(rs):
        if allow_cycles and d.maxent_ok:
            continue
        raise RuleSetError(d.code, d.message)
    return rs


def render_ruleset(rs: RuleSet) -> str:
    lines = []
    for p in rs.propositions:
        lines.append(f"prop {p.name}" + (f" {p.kind.value}" if p.kind else ""))
    for name, v in rs.priors.items():
        lines.append(f"P({name}) = {v!r}")
    for r in rs.rules:
        lines.append(r.render())
    return "\n".join(lines) + "\n"


def parse_assignments(text: str) -> list[tuple[str, float, Token]]:
    """Parse ``name = p`` statements (evidence and prior files)."""
    p = _Parser(text)
    out = []
    for _ in p.statements():
        t = p.name()
        p.expect("=")
        v, _ = p.probability()
        out.append((t.value, v, t))
    return out


def parse_evidence(text: str, rs: RuleSet) -> Evidence:
    values: dict[str, float] = {}
    leaves = set(rs.leaves)
    for name, v, tok in parse_assignments(text):
        if name not in rs.names:
            raise RuleSetError("unknown-proposition", f"{name} is not declared", tok.line, tok.col)
        if name not in leaves:
            raise RuleSetError("non-leaf-evidence", f"{name} is a {rs.kind(name).value}, not a leaf", tok.line, tok.col)
        if name in values:
            raise RuleSetError("duplicate-evidence", f"{name} given twice", tok.line, tok.col)
        values[name] = v
    return Evidence(values)


def render_evidence(ev: Evidence) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in ev.items())
