"""A small forward-chaining kernel over ground atoms and quantified rules.

The kernel stores a theory (declared symbols, rules, ground facts, an
optional goal) and answers two questions: which ground literals can be
derived in exactly one rule application ("step inferences"), and what is the
least fixpoint of the facts under the rules ("closure").  The step list is
the finite action space handed to constrained decoding; closure is the
oracle used to score answers.

Negation here is a literal marker, not classical negation: ``(not P)`` is a
distinct atom that rules may conclude and match on.  Deriving both ``P`` and
``(not P)`` is recorded and queryable but does not explode the theory.

Surface syntax (one declaration or axiom per line in theory files)::

    object:wren
    prop:dumpus
    relation:needs
    axiom:(dumpus 'x) -> (impus 'x)
    axiom:(dumpus wren)
    goal:(orange wren)

Rules are curried: ``a -> b -> c`` parses as antecedents ``[a, b]`` and
consequent ``c``.  Variables are prefixed with an apostrophe.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence


class TheorySyntaxError(ValueError):
    """Unparseable or ill-formed surface syntax."""


class NotDerivable(ValueError):
    """A literal was claimed as an inference but is not in the step set."""


class GoalUnset(ValueError):
    """An operation needed a goal but none is set."""


# ---------------------------------------------------------------------------
# Terms, literals, rules


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"'{self.name}"


@dataclass(frozen=True)
class App:
    """An applied constructor, e.g. an action term ``(accept launch_invite)``."""

    ctor: str
    args: tuple["Term", ...]

    def __str__(self) -> str:
        inner = " ".join(str(a) for a in self.args)
        return f"({self.ctor} {inner})"


Term = Const | Var | App


@dataclass(frozen=True)
class Literal:
    """A possibly negated atom: predicate applied to one or two terms."""

    negated: bool
    name: str
    args: tuple[Term, ...]

    def __str__(self) -> str:
        inner = " ".join(str(a) for a in self.args)
        atom = f"({self.name} {inner})"
        return f"(not {atom})" if self.negated else atom

    def is_ground(self) -> bool:
        return all(_term_ground(a) for a in self.args)

    def complement(self) -> "Literal":
        return Literal(not self.negated, self.name, self.args)


@dataclass(frozen=True)
class Rule:
    antecedents: tuple[Literal, ...]
    consequent: Literal

    def __str__(self) -> str:
        return " -> ".join(str(l) for l in (*self.antecedents, self.consequent))

    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        for lit in (*self.antecedents, self.consequent):
            for term in lit.args:
                out |= _term_vars(term)
        return frozenset(out)


def _term_ground(term: Term) -> bool:
    if isinstance(term, Var):
        return False
    if isinstance(term, App):
        return all(_term_ground(a) for a in term.args)
    return True


def _term_vars(term: Term) -> set[str]:
    if isinstance(term, Var):
        return {term.name}
    if isinstance(term, App):
        out: set[str] = set()
        for a in term.args:
            out |= _term_vars(a)
        return out
    return set()


def complement(lit: Literal) -> Literal:
    return lit.complement()


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(r"\s*(\(|\)|->|'[a-z_][a-z0-9_]*|[a-z_][a-z0-9_]*)")


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise TheorySyntaxError(f"unexpected input at column {pos}: {text[pos:pos + 12]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str], source: str):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None:
            raise TheorySyntaxError(f"unexpected end of input in {self.source!r}")
        if expected is not None and tok != expected:
            raise TheorySyntaxError(f"expected {expected!r}, found {tok!r} in {self.source!r}")
        self.pos += 1
        return tok

    def parse_term(self) -> Term:
        tok = self.take()
        if tok == "(":
            ctor = self.take()
            if ctor in ("(", ")", "->") or ctor.startswith("'"):
                raise TheorySyntaxError(f"bad constructor name {ctor!r} in {self.source!r}")
            if ctor == "not":
                raise TheorySyntaxError(f"negation may only wrap a whole atom in {self.source!r}")
            args: list[Term] = []
            while self.peek() != ")":
                nxt = self.peek()
                if nxt is None:
                    raise TheorySyntaxError(f"unbalanced parentheses in {self.source!r}")
                if nxt == "(":
                    raise TheorySyntaxError(f"constructor arguments must be atoms in {self.source!r}")
                args.append(self.parse_term())
            self.take(")")
            if not args:
                raise TheorySyntaxError(f"constructor {ctor!r} applied to nothing in {self.source!r}")
            return App(ctor, tuple(args))
        if tok.startswith("'"):
            return Var(tok[1:])
        if tok in (")", "->"):
            raise TheorySyntaxError(f"expected a term, found {tok!r} in {self.source!r}")
        return Const(tok)

    def parse_literal(self) -> Literal:
        self.take("(")
        head = self.take()
        if head == "not":
            inner = self.parse_literal()
            self.take(")")
            if inner.negated:
                raise TheorySyntaxError(f"double negation is not supported in {self.source!r}")
            return Literal(True, inner.name, inner.args)
        if head in ("(", ")", "->") or head.startswith("'"):
            raise TheorySyntaxError(f"bad predicate name {head!r} in {self.source!r}")
        args: list[Term] = []
        while self.peek() != ")":
            if self.peek() is None:
                raise TheorySyntaxError(f"unbalanced parentheses in {self.source!r}")
            args.append(self.parse_term())
        self.take(")")
        if not 1 <= len(args) <= 2:
            raise TheorySyntaxError(f"predicate {head!r} must take 1 or 2 arguments in {self.source!r}")
        return Literal(False, head, tuple(args))


def parse_sexpr(text: str, state: "TheoryState | None" = None) -> Literal | Rule:
    """Parse a literal or a curried rule from the arrow surface syntax.

    With ``state`` given, predicate arities are checked against declared
    symbols; parsing is otherwise purely structural.  Printing the result
    with ``str`` yields the canonical (fully parenthesised, lowercase) form.
    """
    parser = _Parser(_tokenize(text), text)
    items: list[Literal] = [parser.parse_literal()]
    while parser.peek() == "->":
        parser.take("->")
        items.append(parser.parse_literal())
    if parser.peek() is not None:
        raise TheorySyntaxError(f"trailing input after expression: {text!r}")

    if state is not None:
        for lit in items:
            state.check_arity(lit)

    if len(items) == 1:
        return items[0]
    rule = Rule(tuple(items[:-1]), items[-1])
    ante_vars: set[str] = set()
    for lit in rule.antecedents:
        for term in lit.args:
            ante_vars |= _term_vars(term)
    cons_vars = set()
    for term in rule.consequent.args:
        cons_vars |= _term_vars(term)
    if cons_vars and not cons_vars <= ante_vars:
        loose = ", ".join(sorted(cons_vars - ante_vars))
        raise TheorySyntaxError(f"consequent variables not bound by antecedents: {loose} in {text!r}")
    return rule


# ---------------------------------------------------------------------------
# Symbols and theory state


class Kind(enum.Enum):
    OBJECT = "object"
    PROP = "prop"
    RELATION = "relation"
    ACTION = "action"


@dataclass(frozen=True)
class Symbol:
    kind: Kind
    name: str
    # objects: optional sort name; actions: argument sorts
    sort: str | None = None
    arg_sorts: tuple[str, ...] = ()


class GoalStatus(enum.Enum):
    PROVED = "proved"
    DISPROVED = "disproved"
    OPEN = "open"


class Answer(enum.Enum):
    TRUE = "True"
    FALSE = "False"
    UNKNOWN = "Unknown"


def answer_from_goal(status: GoalStatus) -> Answer:
    if status is GoalStatus.PROVED:
        return Answer.TRUE
    if status is GoalStatus.DISPROVED:
        return Answer.FALSE
    return Answer.UNKNOWN


@dataclass(frozen=True)
class Derivation:
    fact: Literal
    rule: Rule
    substitution: tuple[tuple[str, Term], ...]


_Subst = dict[str, Term]


@dataclass
class TheoryState:
    """Declared symbols, axioms, facts, and an optional goal.

    ``facts`` is kept as an insertion-ordered mapping so enumeration is
    deterministic; all externally visible orders are nevertheless fixed by
    sorting on canonical printing.
    """

    objects: dict[str, Symbol] = field(default_factory=dict)
    predicates: dict[str, Symbol] = field(default_factory=dict)
    actions: dict[str, Symbol] = field(default_factory=dict)
    rules: list[Rule] = field(default_factory=list)
    facts: dict[Literal, None] = field(default_factory=dict)
    assumptions: set[Literal] = field(default_factory=set)
    goal: Literal | None = None
    derivation_log: list[Derivation] = field(default_factory=list)
    strict: bool = False

    def clone(self) -> "TheoryState":
        return TheoryState(
            objects=dict(self.objects),
            predicates=dict(self.predicates),
            actions=dict(self.actions),
            rules=list(self.rules),
            facts=dict(self.facts),
            assumptions=set(self.assumptions),
            goal=self.goal,
            derivation_log=list(self.derivation_log),
            strict=self.strict,
        )

    # -- declarations ------------------------------------------------------

    def declare(self, symbol: Symbol) -> "TheoryState":
        table = {
            Kind.OBJECT: self.objects,
            Kind.PROP: self.predicates,
            Kind.RELATION: self.predicates,
            Kind.ACTION: self.actions,
        }[symbol.kind]
        existing = table.get(symbol.name)
        if existing is not None and existing != symbol:
            if self.strict:
                raise TheorySyntaxError(f"conflicting declaration of {symbol.name!r}")
            return self  # lenient: first declaration wins
        table[symbol.name] = symbol
        return self

    def arity_of(self, name: str) -> int | None:
        sym = self.predicates.get(name)
        if sym is None:
            return None
        return 1 if sym.kind is Kind.PROP else 2

    def check_arity(self, lit: Literal) -> None:
        declared = self.arity_of(lit.name)
        if declared is not None and declared != len(lit.args):
            raise TheorySyntaxError(
                f"predicate {lit.name!r} declared with arity {declared}, used with {len(lit.args)}"
            )
        if self.strict:
            if declared is None and lit.name not in ("permissible", "obligatory"):
                raise TheorySyntaxError(f"undeclared predicate {lit.name!r}")
            for term in lit.args:
                self._check_term_declared(term)

    def _check_term_declared(self, term: Term) -> None:
        if isinstance(term, Const) and term.name not in self.objects:
            raise TheorySyntaxError(f"undeclared object {term.name!r}")
        if isinstance(term, App):
            if term.ctor not in self.actions:
                raise TheorySyntaxError(f"undeclared action {term.ctor!r}")
            for a in term.args:
                self._check_term_declared(a)

    # -- axioms and facts ----------------------------------------------------

    def add_axiom(self, axiom: Rule | Literal) -> "TheoryState":
        if isinstance(axiom, Rule):
            self.rules.append(axiom)
            return self
        if not axiom.is_ground():
            raise TheorySyntaxError(f"ground axiom expected, got {axiom}")
        self.assumptions.add(axiom)
        self.facts.setdefault(axiom)
        return self

    def set_goal(self, goal: Literal) -> "TheoryState":
        if not goal.is_ground():
            raise TheorySyntaxError(f"goal must be ground, got {goal}")
        self.goal = goal
        return self


# ---------------------------------------------------------------------------
# Inference


def _match_term(pattern: Term, value: Term, subst: _Subst) -> _Subst | None:
    if isinstance(pattern, Var):
        bound = subst.get(pattern.name)
        if bound is None:
            out = dict(subst)
            out[pattern.name] = value
            return out
        return subst if bound == value else None
    if isinstance(pattern, Const):
        return subst if pattern == value else None
    if isinstance(pattern, App) and isinstance(value, App) and pattern.ctor == value.ctor:
        if len(pattern.args) != len(value.args):
            return None
        for p, v in zip(pattern.args, value.args):
            nxt = _match_term(p, v, subst)
            if nxt is None:
                return None
            subst = nxt
        return subst
    return None


def _match_literal(pattern: Literal, fact: Literal, subst: _Subst) -> _Subst | None:
    if pattern.negated != fact.negated or pattern.name != fact.name:
        return None
    if len(pattern.args) != len(fact.args):
        return None
    for p, v in zip(pattern.args, fact.args):
        nxt = _match_term(p, v, subst)
        if nxt is None:
            return None
        subst = nxt
    return subst


def _substitute_term(term: Term, subst: _Subst) -> Term:
    if isinstance(term, Var):
        return subst.get(term.name, term)
    if isinstance(term, App):
        return App(term.ctor, tuple(_substitute_term(a, subst) for a in term.args))
    return term


def substitute(lit: Literal, subst: _Subst) -> Literal:
    return Literal(lit.negated, lit.name, tuple(_substitute_term(a, subst) for a in lit.args))


def _solve(antecedents: Sequence[Literal], idx: int, subst: _Subst, state: TheoryState) -> Iterator[_Subst]:
    if idx == len(antecedents):
        yield subst
        return
    pattern = antecedents[idx]
    for fact in state.facts:
        nxt = _match_literal(pattern, fact, subst)
        if nxt is not None:
            yield from _solve(antecedents, idx + 1, nxt, state)


def step_candidates(state: TheoryState) -> list[tuple[Literal, Rule, _Subst]]:
    """Every one-step derivable literal with one witnessing (rule, substitution).

    Output is deduplicated on the literal and sorted by canonical printing,
    which fixes enumeration order across runs and platforms.
    """
    found: dict[Literal, tuple[Literal, Rule, _Subst]] = {}
    for rule in state.rules:
        for subst in _solve(rule.antecedents, 0, {}, state):
            lit = substitute(rule.consequent, subst)
            if not lit.is_ground():
                continue
            if lit in state.facts or lit in found:
                continue
            found[lit] = (lit, rule, subst)
    return sorted(found.values(), key=lambda item: str(item[0]))


def step_inferences(state: TheoryState) -> list[Literal]:
    """Ground literals derivable in exactly one rule application."""
    return [lit for lit, _, _ in step_candidates(state)]


def assert_fact(state: TheoryState, lit: Literal, derived: bool = False) -> TheoryState:
    """Add a ground literal, as a checked inference or as an assumption."""
    if not lit.is_ground():
        raise NotDerivable(f"facts must be ground: {lit}")
    if derived:
        for candidate, rule, subst in step_candidates(state):
            if candidate == lit:
                state.facts.setdefault(lit)
                state.derivation_log.append(
                    Derivation(lit, rule, tuple(sorted(subst.items())))
                )
                return state
        raise NotDerivable(f"{lit} is not derivable in one step")
    state.assumptions.add(lit)
    state.facts.setdefault(lit)
    return state


def closure(state: TheoryState) -> frozenset[Literal]:
    """Least fixpoint of the facts under the rules.

    Pure: works on a copy.  Terminates because the ground atom space over a
    finite theory is finite and facts only grow.
    """
    work = state.clone()
    while True:
        batch = step_candidates(work)
        if not batch:
            break
        for lit, rule, subst in batch:
            work.facts.setdefault(lit)
            work.derivation_log.append(Derivation(lit, rule, tuple(sorted(subst.items()))))
    return frozenset(work.facts)


def saturate(state: TheoryState) -> TheoryState:
    """In-place closure; returns the same state with facts saturated."""
    while True:
        batch = step_candidates(state)
        if not batch:
            return state
        for lit, rule, subst in batch:
            state.facts.setdefault(lit)
            state.derivation_log.append(Derivation(lit, rule, tuple(sorted(subst.items()))))


def check_goal(state: TheoryState) -> GoalStatus:
    if state.goal is None:
        raise GoalUnset("no goal set")
    if state.goal in state.facts:
        return GoalStatus.PROVED
    if state.goal.complement() in state.facts:
        return GoalStatus.DISPROVED
    return GoalStatus.OPEN


def contradictions(state: TheoryState) -> list[Literal]:
    """Positive literals P with both P and (not P) present."""
    out = [lit for lit in state.facts if not lit.negated and lit.complement() in state.facts]
    return sorted(out, key=str)


# ---------------------------------------------------------------------------
# Deontic layer

OBJECT_SORTS = ("person", "entity", "reminder", "event", "invite")

# Auxiliary value sort for the three event-update actions; not an object sort.
PROPERTY_SORT = "property"

ACTION_SIGNATURES: Mapping[str, tuple[str, ...]] = {
    "accept": ("invite",),
    "decline": ("invite",),
    "send_notification": ("invite",),
    "cancel_event": ("event",),
    "set_reminder": ("reminder",),
    "add_participant": ("event", "entity"),
    "remove_participant": ("event", "entity"),
    "delegate_event": ("event", "person"),
    "request_event_update": ("event", "person"),
    "suggest_alternative_time": ("event", "person"),
    "check_availability": ("event", "person"),
    "update_event": ("event", "property"),
    "reschedule_event": ("event", "property"),
    "change_visibility": ("event", "property"),
}

DEONTIC_PREDICATES = ("permissible", "obligatory")

# A person may stand wherever an entity is expected.
_SORT_WIDENING = {"person": ("person", "entity")}


@dataclass(frozen=True)
class DeonticSignature:
    object_sorts: tuple[str, ...]
    actions: Mapping[str, Symbol]
    predicates: tuple[Symbol, ...]

    def install(self, state: TheoryState) -> TheoryState:
        for sym in self.actions.values():
            state.declare(sym)
        return state

    def well_formed(self, lit: Literal, sorts: Mapping[str, str]) -> bool:
        """Type-check a deontic literal against object sorts (name -> sort)."""
        if lit.name not in DEONTIC_PREDICATES or len(lit.args) != 1:
            return False
        term = lit.args[0]
        if not isinstance(term, App):
            return False
        sig = ACTION_SIGNATURES.get(term.ctor)
        if sig is None or len(term.args) != len(sig):
            return False
        for arg, expected in zip(term.args, sig):
            if not isinstance(arg, Const):
                return False
            actual = sorts.get(arg.name)
            if actual is None:
                return False
            if expected not in _SORT_WIDENING.get(actual, (actual,)):
                return False
        return True


def deontic_base() -> DeonticSignature:
    """Object sorts, the 14 action constructors, and the deontic predicates."""
    actions = {
        name: Symbol(Kind.ACTION, name, arg_sorts=sig)
        for name, sig in ACTION_SIGNATURES.items()
    }
    preds = tuple(Symbol(Kind.PROP, name) for name in DEONTIC_PREDICATES)
    return DeonticSignature(OBJECT_SORTS, actions, preds)


# ---------------------------------------------------------------------------
# Theory files


def parse_theory(text: str, strict: bool = False) -> TheoryState:
    """Parse the line-oriented surface syntax into a TheoryState."""
    state = TheoryState(strict=strict)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        kind, sep, payload = line.partition(":")
        if not sep:
            raise TheorySyntaxError(f"line {lineno}: expected 'kind:payload', got {raw!r}")
        payload = payload.strip()
        try:
            if kind == "object":
                parts = payload.split()
                sort = parts[1] if len(parts) > 1 else None
                state.declare(Symbol(Kind.OBJECT, parts[0], sort=sort))
            elif kind == "prop":
                state.declare(Symbol(Kind.PROP, payload))
            elif kind == "relation":
                state.declare(Symbol(Kind.RELATION, payload))
            elif kind == "action":
                parts = payload.split()
                state.declare(Symbol(Kind.ACTION, parts[0], arg_sorts=tuple(parts[1:])))
            elif kind == "axiom":
                state.add_axiom(parse_sexpr(payload, state if strict else None))
            elif kind == "goal":
                parsed = parse_sexpr(payload, state if strict else None)
                if isinstance(parsed, Rule):
                    raise TheorySyntaxError("goal must be a literal, not a rule")
                state.set_goal(parsed)
            else:
                raise TheorySyntaxError(f"unknown declaration kind {kind!r}")
        except TheorySyntaxError as exc:
            raise TheorySyntaxError(f"line {lineno}: {exc}") from None
    return state


def format_theory(state: TheoryState) -> str:
    lines: list[str] = []
    for sym in state.objects.values():
        suffix = f" {sym.sort}" if sym.sort else ""
        lines.append(f"object:{sym.name}{suffix}")
    for sym in state.predicates.values():
        kind = "prop" if sym.kind is Kind.PROP else "relation"
        lines.append(f"{kind}:{sym.name}")
    for sym in state.actions.values():
        lines.append(f"action:{sym.name} {' '.join(sym.arg_sorts)}".rstrip())
    for lit in sorted(state.assumptions, key=str):
        lines.append(f"axiom:{lit}")
    for rule in state.rules:
        lines.append(f"axiom:{rule}")
    if state.goal is not None:
        lines.append(f"goal:{state.goal}")
    return "\n".join(lines) + "\n"
