"""A guide backed by the forward-chaining kernel.

Blocks have the surface form ``kind:payload`` with six kinds: ``object``,
``prop`` and ``relation`` declare symbols, ``axiom`` adds an assumption (a
ground fact or a quantified rule), ``goal`` sets the target, and ``infer``
records one deduction.  Declarations and axioms are constrained
syntactically only -- they are the boundary between natural and formal
language, so semantic fidelity to the prose cannot be enforced.  The
``infer`` alternation, by contrast, is computed from the kernel: it contains
exactly the canonical printings of the one-step derivable literals, plus the
string ``nothing`` for surrender, so every completed inference is sound with
respect to the formalized assumptions by construction.

Certification replays a finished transcript: an answer is certified exactly
when the goal literal (or its complement) ends up among the derived facts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

from . import lexical as rx
from .csd import Transcript
from .guides import Guide, GuideHistory
from .logic import (
    Answer,
    GoalStatus,
    Literal,
    NotDerivable,
    Rule,
    TheoryState,
    TheorySyntaxError,
    assert_fact,
    check_goal,
    parse_sexpr,
    step_inferences,
)


class ReplayMismatch(ValueError):
    """An infer block is not derivable at its replay point (corrupt transcript)."""


class BlockKind(enum.Enum):
    OBJECT = "object"
    PROP = "prop"
    RELATION = "relation"
    AXIOM = "axiom"
    GOAL = "goal"
    INFER = "infer"


@dataclass(frozen=True)
class ActionBlock:
    kind: BlockKind
    payload: str

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.payload}"


def parse_block(content: bytes | str) -> ActionBlock:
    text = content.decode("ascii") if isinstance(content, bytes) else content
    kind, sep, payload = text.partition(":")
    if not sep:
        raise TheorySyntaxError(f"block has no kind prefix: {text!r}")
    try:
        return ActionBlock(BlockKind(kind), payload)
    except ValueError:
        raise TheorySyntaxError(f"unknown block kind {kind!r}") from None


# ---------------------------------------------------------------------------
# Block grammars (regular approximations at fixed nesting depth)


@lru_cache(maxsize=None)
def _grammars() -> dict[str, rx.RegularSet]:
    ident = rx.concat(
        rx.alt(rx.char_range("a", "z"), rx.literal(b"_")),
        rx.star(rx.alt(rx.char_range("a", "z"), rx.char_range("0", "9"), rx.literal(b"_"))),
    )
    sp = rx.literal(b" ")
    simple = rx.alt(ident, rx.concat(rx.literal(b"'"), ident))
    # Applied constructor over simple terms, e.g. an action term.
    applied = rx.concat(
        rx.literal(b"("), ident, sp, simple,
        rx.alt(rx.EPSILON, rx.concat(sp, simple)),
        rx.literal(b")"),
    )
    term = rx.alt(simple, applied)
    atom = rx.concat(
        rx.literal(b"("), ident, sp, term,
        rx.alt(rx.EPSILON, rx.concat(sp, term)),
        rx.literal(b")"),
    )
    lit = rx.alt(atom, rx.concat(rx.literal(b"(not "), atom, rx.literal(b")")))
    rule = rx.concat(lit, rx.star(rx.concat(rx.literal(b" -> "), lit)))
    return {"ident": ident, "literal": lit, "rule": rule}


def identifier_grammar() -> rx.RegularSet:
    return _grammars()["ident"]


def literal_grammar() -> rx.RegularSet:
    return _grammars()["literal"]


def rule_grammar() -> rx.RegularSet:
    return _grammars()["rule"]


# ---------------------------------------------------------------------------
# Replay


def _apply_block(state: TheoryState, raw: bytes | str) -> TheoryState:
    from .logic import Kind, Symbol

    block = parse_block(raw)
    if block.kind is BlockKind.OBJECT:
        state.declare(Symbol(Kind.OBJECT, block.payload))
    elif block.kind is BlockKind.PROP:
        state.declare(Symbol(Kind.PROP, block.payload))
    elif block.kind is BlockKind.RELATION:
        state.declare(Symbol(Kind.RELATION, block.payload))
    elif block.kind is BlockKind.AXIOM:
        state.add_axiom(parse_sexpr(block.payload))
    elif block.kind is BlockKind.GOAL:
        parsed = parse_sexpr(block.payload)
        if isinstance(parsed, Rule):
            raise TheorySyntaxError(f"goal must be a literal: {block.payload!r}")
        state.set_goal(parsed)
    elif block.kind is BlockKind.INFER:
        if block.payload == "nothing":
            return state
        lit = parse_sexpr(block.payload)
        if isinstance(lit, Rule):
            raise TheorySyntaxError(f"infer payload must be a literal: {block.payload!r}")
        try:
            assert_fact(state, lit, derived=True)
        except NotDerivable as exc:
            raise ReplayMismatch(str(exc)) from None
    return state


def replay(history: GuideHistory | tuple[str, ...]) -> TheoryState:
    """Fold block contents, in order, into a theory state.

    Declarations extend the symbol tables, axioms add rules or assumption
    facts, the last goal block wins, and each non-``nothing`` infer payload
    must be derivable at its point (otherwise the transcript is corrupt and
    ReplayMismatch is raised).
    """
    state = TheoryState()
    for raw in history:
        _apply_block(state, raw)
    return state


class LogicGuide(Guide):
    """Constraint sets for the six block kinds, driven by kernel replay.

    ``nothing`` is always a permitted infer output by default; the model may
    surrender early, which matches observed abstention behavior.  In strict
    mode it is permitted only when the step set is empty.  ``strict_symbols``
    additionally restricts axiom and goal payloads to declared symbols (off
    by default: undeclared names are a model error, not a guide error).
    """

    def __init__(self, strict_nothing: bool = False, strict_symbols: bool = False):
        self.strict_nothing = strict_nothing
        self.strict_symbols = strict_symbols
        # Histories grow append-only within a session, so replay states are
        # cached per prefix and extended one block at a time.
        self._states: dict[GuideHistory, TheoryState] = {}

    def clone(self) -> "LogicGuide":
        return LogicGuide(self.strict_nothing, self.strict_symbols)

    def _replay_cached(self, history: GuideHistory) -> TheoryState:
        cached = self._states.get(history)
        if cached is not None:
            return cached
        if history and history[:-1] in self._states:
            state = self._states[history[:-1]].clone()
            _apply_block(state, history[-1])
        else:
            state = replay(history)
        if len(self._states) > 4096:
            self._states.clear()
        self._states[history] = state
        return state

    def allowed(self, history: GuideHistory) -> rx.RegularSet:
        state = self._replay_cached(history)
        steps = step_inferences(state)
        options = [str(lit).encode("ascii") for lit in steps]
        if not self.strict_nothing or not options:
            options.append(b"nothing")
        infer_lang = rx.concat(rx.literal(b"infer:"), rx.strings(options))

        if self.strict_symbols:
            sym_lang = self._declared_symbol_grammar(state)
            axiom_lang = sym_lang["rule"]
            goal_lang = sym_lang["literal"]
        else:
            axiom_lang = rule_grammar()
            goal_lang = literal_grammar()

        ident = identifier_grammar()
        return rx.alt(
            rx.concat(rx.literal(b"object:"), ident),
            rx.concat(rx.literal(b"prop:"), ident),
            rx.concat(rx.literal(b"relation:"), ident),
            rx.concat(rx.literal(b"axiom:"), axiom_lang),
            rx.concat(rx.literal(b"goal:"), goal_lang),
            infer_lang,
        )

    @staticmethod
    def _declared_symbol_grammar(state: TheoryState) -> dict[str, rx.RegularSet]:
        objects = rx.strings(n.encode("ascii") for n in state.objects)
        preds = rx.strings(n.encode("ascii") for n in state.predicates)
        sp = rx.literal(b" ")
        var = rx.concat(rx.literal(b"'"), identifier_grammar())
        term = rx.alt(objects, var)
        atom = rx.concat(
            rx.literal(b"("), preds, sp, term,
            rx.alt(rx.EPSILON, rx.concat(sp, term)),
            rx.literal(b")"),
        )
        lit = rx.alt(atom, rx.concat(rx.literal(b"(not "), atom, rx.literal(b")")))
        rule = rx.concat(lit, rx.star(rx.concat(rx.literal(b" -> "), lit)))
        return {"literal": lit, "rule": rule}


def logic_guide(strict_nothing: bool = False, strict_symbols: bool = False) -> LogicGuide:
    return LogicGuide(strict_nothing=strict_nothing, strict_symbols=strict_symbols)


# ---------------------------------------------------------------------------
# Certification


class CertifyReason(enum.Enum):
    GOAL_PROVED = "goal_proved"
    GOAL_DISPROVED = "goal_disproved"
    INFERENCES_EXHAUSTED = "inferences_exhausted"
    NO_FORMAL_DERIVATION = "no_formal_derivation"
    ABORTED = "aborted"


@dataclass(frozen=True)
class CertificationVerdict:
    answer: Answer
    certified: bool
    reason: CertifyReason

    def __post_init__(self) -> None:
        proved = self.reason in (CertifyReason.GOAL_PROVED, CertifyReason.GOAL_DISPROVED)
        if self.certified != proved:
            raise ValueError("certified verdicts must come from a proved or disproved goal")


def certify(transcript: Transcript, stated_answer: Answer) -> CertificationVerdict:
    """Replay a guided transcript and adjudicate its final answer.

    Certified exactly when the goal was formally proved (answer True) or
    disproved (answer False).  Otherwise the stated answer is passed through
    uncertified, with the reason recording whether the model had exhausted
    the inference space (its last infer block was ``nothing``).
    """
    if transcript.aborted:
        return CertificationVerdict(stated_answer, False, CertifyReason.ABORTED)
    contents = transcript.block_contents()
    try:
        state = replay(contents)
        status = check_goal(state) if state.goal is not None else GoalStatus.OPEN
    except (ReplayMismatch, TheorySyntaxError):
        return CertificationVerdict(stated_answer, False, CertifyReason.NO_FORMAL_DERIVATION)
    if status is GoalStatus.PROVED:
        return CertificationVerdict(Answer.TRUE, True, CertifyReason.GOAL_PROVED)
    if status is GoalStatus.DISPROVED:
        return CertificationVerdict(Answer.FALSE, True, CertifyReason.GOAL_DISPROVED)
    infers = [parse_block(c).payload for c in contents if parse_block(c).kind is BlockKind.INFER]
    if infers and infers[-1] == "nothing":
        return CertificationVerdict(stated_answer, False, CertifyReason.INFERENCES_EXHAUSTED)
    return CertificationVerdict(stated_answer, False, CertifyReason.NO_FORMAL_DERIVATION)
