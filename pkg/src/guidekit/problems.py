"""Synthetic multi-hop reasoning problems with exact ground truth.

Problems are built logical-forms-first: sample a derivation chain of the
requested depth, add distractor rules that provably never shorten it, then
realize every axiom as a natural-language sentence from fixed templates.
Templates are deterministic and invertible -- ``sentence_to_axiom`` maps
sentence ``i`` back to axiom ``i`` byte for byte -- so formalization quality
can be scored mechanically.

Three ontology flavors mirror the usual splits: rules that agree with
common sense, rules that contradict it (e.g. "Every composite number is
prime."), and rules over made-up concepts.  A fourth generator produces
calendar-management problems whose goals are deontic judgements
(permissible / obligatory / impermissible) over a fixed action signature.
"""

from __future__ import annotations

import enum
import json
import random
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .logic import (
    ACTION_SIGNATURES,
    Answer,
    App,
    Const,
    Literal,
    Rule,
    TheoryState,
    Var,
    answer_from_goal,
    check_goal,
    closure,
    deontic_base,
    parse_sexpr,
    parse_theory,
    _solve,
)


class DatasetFormatError(ValueError):
    """Malformed dataset records; carries the offending line number."""


class GenerationExhausted(RuntimeError):
    """The retry budget for finding a valid derivation was exceeded."""


class Ontology(enum.Enum):
    TRUE_ONT = "true"
    FALSE_ONT = "false"
    FICTIONAL = "fictional"
    DEONTIC = "deontic"


@dataclass(frozen=True)
class Problem:
    context: tuple[str, ...]
    question: str
    answer: bool
    hops: int
    ontology: Ontology
    theory: str
    distractors: tuple[int, ...] = ()  # indices into the axiom lines

    def theory_state(self) -> TheoryState:
        return parse_theory(self.theory)

    def axiom_lines(self) -> list[str]:
        return [ln[len("axiom:"):] for ln in self.theory.splitlines() if ln.startswith("axiom:")]


# ---------------------------------------------------------------------------
# Oracle


def oracle_answer(theory: TheoryState | str) -> Answer:
    state = parse_theory(theory) if isinstance(theory, str) else theory.clone()
    state.facts = dict.fromkeys(closure(state))
    return answer_from_goal(check_goal(state))


def _relax_costs(state: TheoryState) -> tuple[dict[Literal, int], dict[Literal, tuple[Rule, dict]]]:
    """Minimal rule-application counts per derivable fact, with one witness."""
    saturated = state.clone()
    saturated.facts = dict.fromkeys(sorted(closure(state), key=str))
    cost: dict[Literal, int] = {f: 0 for f in state.assumptions}
    parent: dict[Literal, tuple[Rule, dict]] = {}
    changed = True
    while changed:
        changed = False
        for rule in saturated.rules:
            for subst in _solve(rule.antecedents, 0, {}, saturated):
                antes = [  # instantiated antecedents
                    _ground(rule.antecedents[i], subst) for i in range(len(rule.antecedents))
                ]
                if any(a not in cost for a in antes):
                    continue
                lit = _ground(rule.consequent, subst)
                new = 1 + sum(cost[a] for a in antes)
                if new < cost.get(lit, new + 1):
                    cost[lit] = new
                    parent[lit] = (rule, subst)
                    changed = True
    return cost, parent


def _ground(lit: Literal, subst: Mapping[str, object]) -> Literal:
    from .logic import substitute

    return substitute(lit, dict(subst))


def shortest_derivation(state: TheoryState, target: Literal) -> int | None:
    """Rule applications in a minimal proof of ``target`` (None if unprovable)."""
    cost, _ = _relax_costs(state)
    return cost.get(target)


def derivation_chain(state: TheoryState) -> list[Literal] | None:
    """A minimal infer sequence proving the goal or its complement."""
    if state.goal is None:
        return None
    cost, parent = _relax_costs(state)
    target = None
    if state.goal in cost:
        target = state.goal
    elif state.goal.complement() in cost:
        target = state.goal.complement()
    if target is None:
        return None

    chain: list[Literal] = []
    seen: set[Literal] = set()

    def visit(lit: Literal) -> None:
        if lit in seen or lit in state.assumptions:
            return
        seen.add(lit)
        rule, subst = parent[lit]
        for ante in rule.antecedents:
            visit(_ground(ante, subst))
        chain.append(lit)

    visit(target)
    return chain


# ---------------------------------------------------------------------------
# Surface lexicons

_VOWELS = "aeiou"


def _article(word: str) -> str:
    return "an" if word[0] in _VOWELS else "a"


@dataclass(frozen=True)
class PredSurface:
    name: str
    text: str
    pos: str  # "noun" or "adj"


def _surfaces(*entries: tuple[str, str, str]) -> dict[str, PredSurface]:
    return {name: PredSurface(name, text, pos) for name, text, pos in entries}


FICTIONAL_NOUNS = [
    "wumpus", "yumpus", "zumpus", "dumpus", "rompus", "numpus", "tumpus",
    "vumpus", "impus", "jompus", "grimpus", "lorpus", "shumpus", "brimpus",
    "gorpus", "lempus",
]
FICTIONAL_ADJS = [
    "feisty", "opaque", "dull", "bitter", "luminous", "shy", "amenable",
    "aggressive", "transparent", "mean", "sweet", "earthy", "temperate",
    "floral", "spicy",
]
FICTIONAL_NAMES = ["wren", "rex", "sam", "max", "polly", "alex", "stella", "fae"]

FICTIONAL_SURFACES = _surfaces(
    *[(n, n, "noun") for n in FICTIONAL_NOUNS],
    *[(a, a, "adj") for a in FICTIONAL_ADJS],
)

_TAXONOMY_EDGES = [
    ("chihuahua", "dog"), ("poodle", "dog"), ("dog", "mammal"),
    ("cat", "mammal"), ("mammal", "vertebrate"), ("vertebrate", "animal"),
    ("animal", "organism"), ("sparrow", "bird"), ("eagle", "bird"),
    ("bird", "vertebrate"), ("salmon", "fish"), ("trout", "fish"),
    ("fish", "vertebrate"), ("bee", "insect"), ("ant", "insect"),
    ("insect", "invertebrate"), ("invertebrate", "animal"),
    ("oak", "tree"), ("tree", "plant"), ("rose", "flower"),
    ("flower", "plant"), ("plant", "organism"),
]
_TAXONOMY_ATTRS = [  # (noun, adjective, holds in reality)
    ("mammal", "warm_blooded", True),
    ("fish", "cold_blooded", True),
    ("bird", "feathered", True),
    ("dog", "loyal", True),
    ("insect", "small", True),
    ("tree", "woody", True),
    ("plant", "photosynthetic", True),
    ("animal", "mobile", True),
    ("organism", "living", True),
    ("flower", "fragrant", True),
]
_TAXONOMY_NEG_ATTRS = [  # true negative statements
    ("mammal", "cold_blooded"),
    ("fish", "warm_blooded"),
    ("bird", "cold_blooded"),
    ("plant", "mobile"),
]

TAXONOMY_SURFACES = _surfaces(
    *[(n, n.replace("_", " "), "noun")
      for n in {a for a, _ in _TAXONOMY_EDGES} | {b for _, b in _TAXONOMY_EDGES}],
    *[(adj, adj.replace("_", "-"), "adj") for _, adj, _ in _TAXONOMY_ATTRS],
    ("composite_number", "composite number", "noun"),
    ("prime", "prime", "adj"),
)
TAXONOMY_NAMES = ["rex", "bella", "coco", "luna", "milo", "ruby", "toby", "ginger"]


def _ontology_tables(ontology: Ontology) -> tuple[dict[str, PredSurface], list[tuple[str, str]], list[tuple[str, str, bool]], list[str]]:
    """(surfaces, noun edges, attr edges with polarity, entity names)."""
    if ontology is Ontology.FICTIONAL:
        return FICTIONAL_SURFACES, [], [], FICTIONAL_NAMES
    if ontology is Ontology.TRUE_ONT:
        attrs = [(n, a, True) for n, a, _ in _TAXONOMY_ATTRS]
        attrs += [(n, a, False) for n, a in _TAXONOMY_NEG_ATTRS]
        return TAXONOMY_SURFACES, list(_TAXONOMY_EDGES), attrs, TAXONOMY_NAMES
    if ontology is Ontology.FALSE_ONT:
        edges = [(b, a) for a, b in _TAXONOMY_EDGES]  # reversed taxonomy
        crossed = [
            ("dog", "cold_blooded", True), ("fish", "warm_blooded", True),
            ("bird", "woody", True), ("tree", "feathered", True),
            ("mammal", "photosynthetic", True), ("insect", "living", False),
            ("composite_number", "prime", True),
        ]
        return TAXONOMY_SURFACES, edges, crossed, TAXONOMY_NAMES
    raise ValueError(f"not an ontology split: {ontology}")


# ---------------------------------------------------------------------------
# Ontology sentence templates


def render_fact_sentence(lit: Literal, surfaces: Mapping[str, PredSurface]) -> str:
    name = lit.args[0]
    assert isinstance(name, Const)
    subject = name.name.capitalize()
    surf = surfaces[lit.name]
    if surf.pos == "noun":
        link = f"is not {_article(surf.text)}" if lit.negated else f"is {_article(surf.text)}"
    else:
        link = "is not" if lit.negated else "is"
    return f"{subject} {link} {surf.text}."


def render_rule_sentence(rule: Rule, surfaces: Mapping[str, PredSurface]) -> str:
    ante = surfaces[rule.antecedents[0].name]
    cons = surfaces[rule.consequent.name]
    if cons.pos == "noun":
        link = f"is not {_article(cons.text)}" if rule.consequent.negated else f"is {_article(cons.text)}"
    else:
        link = "is not" if rule.consequent.negated else "is"
    return f"Every {ante.text} {link} {cons.text}."


_RULE_RE = re.compile(r"^Every ([a-z -]+) is (not )?(?:(a|an) )?([a-z -]+)\.$")
_FACT_RE = re.compile(r"^([A-Z][a-z]+) is (not )?(?:(a|an) )?([a-z -]+)\.$")


def _surface_lookup(surfaces: Mapping[str, PredSurface]) -> dict[str, str]:
    return {s.text: s.name for s in surfaces.values()}


def _invert_ontology_sentence(sentence: str, surfaces: Mapping[str, PredSurface]) -> Rule | Literal:
    by_text = _surface_lookup(surfaces)
    m = _RULE_RE.match(sentence)
    if m:
        ante, neg, _, cons = m.groups()
        x = Var("x")
        return Rule(
            (Literal(False, by_text[ante], (x,)),),
            Literal(neg is not None, by_text[cons], (x,)),
        )
    m = _FACT_RE.match(sentence)
    if m:
        subject, neg, _, pred = m.groups()
        return Literal(neg is not None, by_text[pred], (Const(subject.lower()),))
    raise DatasetFormatError(f"unrecognized sentence shape: {sentence!r}")


# ---------------------------------------------------------------------------
# Ontology problem generation


def _unary_rule(a: str, b: str, negated: bool = False) -> Rule:
    x = Var("x")
    return Rule((Literal(False, a, (x,)),), Literal(negated, b, (x,)))


def generate_ontology_problem(seed: int, hops: int, ontology: Ontology) -> Problem:
    """One chain problem: start fact, ``hops`` rules to the goal, distractors.

    The question restates the derived conclusion or its complement (an even
    coin), so answers are balanced; distractor rules are checked to leave
    both the oracle answer and the minimal derivation length untouched.
    """
    if not 1 <= hops <= 5:
        raise ValueError("hops must be between 1 and 5")
    if ontology is Ontology.DEONTIC:
        raise ValueError("use generate_deontic_problem for the deontic split")
    rng = random.Random(f"ontology:{ontology.value}:{hops}:{seed}")
    surfaces, edges, attrs, names = _ontology_tables(ontology)

    for _ in range(40):
        entity = rng.choice(names)
        chain_rules, chain_preds = _sample_chain(rng, ontology, hops, edges, attrs)
        start_fact = Literal(False, chain_preds[0], (Const(entity),))
        conclusion = _ground(chain_rules[-1].consequent, {"x": Const(entity)})

        axioms: list[Rule | Literal] = [start_fact, *chain_rules]
        distractor_axioms = _ontology_distractors(rng, ontology, chain_preds, entity, names, surfaces)
        axioms.extend(distractor_axioms)
        order = list(range(len(axioms)))
        rng.shuffle(order)
        axioms = [axioms[i] for i in order]
        distractor_idx = tuple(sorted(order.index(len(chain_rules) + 1 + j) for j in range(len(distractor_axioms))))

        goal = conclusion if rng.random() < 0.5 else conclusion.complement()
        answer = goal == conclusion

        state = _assemble_state(axioms, goal)
        if oracle_answer(state) is not (Answer.TRUE if answer else Answer.FALSE):
            continue
        if shortest_derivation(state, conclusion) != hops:
            continue
        lean = _assemble_state([a for i, a in enumerate(axioms) if i not in distractor_idx], goal)
        if oracle_answer(lean) != oracle_answer(state):
            continue

        context = tuple(
            render_rule_sentence(a, surfaces) if isinstance(a, Rule) else render_fact_sentence(a, surfaces)
            for a in axioms
        )
        question = f"True or false: {render_fact_sentence(goal, surfaces)}"
        return Problem(
            context=context,
            question=question,
            answer=answer,
            hops=hops,
            ontology=ontology,
            theory=_format_problem_theory(state, axioms),
            distractors=distractor_idx,
        )
    raise GenerationExhausted(f"no valid problem for seed={seed} hops={hops} {ontology}")


def _sample_chain(
    rng: random.Random,
    ontology: Ontology,
    hops: int,
    edges: list[tuple[str, str]],
    attrs: list[tuple[str, str, bool]],
) -> tuple[list[Rule], list[str]]:
    if ontology is Ontology.FICTIONAL:
        nouns = rng.sample(FICTIONAL_NOUNS, hops + 1)
        rules = [_unary_rule(nouns[i], nouns[i + 1]) for i in range(hops - 1)]
        if rng.random() < 0.5:
            adj = rng.choice(FICTIONAL_ADJS)
            rules.append(_unary_rule(nouns[hops - 1], adj, negated=rng.random() < 0.35))
            preds = nouns[:hops] + [adj]
        else:
            rules.append(_unary_rule(nouns[hops - 1], nouns[hops]))
            preds = nouns[: hops + 1]
        return rules, preds

    adjacency: dict[str, list[str]] = {}
    for a, b in edges:
        adjacency.setdefault(a, []).append(b)
    paths: list[list[str]] = []

    def walk(node: str, path: list[str]) -> None:
        if len(path) == hops + 1:
            paths.append(path)
            return
        for nxt in adjacency.get(node, ()):
            if nxt not in path:
                walk(nxt, path + [nxt])

    attr_by_noun: dict[str, list[tuple[str, bool]]] = {}
    for noun, adj, positive in attrs:
        attr_by_noun.setdefault(noun, []).append((adj, positive))

    for start in adjacency:
        walk(start, [start])
        if hops >= 2:  # noun path one short, finished by an attribute edge
            pass
    short_paths: list[list[str]] = []

    def walk_short(node: str, path: list[str]) -> None:
        if len(path) == hops:
            if path[-1] in attr_by_noun:
                short_paths.append(path)
            return
        for nxt in adjacency.get(node, ()):
            if nxt not in path:
                walk_short(nxt, path + [nxt])

    for start in adjacency:
        walk_short(start, [start])

    use_attr = short_paths and (not paths or rng.random() < 0.5)
    if use_attr:
        path = rng.choice(sorted(short_paths))
        adj, positive = rng.choice(sorted(attr_by_noun[path[-1]]))
        rules = [_unary_rule(path[i], path[i + 1]) for i in range(len(path) - 1)]
        rules.append(_unary_rule(path[-1], adj, negated=not positive))
        return rules, path + [adj]
    if not paths:
        raise GenerationExhausted(f"no {hops}-hop chains available in this lexicon")
    path = rng.choice(sorted(paths))
    rules = [_unary_rule(path[i], path[i + 1]) for i in range(len(path) - 1)]
    return rules, path


def _ontology_distractors(
    rng: random.Random,
    ontology: Ontology,
    chain_preds: list[str],
    entity: str,
    names: list[str],
    surfaces: Mapping[str, PredSurface],
) -> list[Rule | Literal]:
    nouns = [p for p, s in surfaces.items() if s.pos == "noun" and p not in chain_preds]
    sinks = [p for p in surfaces if p not in chain_preds]
    rng.shuffle(nouns)
    rng.shuffle(sinks)
    fresh_nouns = iter(nouns)
    fresh_sinks = iter(sinks)
    out: list[Rule | Literal] = []
    count = rng.randint(3, 6)
    other = rng.choice([n for n in names if n != entity])
    used: set[str] = set(chain_preds)

    def draw(it) -> str:
        for name in it:
            if name not in used:
                used.add(name)
                return name
        raise StopIteration

    for _ in range(count):
        kind = rng.random()
        try:
            if kind < 0.4:
                out.append(_unary_rule(draw(fresh_nouns), draw(fresh_sinks)))
            elif kind < 0.7:
                out.append(_unary_rule(rng.choice(chain_preds[:-1]), draw(fresh_sinks)))
            else:
                out.append(Literal(False, draw(fresh_nouns), (Const(other),)))
        except StopIteration:
            break
    return out


def _assemble_state(axioms: Sequence[Rule | Literal], goal: Literal) -> TheoryState:
    from .logic import Kind, Symbol

    state = TheoryState()
    preds: dict[str, int] = {}
    objs: set[str] = set()
    for axiom in axioms:
        lits = (*axiom.antecedents, axiom.consequent) if isinstance(axiom, Rule) else (axiom,)
        for lit in lits:
            preds.setdefault(lit.name, len(lit.args))
            for term in lit.args:
                if isinstance(term, Const):
                    objs.add(term.name)
                if isinstance(term, App):
                    for a in term.args:
                        if isinstance(a, Const):
                            objs.add(a.name)
    for lit in (goal,):
        preds.setdefault(lit.name, len(lit.args))
    for name in sorted(objs):
        state.declare(Symbol(Kind.OBJECT, name))
    for name, arity in sorted(preds.items()):
        state.declare(Symbol(Kind.PROP if arity == 1 else Kind.RELATION, name))
    for axiom in axioms:
        state.add_axiom(axiom)
    state.set_goal(goal)
    return state


def _format_problem_theory(state: TheoryState, axioms: Sequence[Rule | Literal]) -> str:
    from .logic import Kind

    lines: list[str] = []
    for sym in state.objects.values():
        suffix = f" {sym.sort}" if sym.sort else ""
        lines.append(f"object:{sym.name}{suffix}")
    for sym in state.predicates.values():
        lines.append(f"{'prop' if sym.kind is Kind.PROP else 'relation'}:{sym.name}")
    for sym in state.actions.values():
        lines.append(f"action:{sym.name} {' '.join(sym.arg_sorts)}".rstrip())
    for axiom in axioms:  # axiom order carries sentence alignment
        lines.append(f"axiom:{axiom}")
    if state.goal is not None:
        lines.append(f"goal:{state.goal}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Deontic problems

_PERSONS = ["alice", "bob", "carol", "dave", "erin"]
_GROUPS = ["dev_team", "design_team", "sales_team"]
_EVENTS = ["team_event", "product_launch", "review_meeting", "planning_session", "company_party", "training_session"]
_INVITES = ["launch_invite", "review_invite", "party_invite"]
_REMINDERS = ["morning_reminder", "day_before_reminder"]
_PROPERTIES = ["confidential", "restricted", "open_access", "morning_slot", "evening_slot"]
_EVENT_PROPS = [
    "short", "long", "monthly", "yearly", "daily", "weekly", "public",
    "private", "formal", "informal", "internal", "external", "recurring",
    "brief", "extended", "social", "festive",
]

_E, _P, _X = Var("e"), Var("p"), Var("x")


def _deontic(pred: str, action: str, *args: object, negated: bool = False) -> Literal:
    return Literal(negated, pred, (App(action, tuple(args)),))


@dataclass(frozen=True)
class _Target:
    """A deontic rule template: trigger prop + optional relation antecedent."""

    relation: str | None          # second antecedent over ('e) and a constant
    const_sort: str | None        # sort of the constant it needs
    build: object                 # (trigger, const) -> Rule


def _mk_target(relation, const_sort, make_cons):
    def build(trigger: str, const: Const | None) -> Rule:
        antes = [Literal(False, trigger, (_E,))]
        if relation is not None:
            antes.append(Literal(False, relation, (const, _E)))
        return Rule(tuple(antes), make_cons(const))
    return _Target(relation, const_sort, build)


# Conclusions over permissible may be questioned either way; goals stay in
# the forms (permissible a), (not (permissible a)), (obligatory a).
_PERMISSIBLE_TARGETS = [
    _mk_target(None, None, lambda c: _deontic("permissible", "cancel_event", _E, negated=True)),
    _mk_target(None, "property", lambda c: _deontic("permissible", "update_event", _E, c)),
    _mk_target(None, "property", lambda c: _deontic("permissible", "reschedule_event", _E, c, negated=True)),
    _mk_target(None, "property", lambda c: _deontic("permissible", "change_visibility", _E, c)),
    _mk_target("free_during", "person", lambda c: _deontic("permissible", "add_participant", _E, c)),
    _mk_target("busy_during", "person", lambda c: _deontic("permissible", "add_participant", _E, c, negated=True)),
    _mk_target("organizer", "person", lambda c: _deontic("permissible", "delegate_event", _E, c)),
    _mk_target("participant", "person", lambda c: _deontic("permissible", "request_event_update", _E, c)),
    _mk_target("participant", "person", lambda c: _deontic("permissible", "suggest_alternative_time", _E, c, negated=True)),
    _mk_target("invite_for", "invite", lambda c: _deontic("permissible", "accept", c)),
    _mk_target("invite_for", "invite", lambda c: _deontic("permissible", "decline", c)),
]
_OBLIGATORY_POS_TARGETS = [
    _mk_target("organizer", "person", lambda c: _deontic("obligatory", "add_participant", _E, c)),
    _mk_target(None, "group", lambda c: _deontic("obligatory", "add_participant", _E, c)),
    _mk_target("participant", "person", lambda c: _deontic("obligatory", "remove_participant", _E, c)),
    _mk_target("tentative_for", "person", lambda c: _deontic("obligatory", "check_availability", _E, c)),
    _mk_target("invite_for", "invite", lambda c: _deontic("obligatory", "send_notification", c)),
    _mk_target("reminder_for", "reminder", lambda c: _deontic("obligatory", "set_reminder", c)),
]
_OBLIGATORY_NEG_TARGETS = [
    _mk_target("reminder_for", "reminder", lambda c: _deontic("obligatory", "set_reminder", c, negated=True)),
    _mk_target("participant", "person", lambda c: _deontic("obligatory", "suggest_alternative_time", _E, c, negated=True)),
]
_DEONTIC_TARGETS = _PERMISSIBLE_TARGETS + _OBLIGATORY_POS_TARGETS + _OBLIGATORY_NEG_TARGETS

_DEONTIC_RELATIONS = [
    "organizer", "participant", "busy_during", "free_during", "tentative_for",
    "invite_for", "reminder_for",
]


def generate_deontic_problem(seed: int, hops: int | None = None, max_rules: int = 28) -> Problem:
    """A calendar-management problem whose goal is a deontic judgement.

    Samples a world, derives a deontic conclusion through a chain of event
    properties, takes the conclusion or its negation (even coin) as the
    goal, and pads with harmless distractor rules.  Rule count stays within
    ``max_rules``.
    """
    rng = random.Random(f"deontic:{seed}")
    depth = hops if hops is not None else rng.randint(1, 5)
    if not 1 <= depth <= 5:
        raise ValueError("hops must be between 1 and 5")

    for _ in range(40):
        persons = rng.sample(_PERSONS, 3)
        group = rng.choice(_GROUPS)
        events = rng.sample(_EVENTS, 3)
        invite = rng.choice(_INVITES)
        reminder = rng.choice(_REMINDERS)
        prop_const = rng.choice(_PROPERTIES)
        event = events[0]
        sorts = {p: "person" for p in persons}
        sorts[group] = "entity"
        sorts.update({e: "event" for e in events})
        sorts[invite] = "invite"
        sorts[reminder] = "reminder"
        sorts[prop_const] = "property"

        props = rng.sample(_EVENT_PROPS, min(len(_EVENT_PROPS), depth + 6))
        chain = props[:depth]
        spare = props[depth:]

        # Family weighting keeps answers balanced: permissible conclusions
        # take an even goal-negation coin; obligatory conclusions pair a
        # positive target (goal holds) with a negated one questioned
        # positively (goal disproved), so neither family skews True.
        if rng.random() < 0.6:
            target = rng.choice(_PERMISSIBLE_TARGETS)
            family = "permissible"
        elif rng.random() < 0.5:
            target = rng.choice(_OBLIGATORY_POS_TARGETS)
            family = "obligatory_pos"
        else:
            target = rng.choice(_OBLIGATORY_NEG_TARGETS)
            family = "obligatory_neg"
        const: Const | None = None
        facts: list[Literal] = [Literal(False, chain[0], (Const(event),))]
        if target.const_sort == "person":
            const = Const(rng.choice(persons))
        elif target.const_sort == "group":
            const = Const(group)
        elif target.const_sort == "invite":
            const = Const(invite)
        elif target.const_sort == "reminder":
            const = Const(reminder)
        elif target.const_sort == "property":
            const = Const(prop_const)
        rules: list[Rule] = [_unary_rule(chain[i], chain[i + 1]) for i in range(depth - 1)]
        target_rule = target.build(chain[-1], const)
        if target.relation is not None:
            facts.append(Literal(False, target.relation, (const, Const(event))))
        rules.append(target_rule)
        conclusion = _ground(target_rule.consequent, {"e": Const(event)})

        # Distractors: facts and rules that never touch the goal derivation.
        n_rules = rng.randint(4, min(10, max_rules - len(rules)))
        rule_distractors: list[Rule] = []
        fresh = iter(spare)
        others = events[1:]
        try:
            for _ in range(n_rules):
                roll = rng.random()
                if roll < 0.5 and spare:
                    rule_distractors.append(_unary_rule(next(fresh), next(fresh)))
                else:
                    alt_target = rng.choice(_DEONTIC_TARGETS)
                    alt_const = _alt_const(rng, alt_target.const_sort, persons, group, invite, reminder, prop_const)
                    rule_distractors.append(alt_target.build(next(fresh), alt_const))
        except StopIteration:
            pass
        fact_distractors: list[Literal] = []
        for other in others[:2]:
            pool = [p for p in _EVENT_PROPS if p not in chain]
            fact_distractors.append(Literal(False, rng.choice(pool), (Const(other),)))
            fact_distractors.append(
                Literal(False, rng.choice(_DEONTIC_RELATIONS[:5]), (Const(rng.choice(persons)), Const(other)))
            )

        axioms: list[Rule | Literal] = [*facts, *fact_distractors, *rules, *rule_distractors]
        core = set(range(len(facts))) | {len(facts) + len(fact_distractors) + i for i in range(len(rules))}
        distractor_idx = tuple(i for i in range(len(axioms)) if i not in core)

        if family == "permissible":
            goal = conclusion if rng.random() < 0.5 else conclusion.complement()
        elif family == "obligatory_pos":
            goal = conclusion
        else:  # ask the positive question about a derived prohibition
            goal = conclusion.complement()
        answer = goal == conclusion
        state = _assemble_deontic_state(axioms, goal, sorts)
        if oracle_answer(state) is not (Answer.TRUE if answer else Answer.FALSE):
            continue
        if shortest_derivation(state, conclusion) != depth:
            continue
        lean = _assemble_deontic_state([a for i, a in enumerate(axioms) if i not in distractor_idx], goal, sorts)
        if oracle_answer(lean) != oracle_answer(state):
            continue

        context = tuple(render_deontic_sentence(a, sorts) for a in axioms)
        question = f"Given the rules above, is it {_deontic_goal_phrase(goal, sorts)}?"
        return Problem(
            context=context,
            question=question,
            answer=answer,
            hops=depth,
            ontology=Ontology.DEONTIC,
            theory=_format_problem_theory(state, axioms),
            distractors=distractor_idx,
        )
    raise GenerationExhausted(f"no valid deontic problem for seed={seed}")


def _alt_const(rng, sort, persons, group, invite, reminder, prop_const):
    if sort == "person":
        return Const(rng.choice(persons))
    if sort == "group":
        return Const(group)
    if sort == "invite":
        return Const(invite)
    if sort == "reminder":
        return Const(reminder)
    if sort == "property":
        return Const(prop_const)
    return None


def _assemble_deontic_state(axioms: Sequence[Rule | Literal], goal: Literal, sorts: Mapping[str, str]) -> TheoryState:
    from .logic import Kind, Symbol

    state = _assemble_state(axioms, goal)
    for name, sort in sorts.items():
        state.objects[name] = Symbol(Kind.OBJECT, name, sort=sort)
    deontic_base().install(state)
    return state


# ---------------------------------------------------------------------------
# Deontic sentence templates

_ACTION_PHRASES: dict[str, str] = {
    "accept": "accept {0}",
    "decline": "decline {0}",
    "send_notification": "send a notification for {0}",
    "cancel_event": "cancel {0}",
    "set_reminder": "set {0}",
    "add_participant": "add {1} as a participant of {0}",
    "remove_participant": "remove {1} as a participant of {0}",
    "delegate_event": "delegate {0} to {1}",
    "request_event_update": "request an update on {0} from {1}",
    "suggest_alternative_time": "have {1} suggest an alternative time for {0}",
    "check_availability": "check the availability of {1} for {0}",
    "update_event": "update {0} to be {1}",
    "reschedule_event": "reschedule {0} to {1}",
    "change_visibility": "change the visibility of {0} to {1}",
}

_RELATION_CLAUSES: dict[str, str] = {
    "organizer": "{0} is the organizer of {1}",
    "participant": "{0} is a participant in {1}",
    "busy_during": "{0} is busy during {1}",
    "free_during": "{0} is free during {1}",
    "tentative_for": "{0} is tentative for {1}",
    "invite_for": "{0} is an invite for {1}",
    "reminder_for": "{0} is a reminder for {1}",
}


def _term_phrase(term: object, sorts: Mapping[str, str], in_rule: bool) -> str:
    if isinstance(term, Var):
        return {"e": "that event", "p": "that person", "x": "that one"}.get(term.name, f"that {term.name}")
    assert isinstance(term, Const)
    sort = sorts.get(term.name)
    if sort == "person":
        return term.name.capitalize()
    if sort == "property":
        return term.name.replace("_", " ")
    return "the " + term.name.replace("_", " ")


def _action_phrase(term: App, sorts: Mapping[str, str]) -> str:
    args = [_term_phrase(a, sorts, True) for a in term.args]
    return _ACTION_PHRASES[term.ctor].format(*args)


def _deontic_wrapper(lit: Literal) -> str:
    if lit.name == "permissible":
        return "impermissible" if lit.negated else "permissible"
    return "not obligatory" if lit.negated else "obligatory"


def _deontic_goal_phrase(lit: Literal, sorts: Mapping[str, str]) -> str:
    action = lit.args[0]
    assert isinstance(action, App)
    return f"{_deontic_wrapper(lit)} to {_action_phrase(action, sorts)}"


def render_deontic_sentence(axiom: Rule | Literal, sorts: Mapping[str, str]) -> str:
    if isinstance(axiom, Literal):
        if axiom.name in _RELATION_CLAUSES:
            a, b = (_term_phrase(t, sorts, False) for t in axiom.args)
            clause = _RELATION_CLAUSES[axiom.name].format(a, b)
        else:  # event property fact
            clause = f"{_term_phrase(axiom.args[0], sorts, False)} is {axiom.name.replace('_', ' ')}"
        sentence = clause[0].upper() + clause[1:] + "."
        return sentence

    trigger = axiom.antecedents[0]
    parts = [f"an event is {trigger.name.replace('_', ' ')}"]
    for extra in axiom.antecedents[1:]:
        a, b = (_term_phrase(t, sorts, True) for t in extra.args)
        parts.append(_RELATION_CLAUSES[extra.name].format(a, b))
    cons = axiom.consequent
    if cons.name in ("permissible", "obligatory"):
        action = cons.args[0]
        assert isinstance(action, App)
        cons_clause = f"it is {_deontic_wrapper(cons)} to {_action_phrase(action, sorts)}"
    else:
        cons_clause = f"it is {cons.name.replace('_', ' ')}"
    return f"If {' and '.join(parts)}, then {cons_clause}."


_DEONTIC_RULE_RE = re.compile(
    r"^If an event is ([a-z ]+?)(?: and (.+?))?, then it is "
    r"(permissible|obligatory|impermissible|not obligatory) to (.+)\.$"
)
_DEONTIC_CHAIN_RE = re.compile(r"^If an event is ([a-z ]+), then it is ([a-z ]+)\.$")


def _phrase_to_term(phrase: str, sorts: Mapping[str, str]) -> Const | Var:
    phrase = phrase.strip()
    if phrase == "that event":
        return _E
    if phrase == "that person":
        return _P
    if phrase.lower().startswith("the "):
        return Const(phrase[4:].replace(" ", "_"))
    if phrase[0].isupper():
        return Const(phrase.lower())
    return Const(phrase.replace(" ", "_"))


def _invert_action_phrase(phrase: str, sorts: Mapping[str, str]) -> App:
    for name, template in _ACTION_PHRASES.items():
        pattern = re.escape(template).replace(r"\{0\}", "(?P<a0>.+?)").replace(r"\{1\}", "(?P<a1>.+?)")
        m = re.fullmatch(pattern, phrase)
        if m is None:
            continue
        groups = m.groupdict()
        n_args = len(ACTION_SIGNATURES[name])
        args = [_phrase_to_term(groups["a0"], sorts)]
        if n_args == 2:
            args.append(_phrase_to_term(groups["a1"], sorts))
        return App(name, tuple(args))
    raise DatasetFormatError(f"unrecognized action phrase: {phrase!r}")


def _invert_relation_clause(clause: str, sorts: Mapping[str, str]) -> Literal:
    for name, template in _RELATION_CLAUSES.items():
        pattern = re.escape(template).replace(r"\{0\}", "(?P<a0>.+?)").replace(r"\{1\}", "(?P<a1>.+?)")
        m = re.fullmatch(pattern, clause)
        if m is None:
            continue
        return Literal(
            False, name,
            (_phrase_to_term(m.group("a0"), sorts), _phrase_to_term(m.group("a1"), sorts)),
        )
    raise DatasetFormatError(f"unrecognized relation clause: {clause!r}")


def _invert_deontic_sentence(sentence: str, sorts: Mapping[str, str]) -> Rule | Literal:
    m = _DEONTIC_RULE_RE.match(sentence)
    if m:
        trigger, extra, wrapper, action_phrase = m.groups()
        antes: list[Literal] = [Literal(False, trigger.replace(" ", "_"), (_E,))]
        if extra:
            antes.append(_invert_relation_clause(extra, sorts))
        action = _invert_action_phrase(action_phrase, sorts)
        negated = wrapper in ("impermissible", "not obligatory")
        pred = "permissible" if wrapper in ("permissible", "impermissible") else "obligatory"
        return Rule(tuple(antes), Literal(negated, pred, (action,)))
    m = _DEONTIC_CHAIN_RE.match(sentence)
    if m:
        a, b = m.groups()
        return _unary_rule(a.replace(" ", "_"), b.replace(" ", "_"))
    body = sentence[:-1]  # drop the period
    lowered = body[0].lower() + body[1:]
    for name, template in _RELATION_CLAUSES.items():
        pattern = re.escape(template).replace(r"\{0\}", "(?P<a0>.+?)").replace(r"\{1\}", "(?P<a1>.+?)")
        m = re.fullmatch(pattern, body) or re.fullmatch(pattern, lowered)
        if m:
            return Literal(
                False, name,
                (_phrase_to_term(m.group("a0"), sorts), _phrase_to_term(m.group("a1"), sorts)),
            )
    m = re.fullmatch(r"[Tt]he ([a-z ]+) is ([a-z ]+)", body)
    if m:
        event, prop = m.groups()
        return Literal(False, prop.replace(" ", "_"), (Const(event.replace(" ", "_")),))
    raise DatasetFormatError(f"unrecognized sentence shape: {sentence!r}")


def sentence_to_axiom(sentence: str, problem: Problem) -> str:
    """Formalize one context sentence through the template inverse.

    Returns the canonical axiom string; for generated problems this equals
    the aligned axiom line of the theory byte for byte.
    """
    if problem.ontology is Ontology.DEONTIC:
        sorts = {
            sym.name: sym.sort or ""
            for sym in problem.theory_state().objects.values()
        }
        return str(_invert_deontic_sentence(sentence, sorts))
    surfaces, _, _, _ = _ontology_tables(problem.ontology)
    return str(_invert_ontology_sentence(sentence, surfaces))


# ---------------------------------------------------------------------------
# Dataset I/O

_REQUIRED_FIELDS = ("context", "question", "answer", "hops", "ontology", "theory")


def problem_to_record(problem: Problem) -> dict:
    return {
        "context": list(problem.context),
        "question": problem.question,
        "answer": "True" if problem.answer else "False",
        "hops": problem.hops,
        "ontology": problem.ontology.value,
        "theory": problem.theory,
        "distractors": list(problem.distractors),
    }


def problem_from_record(record: dict, lineno: int | None = None) -> Problem:
    where = f"line {lineno}: " if lineno is not None else ""
    for key in _REQUIRED_FIELDS:
        if key not in record:
            raise DatasetFormatError(f"{where}missing field {key!r}")
    if record["answer"] not in ("True", "False"):
        raise DatasetFormatError(f"{where}answer must be 'True' or 'False'")
    return Problem(
        context=tuple(record["context"]),
        question=record["question"],
        answer=record["answer"] == "True",
        hops=int(record["hops"]),
        ontology=Ontology(record["ontology"]),
        theory=record["theory"],
        distractors=tuple(record.get("distractors", ())),
    )


def save_dataset(path: str, problems: Iterable[Problem]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for problem in problems:
            fh.write(json.dumps(problem_to_record(problem)) + "\n")


def load_dataset(path: str) -> list[Problem]:
    out: list[Problem] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {lineno}: {exc}") from None
            out.append(problem_from_record(record, lineno))
    return out


def import_external_record(record: dict) -> Problem:
    """Map a minimal external record {theory, question, answer} to a Problem.

    ``theory`` must be kernel surface syntax with a goal line; hops are
    recomputed from the oracle's derivation graph, context defaults to
    empty, and the ontology defaults to fictional.
    """
    for key in ("theory", "question", "answer"):
        if key not in record:
            raise DatasetFormatError(f"missing field {key!r}")
    state = parse_theory(record["theory"])
    if state.goal is None:
        raise DatasetFormatError("external theory has no goal line")
    hops = shortest_derivation(state, state.goal)
    if hops is None:
        hops = shortest_derivation(state, state.goal.complement()) or 0
    return Problem(
        context=tuple(record.get("context", ())),
        question=record["question"],
        answer=str(record["answer"]) == "True",
        hops=hops,
        ontology=Ontology(record.get("ontology", "fictional")),
        theory=record["theory"],
        distractors=tuple(record.get("distractors", ())),
    )


def generate_split(
    count: int,
    ontology: Ontology,
    seed: int = 0,
    hops: Sequence[int] = (1, 2, 3, 4, 5),
) -> list[Problem]:
    """``count`` problems cycling through the requested hop depths."""
    out: list[Problem] = []
    for i in range(count):
        h = hops[i % len(hops)]
        if ontology is Ontology.DEONTIC:
            out.append(generate_deontic_problem(seed * 1_000_003 + i, hops=h))
        else:
            out.append(generate_ontology_problem(seed * 1_000_003 + i, h, ontology))
    return out
