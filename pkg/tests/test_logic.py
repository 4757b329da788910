"""Kernel tests: parsing, step inference, closure, goals, deontic layer.

Closure is checked against a brute-force bottom-up evaluator written here:
full ground instantiation of every rule over the constant universe, no
indexing, no unification -- independent of the kernel's matching code.
"""

from __future__ import annotations

import itertools
import random

import pytest

from guidekit import logic as lg
from guidekit.logic import (
    Answer,
    Const,
    GoalStatus,
    GoalUnset,
    Kind,
    Literal,
    NotDerivable,
    Rule,
    Symbol,
    TheoryState,
    TheorySyntaxError,
    Var,
    assert_fact,
    check_goal,
    closure,
    deontic_base,
    parse_sexpr,
    parse_theory,
    step_inferences,
)

WREN_THEORY = """
object:wren
prop:dumpus
prop:impus
prop:vumpus
prop:luminous
prop:orange
prop:wumpus
prop:bitter
prop:jompus
prop:numpus
prop:rompus
prop:opaque
prop:dull
axiom:(dumpus 'x) -> (impus 'x)
axiom:(vumpus 'x) -> (not (luminous 'x))
axiom:(dumpus 'x) -> (orange 'x)
axiom:(wumpus 'x) -> (bitter 'x)
axiom:(jompus 'x) -> (not (orange 'x))
axiom:(wumpus 'x) -> (numpus 'x)
axiom:(impus 'x) -> (rompus 'x)
axiom:(impus 'x) -> (opaque 'x)
axiom:(numpus 'x) -> (dull 'x)
axiom:(vumpus 'x) -> (wumpus 'x)
axiom:(numpus 'x) -> (dumpus 'x)
axiom:(dumpus wren)
goal:(orange wren)
"""


# ---------------------------------------------------------------------------
# Parsing


def test_parse_rule_round_trip():
    rule = parse_sexpr("(dumpus 'x) -> (impus 'x)")
    assert isinstance(rule, Rule)
    assert [str(l) for l in rule.antecedents] == ["(dumpus 'x)"]
    assert str(rule.consequent) == "(impus 'x)"
    assert str(rule) == "(dumpus 'x) -> (impus 'x)"


def test_parse_ground_negated_literal():
    lit = parse_sexpr("(not (needs dog cat))")
    assert isinstance(lit, Literal)
    assert lit.negated and lit.is_ground()
    assert str(lit) == "(not (needs dog cat))"


def test_parse_checks_declared_arity():
    state = TheoryState()
    state.declare(Symbol(Kind.RELATION, "chases"))
    with pytest.raises(TheorySyntaxError):
        parse_sexpr("(chases lion)", state)


def test_parse_rejects_unbalanced_parens():
    with pytest.raises(TheorySyntaxError):
        parse_sexpr("(dumpus 'x")


def test_parse_rejects_bad_negation_placement():
    with pytest.raises(TheorySyntaxError):
        parse_sexpr("(needs (not dog) cat)")
    with pytest.raises(TheorySyntaxError):
        parse_sexpr("(not (not (orange wren)))")


def test_parse_rejects_unbound_consequent_variable():
    with pytest.raises(TheorySyntaxError):
        parse_sexpr("(dumpus 'x) -> (impus 'y)")


def test_parse_allows_ground_consequent_with_variable_antecedent():
    rule = parse_sexpr("(chases 'x cat) -> (visits cat cow)")
    assert isinstance(rule, Rule)


def test_curried_rule_parses_to_two_antecedents():
    rule = parse_sexpr("(needs 'x dog) -> (red 'x) -> (chases 'x dog)")
    assert isinstance(rule, Rule)
    assert len(rule.antecedents) == 2
    assert str(rule) == "(needs 'x dog) -> (red 'x) -> (chases 'x dog)"


def test_theory_file_errors_carry_line_numbers():
    with pytest.raises(TheorySyntaxError, match="line 2"):
        parse_theory("object:wren\naxiom:(dumpus 'x -> (impus 'x)\n")


# ---------------------------------------------------------------------------
# Step inference


def test_step_inferences_matches_worked_example():
    state = parse_theory(WREN_THEORY)
    assert [str(l) for l in step_inferences(state)] == ["(impus wren)", "(orange wren)"]


def test_step_inferences_empty_at_fixpoint():
    state = parse_theory(WREN_THEORY)
    state.facts = dict.fromkeys(sorted(closure(state), key=str))
    assert step_inferences(state) == []


def test_step_inferences_needs_all_antecedents():
    theory = """
object:bob
object:dog
relation:needs
relation:chases
prop:red
axiom:(needs 'x dog) -> (red 'x) -> (chases 'x dog)
axiom:(needs bob dog)
"""
    state = parse_theory(theory)
    assert step_inferences(state) == []
    assert_fact(state, parse_sexpr("(red bob)"))
    assert [str(l) for l in step_inferences(state)] == ["(chases bob dog)"]


def test_assert_fact_derived_and_not_derivable():
    state = parse_theory(WREN_THEORY)
    impus = parse_sexpr("(impus wren)")
    rompus = parse_sexpr("(rompus wren)")
    with pytest.raises(NotDerivable):
        assert_fact(state, rompus, derived=True)
    assert_fact(state, impus, derived=True)
    assert impus in state.facts
    assert state.derivation_log[-1].fact == impus
    assert_fact(state, rompus, derived=True)  # now one step away


def test_assert_assumption_always_allowed():
    state = parse_theory(WREN_THEORY)
    lit = parse_sexpr("(bitter wren)")
    assert_fact(state, lit)
    assert lit in state.assumptions


def test_contradiction_is_recorded_not_fatal():
    theory = """
object:alex
prop:sheep
prop:bitter
prop:animal
axiom:(sheep 'x) -> (bitter 'x)
axiom:(animal 'x) -> (not (bitter 'x))
axiom:(sheep alex)
axiom:(animal alex)
"""
    state = parse_theory(theory)
    state.facts = dict.fromkeys(sorted(closure(state), key=str))
    assert [str(l) for l in lg.contradictions(state)] == ["(bitter alex)"]


# ---------------------------------------------------------------------------
# Closure and goals


def test_closure_of_wren_theory():
    state = parse_theory(WREN_THEORY)
    derived = {str(l) for l in closure(state)} - {str(l) for l in state.assumptions}
    assert derived == {"(impus wren)", "(rompus wren)", "(opaque wren)", "(orange wren)"}


def test_closure_without_rules_is_assumptions():
    state = parse_theory("object:a\nprop:p\naxiom:(p a)\n")
    assert closure(state) == frozenset(state.assumptions)


def test_check_goal_proved_disproved_open():
    state = parse_theory(WREN_THEORY)
    state.facts = dict.fromkeys(sorted(closure(state), key=str))
    assert check_goal(state) is GoalStatus.PROVED
    assert lg.answer_from_goal(check_goal(state)) is Answer.TRUE

    neg = parse_theory(WREN_THEORY.replace("goal:(orange wren)", "goal:(not (orange wren))"))
    neg.facts = dict.fromkeys(sorted(closure(neg), key=str))
    assert check_goal(neg) is GoalStatus.DISPROVED

    fresh = parse_theory(WREN_THEORY.replace("goal:(orange wren)", "goal:(luminous wren)"))
    assert check_goal(fresh) is GoalStatus.OPEN


def test_check_goal_requires_goal():
    state = parse_theory("object:a\nprop:p\naxiom:(p a)\n")
    with pytest.raises(GoalUnset):
        check_goal(state)


# ---------------------------------------------------------------------------
# Brute-force oracle equivalence


def _brute_force_closure(state: TheoryState) -> frozenset[Literal]:
    """Naive bottom-up evaluation by full ground instantiation."""
    constants = sorted({t.name for f in state.facts for t in f.args if isinstance(t, Const)})
    for rule in state.rules:
        for lit in (*rule.antecedents, rule.consequent):
            for term in lit.args:
                if isinstance(term, Const):
                    constants.append(term.name)
    constants = sorted(set(constants))
    facts = set(state.facts)
    changed = True
    while changed:
        changed = False
        for rule in state.rules:
            variables = sorted(rule.variables())
            for combo in itertools.product(constants, repeat=len(variables)):
                binding = dict(zip(variables, (Const(c) for c in combo)))
                grounded = [
                    Literal(l.negated, l.name, tuple(binding.get(t.name, t) if isinstance(t, Var) else t for t in l.args))
                    for l in rule.antecedents
                ]
                if all(g in facts for g in grounded):
                    cons = Literal(
                        rule.consequent.negated,
                        rule.consequent.name,
                        tuple(
                            binding.get(t.name, t) if isinstance(t, Var) else t
                            for t in rule.consequent.args
                        ),
                    )
                    if cons not in facts:
                        facts.add(cons)
                        changed = True
    return frozenset(facts)


def _random_theory(rng: random.Random, max_rules: int = 10, max_objects: int = 5) -> TheoryState:
    state = TheoryState()
    objects = [f"o{i}" for i in range(rng.randint(2, max_objects))]
    props = [f"p{i}" for i in range(rng.randint(2, 6))]
    relations = [f"r{i}" for i in range(rng.randint(1, 3))]
    for o in objects:
        state.declare(Symbol(Kind.OBJECT, o))
    for p in props:
        state.declare(Symbol(Kind.PROP, p))
    for r in relations:
        state.declare(Symbol(Kind.RELATION, r))

    def random_literal(vars_allowed: list[str]) -> Literal:
        negated = rng.random() < 0.25
        if rng.random() < 0.7:
            name = rng.choice(props)
            args = (rng.choice(vars_allowed),)
        else:
            name = rng.choice(relations)
            args = (rng.choice(vars_allowed), rng.choice(vars_allowed))
        terms = tuple(Var(a[1:]) if a.startswith("'") else Const(a) for a in args)
        return Literal(negated, name, terms)

    for _ in range(rng.randint(1, max_rules)):
        vars_here = ["'x"] + (["'y"] if rng.random() < 0.4 else [])
        pool = vars_here + objects
        antecedents = tuple(random_literal(pool) for _ in range(rng.randint(1, 2)))
        ante_vars = {t.name for l in antecedents for t in l.args if isinstance(t, Var)}
        cons_pool = ["'" + v for v in ante_vars] + objects if ante_vars else objects
        consequent = random_literal(cons_pool)
        state.rules.append(Rule(antecedents, consequent))
    for _ in range(rng.randint(1, 4)):
        lit = random_literal(objects)
        state.add_axiom(lit)
    return state


def test_closure_equals_brute_force_on_random_theories():
    rng = random.Random(31337)
    for _ in range(60):
        state = _random_theory(rng)
        assert closure(state) == _brute_force_closure(state)


def test_step_then_saturate_equals_closure():
    rng = random.Random(4)
    for _ in range(20):
        state = _random_theory(rng)
        target = closure(state)
        work = state.clone()
        while True:
            steps = step_inferences(work)
            if not steps:
                break
            for lit in steps:
                assert_fact(work, lit, derived=True)
        assert frozenset(work.facts) == target


def test_step_inferences_order_is_stable():
    rng = random.Random(8)
    state = _random_theory(rng)
    assert step_inferences(state) == step_inferences(state.clone())


def test_monotonicity_of_closure():
    rng = random.Random(12)
    state = _random_theory(rng)
    base = closure(state)
    extended = state.clone()
    extra = Literal(False, "p0", (Const("o0"),))
    assert_fact(extended, extra)
    assert base <= closure(extended) | {extra}
    assert closure(extended) >= closure(state) or extra in closure(extended)


def test_derivation_log_replays():
    from guidekit.logic import substitute

    state = parse_theory(WREN_THEORY)
    work = state.clone()
    while True:
        steps = step_inferences(work)
        if not steps:
            break
        for lit in steps:
            assert_fact(work, lit, derived=True)
    for entry in work.derivation_log:
        grounded = substitute(entry.rule.consequent, dict(entry.substitution))
        assert grounded == entry.fact


# ---------------------------------------------------------------------------
# Deontic layer


def test_deontic_base_counts():
    sig = deontic_base()
    assert len(sig.actions) == 14
    assert len(sig.object_sorts) == 5
    assert {p.name for p in sig.predicates} == {"permissible", "obligatory"}


def test_deontic_well_formed_literal():
    sig = deontic_base()
    lit = parse_sexpr("(permissible (suggest_alternative_time review bob))")
    sorts = {"review": "event", "bob": "person"}
    assert sig.well_formed(lit, sorts)
    assert not sig.well_formed(lit, {"review": "invite", "bob": "person"})
    # a person may stand in for an entity
    add = parse_sexpr("(obligatory (add_participant review bob))")
    assert sig.well_formed(add, sorts)


def test_deontic_inference_over_action_terms():
    theory = """
object:team_event event
object:bob person
action:add_participant event entity
prop:long
relation:busy_during
axiom:(busy_during 'p 'e) -> (not (permissible (add_participant 'e 'p)))
axiom:(busy_during bob team_event)
goal:(permissible (add_participant team_event bob))
"""
    state = parse_theory(theory)
    steps = step_inferences(state)
    assert [str(l) for l in steps] == ["(not (permissible (add_participant team_event bob)))"]
    state.facts = dict.fromkeys(sorted(closure(state), key=str))
    assert check_goal(state) is GoalStatus.DISPROVED
