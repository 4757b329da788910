"""Canned reasoning sessions used across tests.

Three worked multi-hop sessions: a fictional taxonomy proof, a long detour
that ends by contradicting the goal, and a relational session whose stated
conclusion was never formally derived (the replay must catch that).  Each
fixture carries the theory in kernel surface syntax, the block sequence of a
full guided session, and the answer the session stated.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TraceFixture:
    name: str
    theory: str
    blocks: tuple[str, ...]
    stated: str
    expected_answer: str
    expected_certified: bool


def _decls(objects: list[str], props: list[str], relations: list[str]) -> list[str]:
    out = [f"object:{o}" for o in objects]
    out += [f"prop:{p}" for p in props]
    out += [f"relation:{r}" for r in relations]
    return out


WREN = TraceFixture(
    name="wren",
    theory="\n".join(
        _decls(
            ["wren"],
            ["dumpus", "impus", "vumpus", "luminous", "orange", "wumpus",
             "bitter", "jompus", "numpus", "rompus", "opaque", "dull"],
            [],
        )
        + [
            "axiom:(dumpus 'x) -> (impus 'x)",
            "axiom:(vumpus 'x) -> (not (luminous 'x))",
            "axiom:(dumpus 'x) -> (orange 'x)",
            "axiom:(wumpus 'x) -> (bitter 'x)",
            "axiom:(jompus 'x) -> (not (orange 'x))",
            "axiom:(wumpus 'x) -> (numpus 'x)",
            "axiom:(impus 'x) -> (rompus 'x)",
            "axiom:(impus 'x) -> (opaque 'x)",
            "axiom:(numpus 'x) -> (dull 'x)",
            "axiom:(vumpus 'x) -> (wumpus 'x)",
            "axiom:(numpus 'x) -> (dumpus 'x)",
            "axiom:(dumpus wren)",
            "goal:(orange wren)",
        ]
    )
    + "\n",
    blocks=(
        "goal:(orange wren)",
        "infer:(impus wren)",
        "infer:(rompus wren)",
        "infer:(opaque wren)",
        "infer:(orange wren)",
    ),
    stated="True",
    expected_answer="True",
    expected_certified=True,
)


ALEX = TraceFixture(
    name="alex",
    theory="\n".join(
        _decls(
            ["alex", "dog", "cat"],
            ["small", "feline", "snake", "animal", "bitter", "sheep",
             "carnivore", "vertebrate", "mammal", "dull", "kind", "happy",
             "cold", "liquid", "cow", "brown", "opaque"],
            [],
        )
        + [
            "axiom:(dog 'x) -> (small 'x)",
            "axiom:(feline 'x) -> (snake 'x)",
            "axiom:(animal 'x) -> (not (bitter 'x))",
            "axiom:(sheep 'x) -> (bitter 'x)",
            "axiom:(cat 'x) -> (carnivore 'x)",
            "axiom:(vertebrate 'x) -> (mammal 'x)",
            "axiom:(mammal 'x) -> (feline 'x)",
            "axiom:(vertebrate 'x) -> (dull 'x)",
            "axiom:(snake 'x) -> (cat 'x)",
            "axiom:(cat 'x) -> (not (kind 'x))",
            "axiom:(snake 'x) -> (not (happy 'x))",
            "axiom:(sheep 'x) -> (vertebrate 'x)",
            "axiom:(feline 'x) -> (cold 'x)",
            "axiom:(dog 'x) -> (sheep 'x)",
            "axiom:(mammal 'x) -> (not (liquid 'x))",
            "axiom:(carnivore 'x) -> (cow 'x)",
            "axiom:(carnivore 'x) -> (brown 'x)",
            "axiom:(sheep alex)",
            "goal:(not (bitter alex))",
        ]
    )
    + "\n",
    blocks=(
        "goal:(not (bitter alex))",
        "infer:(vertebrate alex)",
        "infer:(dull alex)",
        "infer:(mammal alex)",
        "infer:(feline alex)",
        "infer:(not (liquid alex))",
        "infer:(snake alex)",
        "infer:(cat alex)",
        "infer:(carnivore alex)",
        "infer:(not (kind alex))",
        "infer:(not (happy alex))",
        "infer:(cold alex)",
        "infer:(brown alex)",
        "infer:(cow alex)",
        "infer:(bitter alex)",
    ),
    stated="False",
    expected_answer="False",
    expected_certified=True,
)


# The session below derives two true facts but never the goal; the stated
# answer is a guess the replay must refuse to certify.
COW_CAT = TraceFixture(
    name="cow_cat",
    theory="\n".join(
        _decls(
            ["cat", "cow", "dog", "squirrel"],
            ["red", "big", "nice", "green"],
            ["visits", "needs", "chases"],
        )
        + [
            "axiom:(red cat)",
            "axiom:(visits cat cow)",
            "axiom:(big cow)",
            "axiom:(needs cow dog)",
            "axiom:(needs cow squirrel)",
            "axiom:(not (needs dog cat))",
            "axiom:(visits dog cow)",
            "axiom:(chases squirrel cow)",
            "axiom:(nice squirrel)",
            "axiom:(needs squirrel dog)",
            "axiom:(needs 'x squirrel) -> (chases 'x cat)",
            "axiom:(chases 'x cat) -> (visits cat cow)",
            "axiom:(chases 'x cat) -> (nice 'x)",
            "axiom:(chases 'x squirrel) -> (chases squirrel cow)",
            "axiom:(chases 'x cow) -> (needs cow squirrel) -> (needs cow squirrel)",
            "axiom:(nice 'x) -> (not (needs 'x cat))",
            "axiom:(needs 'x dog) -> (red 'x) -> (chases 'x dog)",
            "axiom:(nice 'x) -> (not (green 'x)) -> (not (visits 'x cat))",
            "goal:(not (needs cow cat))",
        ]
    )
    + "\n",
    blocks=(
        "goal:(not (needs cow cat))",
        "infer:(chases cow cat)",
        "infer:(not (needs squirrel cat))",
    ),
    stated="True",
    expected_answer="True",
    expected_certified=False,
)

ALL_TRACES = (WREN, ALEX, COW_CAT)


def trace_transcript_text(fixture: TraceFixture) -> bytes:
    """Render the session as one guided transcript: declarations and axioms
    as blocks, then the inference chain, then the stated answer."""
    from guidekit.logic import parse_theory

    state = parse_theory(fixture.theory)
    parts: list[str] = []
    for name in state.objects:
        parts.append(f"[[object:{name}]]")
    from guidekit.logic import Kind

    for name, sym in state.predicates.items():
        kind = "prop" if sym.kind is Kind.PROP else "relation"
        parts.append(f"[[{kind}:{name}]]")
    axiom_lines = [ln[len("axiom:"):] for ln in fixture.theory.splitlines() if ln.startswith("axiom:")]
    for i, axiom in enumerate(axiom_lines, start=1):
        parts.append(f"{i}- [[axiom:{axiom}]].")
    for block in fixture.blocks:
        parts.append(f"[[{block}]]")
    text = "Formalized context: " + " ".join(parts)
    text += f"\nAnswer: {fixture.stated}"
    return text.encode()
