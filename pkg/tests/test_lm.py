"""Scripted model behavior: biased sampling, policies, chat adaptation."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guidekit import lexical as rx
from guidekit.csd import constrained_sample, validate, Verdict
from guidekit.guides import constant_guide, lift
from guidekit.lexical import Vocabulary
from guidekit.lm import (
    APOLOGY,
    EmptyAllowedSet,
    Policy,
    ScriptedLM,
    chat_adapter,
    load_script,
    save_script,
)


def ascii_vocab(extra=()):
    return Vocabulary.printable_ascii(extra=extra)


# ---------------------------------------------------------------------------
# sample_one


def test_sample_one_singleton():
    vocab = ascii_vocab()
    lm = ScriptedLM([b"anything"], vocab)
    lm.begin(b"")
    only = vocab.id_of(b"(")
    assert lm.sample_one(b"", {only}) == only


def test_sample_one_prefers_script_overlap():
    vocab = ascii_vocab(extra=[b"(impus", b"(orange"])
    lm = ScriptedLM([b"(orange wren) is next"], vocab)
    lm.begin(b"")
    allowed = {vocab.id_of(b"(impus"), vocab.id_of(b"(orange")}
    assert lm.sample_one(b"", allowed) == vocab.id_of(b"(orange")


def test_sample_one_breaks_ties_lexicographically():
    vocab = ascii_vocab()
    lm = ScriptedLM([b"zzz"], vocab)
    lm.begin(b"")
    allowed = {vocab.id_of(b"b"), vocab.id_of(b"a")}
    assert lm.sample_one(b"", allowed) == vocab.id_of(b"a")


def test_sample_one_rejects_empty_set():
    vocab = ascii_vocab()
    lm = ScriptedLM([b"x"], vocab)
    lm.begin(b"")
    with pytest.raises(EmptyAllowedSet):
        lm.sample_one(b"", set())


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(min_value=0, max_value=90), min_size=1, max_size=12), st.binary(max_size=6))
def test_sample_one_always_within_allowed(allowed, plan):
    vocab = ascii_vocab()
    lm = ScriptedLM([bytes(b % 95 + 32 for b in plan)], vocab)
    lm.begin(b"")
    assert lm.sample_one(b"", allowed) in allowed


# ---------------------------------------------------------------------------
# continuation & policies


def test_cooperative_session_is_deterministic():
    vocab = ascii_vocab()
    engine = lift(constant_guide(rx.strings([b"ok", b"fine"])))
    outs = set()
    for _ in range(3):
        lm = ScriptedLM([b"say [[nope]] end"], vocab, Policy.cooperative(), seed=3)
        outs.add(constrained_sample(lm, engine, vocab).full_text)
    assert len(outs) == 1


def test_chat_adapter_is_transparent_without_violations():
    vocab = ascii_vocab()
    engine = lift(constant_guide(rx.strings([b"ok"])))
    script = [b"all [[ok]] here"]
    plain = constrained_sample(ScriptedLM(script, vocab), engine, vocab)
    chat = constrained_sample(chat_adapter(ScriptedLM(script, vocab)), engine, vocab)
    assert plain.full_text == chat.full_text
    assert plain.violation_count == chat.violation_count == 0


def test_apologetic_recovers_with_extra_violations():
    vocab = ascii_vocab()
    engine = lift(constant_guide(rx.strings([b"(impus wren)", b"nothing"])))
    # Message 1 stops inside the block; the interrupted model apologizes
    # twice (in-block violations) before resuming its valid plan.
    script = [b"Think [[(impus", b" wren)]] done. Answer: True"]
    inner = ScriptedLM(script, vocab, Policy.apologetic(2))
    transcript = constrained_sample(chat_adapter(inner), engine, vocab)
    assert not transcript.aborted
    assert transcript.violation_count >= 3  # boundary + 2 apologies
    assert transcript.block_contents() == (b"(impus wren)",)
    assert validate(engine, transcript.full_text).verdict is Verdict.COMPLETE


def test_apologetic_without_adapter_never_apologizes():
    vocab = ascii_vocab()
    engine = lift(constant_guide(rx.strings([b"(impus wren)", b"nothing"])))
    script = [b"Think [[(impus", b" wren)]] done."]
    inner = ScriptedLM(script, vocab, Policy.apologetic(2))
    transcript = constrained_sample(inner, engine, vocab)
    assert not transcript.aborted
    assert APOLOGY not in transcript.full_text


def test_apologetic_forever_aborts_at_cap():
    vocab = ascii_vocab()
    engine = lift(constant_guide(rx.strings([b"(a very long certified deduction indeed)"])))
    inner = ScriptedLM([b"Reasoning: [["], vocab, Policy.apologetic())
    transcript = constrained_sample(chat_adapter(inner), engine, vocab, max_violations=20)
    assert transcript.aborted
    assert transcript.violation_count == 20


def test_adversarial_insists_and_aborts():
    vocab = ascii_vocab()
    engine = lift(constant_guide(rx.strings([b"(a very long certified deduction indeed)"])))
    lm = ScriptedLM([b"x [[wrong content that never fits the set"], vocab, Policy.adversarial())
    transcript = constrained_sample(lm, engine, vocab, max_violations=10)
    assert transcript.aborted
    assert transcript.violation_count == 10


def test_identical_seed_and_script_give_identical_transcripts():
    vocab = ascii_vocab()
    engine = lift(constant_guide(rx.strings([b"pass", b"fail"])))
    script = [b"check [[pa", b"ss]] done"]

    def run():
        lm = chat_adapter(ScriptedLM(script, vocab, Policy.apologetic(1), seed=9))
        t = constrained_sample(lm, engine, vocab)
        return (t.full_text, t.violation_count, t.aborted)

    assert run() == run()


def test_script_requires_byte_coverage():
    tiny = Vocabulary.from_tokens([b"a", b"b"])
    with pytest.raises(Exception):
        ScriptedLM([b"abc"], tiny)


# ---------------------------------------------------------------------------
# script files


def test_script_file_round_trip(tmp_path):
    path = tmp_path / "script.txt"
    messages = [b"hello [[world]]", b" and\nmore"]
    save_script(str(path), messages, Policy.apologetic(3))
    loaded, policy = load_script(str(path))
    assert loaded == messages
    assert policy.kind.value == "apologetic" and policy.apology_limit == 3


def test_script_file_infinite_apologies(tmp_path):
    path = tmp_path / "script.txt"
    save_script(str(path), [b"x"], Policy.apologetic())
    _, policy = load_script(str(path))
    assert math.isinf(policy.apology_limit)


def test_script_file_requires_policy_header(tmp_path):
    path = tmp_path / "script.txt"
    path.write_text("6162\n")
    with pytest.raises(Exception):
        load_script(str(path))
