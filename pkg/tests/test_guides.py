"""Guide contract, engine lifting, and the memory/quote demonstration guides."""

from __future__ import annotations

import pytest

from guidekit import lexical as rx
from guidekit.csd import Verdict, constrained_sample, validate
from guidekit.guides import Guide, constant_guide, lift, memory_guide, quote_guide
from guidekit.lexical import Vocabulary
from guidekit.lm import ScriptedLM


class ByHistoryLength(Guide):
    """Allows "a" for the first block, "b" for the second, nothing after."""

    def allowed(self, history):
        langs = [rx.strings([b"a"]), rx.strings([b"b"])]
        if len(history) < len(langs):
            return langs[len(history)]
        return rx.EMPTY


def test_lift_constant_guide_accepts_repeated_blocks():
    engine = lift(constant_guide(rx.strings([b"x"])))
    assert validate(engine, b"foo[[x]]bar[[x]]").verdict is Verdict.COMPLETE


def test_lift_history_dependent_guide_rejects_repeat():
    engine = lift(ByHistoryLength())
    assert validate(engine, b"[[a]][[b]]").verdict is Verdict.COMPLETE
    report = validate(engine, b"[[a]][[a]]")
    assert report.verdict is Verdict.VIOLATION
    assert report.valid_prefix_length == len(b"[[a]][[")


def test_lift_passes_plain_text_through():
    engine = lift(ByHistoryLength())
    assert validate(engine, b"no delimiters at all").verdict is Verdict.COMPLETE


def test_lift_validates_delimiters():
    guide = constant_guide(rx.strings([b"x"]))
    with pytest.raises(ValueError):
        lift(guide, b"", b"]]")
    with pytest.raises(ValueError):
        lift(guide, b"@@", b"@@")


def test_custom_delimiters():
    engine = lift(constant_guide(rx.strings([b"x"])), b"<<", b">>")
    assert validate(engine, b"a <<x>> b").verdict is Verdict.COMPLETE
    assert validate(engine, b"a <<y>> b").verdict is Verdict.VIOLATION


def test_block_content_soundness_by_replay():
    vocab = Vocabulary.printable_ascii()
    guide = ByHistoryLength()
    engine = lift(guide)
    lm = ScriptedLM([b"start [[a]] mid [[b]] end"], vocab)
    transcript = constrained_sample(lm, engine, vocab)
    contents = transcript.block_contents()
    for i, content in enumerate(contents):
        lang = guide.allowed(contents[:i])
        assert rx.matches(lang, content)


# ---------------------------------------------------------------------------
# Memory guide


def test_memory_guide_returns_last_value():
    guide = memory_guide()
    lang = guide.allowed((b"set:loc=kitchen",))
    assert rx.matches(lang, b"get:loc=kitchen")
    assert not rx.matches(lang, b"get:loc=garden")


def test_memory_guide_last_write_wins():
    guide = memory_guide()
    lang = guide.allowed((b"set:loc=kitchen", b"set:loc=garden"))
    assert rx.matches(lang, b"get:loc=garden")
    assert not rx.matches(lang, b"get:loc=kitchen")


def test_memory_guide_no_reads_before_writes():
    guide = memory_guide()
    lang = guide.allowed(())
    assert not rx.matches(lang, b"get:loc=kitchen")
    assert rx.matches(lang, b"set:loc=kitchen")
    assert rx.matches(lang, b"set:pos_2=anything at all")


def test_memory_guide_end_to_end_decode():
    vocab = Vocabulary.printable_ascii()
    engine = lift(memory_guide())
    lm = ScriptedLM(
        [b"I will note [[set:place=library]] and recall [[get:place=garden]] later."],
        vocab,
    )
    transcript = constrained_sample(lm, engine, vocab)
    assert not transcript.aborted
    contents = transcript.block_contents()
    assert contents[0] == b"set:place=library"
    assert contents[1].startswith(b"get:place=library") or contents[1].startswith(b"set:")


# ---------------------------------------------------------------------------
# Quote guide


def test_quote_guide_allows_only_source_sentences():
    guide = quote_guide([b"s1", b"s2"])
    for history in ((), (b"s1",)):
        lang = guide.allowed(history)
        assert rx.matches(lang, b"s1")
        assert rx.matches(lang, b"s2")
        assert not rx.matches(lang, b"s3")


def test_quote_guide_requires_source():
    with pytest.raises(ValueError):
        quote_guide([])


def test_quote_blocks_come_from_source_byte_for_byte():
    vocab = Vocabulary.printable_ascii()
    source = [b"The sky is blue.", b"Water is wet."]
    engine = lift(quote_guide(source))
    lm = ScriptedLM([b"As they say, [[The sky is purple.]] indeed."], vocab)
    transcript = constrained_sample(lm, engine, vocab)
    assert not transcript.aborted
    for content in transcript.block_contents():
        assert content in source


def test_single_sentence_source_forces_the_block():
    vocab = Vocabulary.printable_ascii()
    engine = lift(quote_guide([b"Only this."]))
    lm = ScriptedLM([b"Quote: [[Q"], vocab)  # diverges immediately
    transcript = constrained_sample(lm, engine, vocab)
    assert not transcript.aborted
    assert transcript.block_contents() == (b"Only this.",)
