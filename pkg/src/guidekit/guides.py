"""Guides: stateful maps from prior block contents to allowed next blocks.

A guide sees the ordered list of contents of previously completed guided
blocks -- never the surrounding free text -- and returns the regular set of
contents the next block may take.  ``lift`` wraps a guide into a completion
engine that alternates unconstrained text (terminated by the opening
delimiter) with constrained blocks (terminated by the closing delimiter).

Two small demonstration guides ship here: a key/value memory whose reads are
forced to return the last stored value, and a quote guide that only admits
sentences drawn verbatim from a trusted source.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

from . import lexical as rx
from .csd import CompletionEngine, EngineNode, Region

GuideHistory = tuple[bytes, ...]


class Guide(ABC):
    """Contract: deterministic in its history argument.

    Returning the empty language means "no block may open here"; the engine
    surfaces that as a violation with no way to complete the opening
    delimiter.
    """

    @abstractmethod
    def allowed(self, history: GuideHistory) -> rx.RegularSet:
        ...

    def clone(self) -> "Guide":
        """Independent copy for a concurrent session (stateless by default)."""
        return self


class _TextNode(EngineNode):
    __slots__ = ("engine", "history")

    def __init__(self, engine: "GuidedEngine", history: GuideHistory):
        self.engine = engine
        self.history = history

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _TextNode) and other.history == self.history

    def __hash__(self) -> int:
        return hash(("text", self.history))

    def region(self) -> Region:
        return Region(None, self.engine.open_delim)

    def after_region(self, content: bytes) -> EngineNode | None:
        lang = self.engine.guide.allowed(self.history)
        if lang.is_void():
            return None  # guide refuses to open a block
        return _BlockNode(self.engine, self.history, lang)


class _BlockNode(EngineNode):
    __slots__ = ("engine", "history", "lang")

    def __init__(self, engine: "GuidedEngine", history: GuideHistory, lang: rx.RegularSet):
        self.engine = engine
        self.history = history
        self.lang = lang

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _BlockNode) and other.history == self.history

    def __hash__(self) -> int:
        return hash(("block", self.history))

    def region(self) -> Region:
        return Region(self.lang, self.engine.close_delim)

    def after_region(self, content: bytes) -> EngineNode | None:
        # History extends exactly when a constrained region reaches a match.
        return _TextNode(self.engine, self.history + (content,))


@dataclass(frozen=True)
class GuidedEngine(CompletionEngine):
    """A guide framed by delimiters: text, [[block]], text, [[block]], ..."""

    guide: Guide
    open_delim: bytes
    close_delim: bytes

    def start(self) -> EngineNode:
        return _TextNode(self, ())


def lift(guide: Guide, open_delim: bytes = b"[[", close_delim: bytes = b"]]") -> GuidedEngine:
    """Wrap a guide into a completion engine with delimiter framing."""
    if not open_delim or not close_delim:
        raise ValueError("delimiters must be non-empty")
    if open_delim == close_delim:
        raise ValueError("delimiters must be distinct")
    return GuidedEngine(guide, bytes(open_delim), bytes(close_delim))


# ---------------------------------------------------------------------------
# Demonstration guides


@dataclass(frozen=True)
class ConstantGuide(Guide):
    lang: rx.RegularSet

    def allowed(self, history: GuideHistory) -> rx.RegularSet:
        return self.lang


def constant_guide(lang: rx.RegularSet) -> ConstantGuide:
    return ConstantGuide(lang)


_IDENT = rx.concat(
    rx.alt(rx.char_range("a", "z"), rx.literal(b"_")),
    rx.star(rx.alt(rx.char_range("a", "z"), rx.char_range("0", "9"), rx.literal(b"_"))),
)


class MemoryGuide(Guide):
    """Blocks ``set:key=value`` and ``get:key=value``.

    Writes are always syntactically allowed (identifier keys, free values up
    to the closing delimiter).  Reads are constrained so the key is one that
    was set before and the value equals the last one stored for it; with no
    keys stored, no read block is allowed at all.
    """

    def __init__(self, close_delim: bytes = b"]]"):
        self._value_lang = rx.without_substring(close_delim)

    def allowed(self, history: GuideHistory) -> rx.RegularSet:
        store: dict[bytes, bytes] = {}
        for block in history:
            if block.startswith(b"set:"):
                key, sep, value = block[4:].partition(b"=")
                if sep:
                    store[key] = value
        set_lang = rx.concat(rx.literal(b"set:"), _IDENT, rx.literal(b"="), self._value_lang)
        get_lang = rx.strings(b"get:" + k + b"=" + v for k, v in store.items())
        return rx.alt(set_lang, get_lang)


def memory_guide(close_delim: bytes = b"]]") -> MemoryGuide:
    return MemoryGuide(close_delim)


@dataclass(frozen=True)
class QuoteGuide(Guide):
    """Every block must be one of the source sentences, byte for byte."""

    sentences: tuple[bytes, ...]

    def allowed(self, history: GuideHistory) -> rx.RegularSet:
        return rx.strings(self.sentences)


def quote_guide(source: Sequence[bytes]) -> QuoteGuide:
    if not source:
        raise ValueError("quote guide needs a non-empty source")
    return QuoteGuide(tuple(bytes(s) for s in source))
