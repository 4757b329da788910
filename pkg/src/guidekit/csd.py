"""Constrained decoding against completion engines.

A completion engine dictates, for any transcript prefix, the region the next
bytes must fall in: either unconstrained text terminated by an opening
delimiter, or a constrained block whose content must belong to a regular set
and which is closed by a terminator.  Everything is replayed byte by byte, so
the verdict on a transcript depends only on its bytes, never on how a model's
tokenizer happened to segment them.

Validation runs a small frontier of replay threads:

* In unconstrained text the frontier is a single thread tracking partial
  progress into the opening delimiter (first occurrence always opens a
  block).
* Inside a constrained block a byte may extend the content, or -- when the
  content already forms a complete member of the region language -- begin the
  closing delimiter.  Both alternatives are kept; the thread dies when its
  derivative denotes the empty language.

A transcript is valid when some thread survives to the end outside of any
open block.  On violation, the report carries the largest valid prefix and
the set of vocabulary tokens viable at that point, which is exactly what the
rejection-based sampling loop needs to force one token and resume.
"""

from __future__ import annotations

import enum
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

from .lexical import RegularSet, TokenTrie, Vocabulary

if TYPE_CHECKING:  # pragma: no cover
    from .lm import LanguageModel


# ---------------------------------------------------------------------------
# Engine contract


@dataclass(frozen=True)
class Region:
    """Directive for one span: constrained by ``lang`` or free text if None."""

    lang: RegularSet | None
    terminator: bytes

    def __post_init__(self) -> None:
        if not self.terminator:
            raise ValueError("region terminator must be non-empty")
        if self.lang is not None and self.lang.is_void():
            raise ValueError("constrained regions must carry a non-empty language")

    @property
    def constrained(self) -> bool:
        return self.lang is not None


class EngineNode(ABC):
    """One step of an engine's region sequence."""

    @abstractmethod
    def region(self) -> Region:
        ...

    @abstractmethod
    def after_region(self, content: bytes) -> "EngineNode | None":
        """Engine continuation once this region's content is complete.

        Returning None means no region may follow (e.g. a guide refused to
        open a block); the replay thread entering it dies.
        """


class CompletionEngine(ABC):
    """Deterministic map from transcript prefixes to region directives."""

    @abstractmethod
    def start(self) -> EngineNode:
        ...

    def directive(self, prefix: bytes) -> Region:
        """Region governing the position right after ``prefix``.

        Raises ValueError if the engine itself never permitted ``prefix``.
        """
        cursor = EngineCursor(self)
        consumed = cursor.advance(prefix)
        if consumed != len(prefix):
            raise ValueError(f"prefix rejected by engine at byte {consumed}")
        return cursor.current_region()


# ---------------------------------------------------------------------------
# Replay threads


@dataclass(frozen=True)
class Span:
    region: int
    constrained: bool
    content: bytes
    certified: bool


_TEXT = 0      # unconstrained, tracking partial opening-delimiter progress
_CONTENT = 1   # inside a constrained block, matching the region language
_CLOSING = 2   # content complete, matching the closing delimiter


@dataclass(frozen=True)
class _Thread:
    node: EngineNode
    phase: int
    state: RegularSet | None  # content derivative while in _CONTENT
    progress: int             # delimiter bytes matched (_TEXT / _CLOSING)
    raw: bytes                # bytes consumed in the current region so far
    spans: tuple[Span, ...]

    def key(self) -> tuple:
        return (id(type(self.node)), self.node, self.phase, self.state, self.progress, self.raw)


def _prefix_function(pattern: bytes) -> tuple[int, ...]:
    fail = [0] * len(pattern)
    k = 0
    for i in range(1, len(pattern)):
        while k > 0 and pattern[i] != pattern[k]:
            k = fail[k - 1]
        if pattern[i] == pattern[k]:
            k += 1
        fail[i] = k
    return tuple(fail)


_KMP_CACHE: dict[bytes, tuple[int, ...]] = {}


def _kmp_step(pattern: bytes, state: int, byte: int) -> int:
    fail = _KMP_CACHE.get(pattern)
    if fail is None:
        fail = _prefix_function(pattern)
        _KMP_CACHE[pattern] = fail
    while state > 0 and pattern[state] != byte:
        state = fail[state - 1]
    return state + 1 if pattern[state] == byte else 0


def _enter_region(node: EngineNode | None, spans: tuple[Span, ...]) -> _Thread | None:
    if node is None:
        return None
    region = node.region()
    if region.constrained:
        if region.lang.is_void():  # defensive; Region rejects this
            return None
        return _Thread(node, _CONTENT, region.lang, 0, b"", spans)
    return _Thread(node, _TEXT, None, 0, b"", spans)


def _step_thread(thread: _Thread, byte: int) -> list[_Thread]:
    region = thread.node.region()
    raw = thread.raw + bytes([byte])
    if thread.phase == _TEXT:
        progress = _kmp_step(region.terminator, thread.progress, byte)
        if progress == len(region.terminator):
            content = raw[: len(raw) - len(region.terminator)]
            span = Span(len(thread.spans), False, content, False)
            nxt = _enter_region(thread.node.after_region(content), thread.spans + (span,))
            return [nxt] if nxt is not None else []
        return [_Thread(thread.node, _TEXT, None, progress, raw, thread.spans)]

    if thread.phase == _CONTENT:
        out: list[_Thread] = []
        derived = thread.state.derive(byte)
        if not derived.is_void():
            out.append(_Thread(thread.node, _CONTENT, derived, 0, raw, thread.spans))
        if thread.state.null and byte == region.terminator[0]:
            content = thread.raw
            if len(region.terminator) == 1:
                span = Span(len(thread.spans), True, content, True)
                nxt = _enter_region(thread.node.after_region(content), thread.spans + (span,))
                if nxt is not None:
                    out.append(nxt)
            else:
                out.append(_Thread(thread.node, _CLOSING, None, 1, content, thread.spans))
        return out

    # _CLOSING
    if byte != region.terminator[thread.progress]:
        return []
    progress = thread.progress + 1
    if progress == len(region.terminator):
        content = thread.raw
        span = Span(len(thread.spans), True, content, True)
        nxt = _enter_region(thread.node.after_region(content), thread.spans + (span,))
        return [nxt] if nxt is not None else []
    return [_Thread(thread.node, _CLOSING, None, progress, thread.raw, thread.spans)]


class EngineCursor:
    """Incremental byte-wise replay of a transcript against an engine."""

    def __init__(self, engine: CompletionEngine, _threads: list[_Thread] | None = None, _pos: int = 0):
        self.engine = engine
        if _threads is None:
            first = _enter_region(engine.start(), ())
            self.threads: list[_Thread] = [first] if first is not None else []
        else:
            self.threads = _threads
        self.pos = _pos

    def clone(self) -> "EngineCursor":
        return EngineCursor(self.engine, list(self.threads), self.pos)

    @property
    def alive(self) -> bool:
        return bool(self.threads)

    def step(self, byte: int) -> bool:
        """Consume one byte; returns False (and keeps state) if that kills it."""
        nxt: list[_Thread] = []
        seen: set = set()
        for thread in self.threads:
            for succ in _step_thread(thread, byte):
                k = succ.key()
                if k not in seen:
                    seen.add(k)
                    nxt.append(succ)
        if not nxt:
            return False
        self.threads = nxt
        self.pos += 1
        return True

    def advance(self, data: bytes) -> int:
        """Consume as much of ``data`` as possible; returns bytes consumed."""
        for i, byte in enumerate(data):
            if not self.step(byte):
                return i
        return len(data)

    def accepts_token(self, token: bytes) -> bool:
        """Would consuming all of ``token`` keep some thread alive?"""
        probe = self.clone()
        return probe.advance(token) == len(token)

    @property
    def complete(self) -> bool:
        """Outside any open block (all delimiters well nested)."""
        return any(t.phase == _TEXT for t in self.threads)

    def _canonical(self) -> _Thread:
        # Prefer a completed-text thread, then the one with most progress.
        best = max(self.threads, key=lambda t: (t.phase == _TEXT, len(t.spans)))
        return best

    def current_region(self) -> Region:
        return self._canonical().node.region()

    def region_index(self) -> int:
        return len(self._canonical().spans)

    def spans(self, include_partial: bool = True) -> tuple[Span, ...]:
        thread = self._canonical()
        out = thread.spans
        if include_partial and (thread.raw or not out or thread.phase != _TEXT):
            partial = Span(len(out), thread.phase != _TEXT, thread.raw, False)
            out = out + (partial,)
        return out

    def block_contents(self) -> tuple[bytes, ...]:
        return tuple(s.content for s in self._canonical().spans if s.constrained)

    def token_mask(self, trie: TokenTrie) -> frozenset[int]:
        """Token ids whose full byte replay keeps the cursor alive."""
        out: set[int] = set()
        stack: list[tuple[object, list[_Thread]]] = [(trie.root, self.threads)]
        while stack:
            node, threads = stack.pop()
            if getattr(node, "token_id", None) is not None and threads is not self.threads:
                out.add(node.token_id)
            for byte, child in node.children.items():
                nxt: list[_Thread] = []
                seen: set = set()
                for thread in threads:
                    for succ in _step_thread(thread, byte):
                        k = succ.key()
                        if k not in seen:
                            seen.add(k)
                            nxt.append(succ)
                if nxt:
                    stack.append((child, nxt))
        return frozenset(out)


# ---------------------------------------------------------------------------
# Validation


class Verdict(enum.Enum):
    COMPLETE = "complete"
    VIOLATION = "violation"


@dataclass(frozen=True)
class ValidationReport:
    valid_prefix_length: int
    verdict: Verdict
    violating_region: int | None = None
    valid_next_mask: frozenset[int] | None = None


def validate(engine: CompletionEngine, text: bytes, vocab: Vocabulary | None = None) -> ValidationReport:
    """Replay ``text`` byte by byte through the engine's regions.

    Complete iff every constrained region's content belongs to its language
    and no block is left open.  Otherwise the report points at the largest
    prefix after which all regions so far are still viable, along with the
    token mask valid there (when a vocabulary is supplied).  Malformed text
    is a violation, never an error.
    """
    cursor = EngineCursor(engine)
    consumed = cursor.advance(text)
    if consumed == len(text) and cursor.complete:
        return ValidationReport(len(text), Verdict.COMPLETE)
    mask = cursor.token_mask(vocab.trie()) if vocab is not None else None
    return ValidationReport(
        consumed,
        Verdict.VIOLATION,
        violating_region=cursor.region_index(),
        valid_next_mask=mask,
    )


def split_token_ok(engine: CompletionEngine, prefix: bytes, token: bytes) -> bool:
    """May ``token`` follow ``prefix``, even if it straddles region boundaries?

    Accepts exactly when the byte-by-byte replay crosses every boundary
    legally: bytes before a match point extend the region, bytes after it
    must continue the terminator or the next region.
    """
    cursor = EngineCursor(engine)
    if cursor.advance(prefix) != len(prefix):
        raise ValueError("prefix rejected by engine")
    return cursor.accepts_token(token)


# ---------------------------------------------------------------------------
# Transcripts


@dataclass(frozen=True)
class Transcript:
    """A decoded session: full text plus per-region annotations."""

    full_text: bytes
    spans: tuple[Span, ...]
    violation_count: int
    aborted: bool
    # Diagnostics: valid-prefix length at each violation, and the text the
    # model produced past it (discarded by largest-valid-prefix recovery).
    recovery_log: tuple[int, ...] = ()
    discarded: tuple[bytes, ...] = ()

    @property
    def blocks(self) -> tuple[tuple[int, bytes, bool], ...]:
        return tuple((s.region, s.content, s.certified) for s in self.spans if s.constrained)

    def block_contents(self) -> tuple[bytes, ...]:
        return tuple(content for _, content, _ in self.blocks)

    def to_record(self) -> dict:
        return {
            "text": self.full_text.decode("utf-8", "surrogateescape"),
            "blocks": [
                {
                    "region": region,
                    "content": content.decode("utf-8", "surrogateescape"),
                    "certified": certified,
                }
                for region, content, certified in self.blocks
            ],
            "violations": self.violation_count,
            "aborted": self.aborted,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Transcript":
        text = record["text"].encode("utf-8", "surrogateescape")
        spans = tuple(
            Span(b["region"], True, b["content"].encode("utf-8", "surrogateescape"), b["certified"])
            for b in record["blocks"]
        )
        return cls(text, spans, record["violations"], record["aborted"])


def write_transcripts(path: str, transcripts: Iterable[Transcript], extras: Sequence[dict] | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, t in enumerate(transcripts):
            record = t.to_record()
            if extras is not None:
                record.update(extras[i])
            fh.write(json.dumps(record) + "\n")


def read_transcripts(path: str) -> list[tuple[Transcript, dict]]:
    out: list[tuple[Transcript, dict]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            out.append((Transcript.from_record(record), record))
    return out


def assemble_transcript(
    engine: CompletionEngine,
    text: bytes,
    violations: int = 0,
    aborted: bool = False,
    recovery_log: tuple[int, ...] = (),
    discarded: tuple[bytes, ...] = (),
) -> Transcript:
    cursor = EngineCursor(engine)
    consumed = cursor.advance(text)
    if consumed != len(text):
        raise ValueError("text is not valid under the engine")
    return Transcript(text, cursor.spans(), violations, aborted, recovery_log, discarded)


# ---------------------------------------------------------------------------
# Rejection-based constrained sampling


class DecodeError(RuntimeError):
    pass


def constrained_sample(
    lm: "LanguageModel",
    engine: CompletionEngine,
    vocab: Vocabulary,
    max_violations: int = 20,
    prompt: bytes = b"",
) -> Transcript:
    """Sample a transcript guaranteed to respect the engine.

    Repeatedly samples an unconstrained continuation, validates it, and on a
    violation truncates to the largest valid prefix, forces exactly one token
    drawn from the valid mask, and resumes.  Exceeding ``max_violations``
    returns the partial transcript flagged aborted (an uncooperative model).
    The engine sees only the generation; the prompt is model context.
    """
    if max_violations < 1:
        raise ValueError("max_violations must be >= 1")
    lm.begin(prompt)
    generated = b""
    violations = 0
    recovery_log: list[int] = []
    discarded: list[bytes] = []
    trie = vocab.trie()

    while True:
        continuation = vocab.decode(lm.sample_continuation(prompt + generated))
        candidate = generated + continuation
        cursor = EngineCursor(engine)
        consumed = cursor.advance(candidate)
        if consumed == len(candidate) and cursor.complete:
            return Transcript(
                candidate, cursor.spans(), violations, False,
                tuple(recovery_log), tuple(discarded),
            )

        violations += 1
        recovery_log.append(consumed)
        discarded.append(candidate[consumed:])
        if violations >= max_violations:
            valid = candidate[:consumed]
            cur = EngineCursor(engine)
            cur.advance(valid)
            return Transcript(
                valid, cur.spans(), violations, True,
                tuple(recovery_log), tuple(discarded),
            )
        valid = candidate[:consumed]
        cur = EngineCursor(engine)
        cur.advance(valid)
        mask = cur.token_mask(trie)
        if not mask:
            return Transcript(
                valid, cur.spans(), violations, True,
                tuple(recovery_log), tuple(discarded),
            )
        forced = lm.sample_one(prompt + valid, mask)
        if forced not in mask:
            raise DecodeError("language model returned a token outside the allowed set")
        generated = valid + vocab.bytes_of(forced)
