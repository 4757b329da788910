"""Byte-level regular sets, token vocabularies, and viability masks.

Constrained decoding keeps asking one question: given the bytes consumed so
far inside a constrained region, which vocabulary tokens keep that region
viable?  Tokenizers split text at arbitrary byte boundaries (including inside
multi-byte characters), so everything here works on bytes, never on
characters or tokens.

Regular languages are represented as a small expression AST and matched
incrementally with Brzozowski derivatives: ``derive(r, b)`` is the language of
suffixes of strings in ``r`` that start with byte ``b``.  Matching a string is
a fold of ``derive``; a prefix is dead exactly when the derivative denotes the
empty language.  Derivatives make per-block construction cheap, which matters
because guide-produced languages change at every block.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping


class VocabularyError(ValueError):
    """Malformed vocabulary contents or vocabulary file."""


# ---------------------------------------------------------------------------
# Vocabulary and token trie


class _TrieNode:
    __slots__ = ("children", "token_id")

    def __init__(self) -> None:
        self.children: dict[int, _TrieNode] = {}
        self.token_id: int | None = None


class TokenTrie:
    """Prefix tree over token byte strings; accepting nodes carry token ids."""

    def __init__(self) -> None:
        self.root = _TrieNode()

    def insert(self, token_id: int, data: bytes) -> None:
        node = self.root
        for b in data:
            node = node.children.setdefault(b, _TrieNode())
        if node.token_id is not None:
            raise VocabularyError(f"duplicate token bytes: {data!r}")
        node.token_id = token_id

    @classmethod
    def from_vocabulary(cls, vocab: "Vocabulary") -> "TokenTrie":
        trie = cls()
        for token_id, data in enumerate(vocab.tokens):
            trie.insert(token_id, data)
        return trie

    def flatten(self) -> list[tuple[int, bytes]]:
        """All (token id, bytes) pairs, sorted by id."""
        out: list[tuple[int, bytes]] = []
        stack: list[tuple[_TrieNode, bytes]] = [(self.root, b"")]
        while stack:
            node, prefix = stack.pop()
            if node.token_id is not None:
                out.append((node.token_id, prefix))
            for b, child in node.children.items():
                stack.append((child, prefix + bytes([b])))
        out.sort()
        return out


@dataclass(frozen=True)
class Vocabulary:
    """An indexed set of non-empty byte-string tokens with dense ids 0..n-1.

    Duplicate byte strings are rejected outright: silently collapsing them
    would corrupt id round-trips, and the scripted tokenizers used here never
    need them.
    """

    tokens: tuple[bytes, ...]
    _index: dict[bytes, int] = field(init=False, repr=False, compare=False)
    _trie: TokenTrie = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index: dict[bytes, int] = {}
        for i, tok in enumerate(self.tokens):
            if not isinstance(tok, bytes) or len(tok) == 0:
                raise VocabularyError(f"token {i} must be a non-empty byte string")
            if tok in index:
                raise VocabularyError(f"duplicate token bytes at ids {index[tok]} and {i}: {tok!r}")
            index[tok] = i
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_trie", None)

    @classmethod
    def from_tokens(cls, tokens: Iterable[bytes]) -> "Vocabulary":
        return cls(tuple(bytes(t) for t in tokens))

    @classmethod
    def single_bytes(cls, values: Iterable[int] = range(256)) -> "Vocabulary":
        return cls(tuple(bytes([v]) for v in values))

    @classmethod
    def printable_ascii(cls, extra: Iterable[bytes] = ()) -> "Vocabulary":
        """Tab, newline, and printable ASCII as single-byte tokens, plus extras."""
        base = [9, 10] + list(range(0x20, 0x7F))
        tokens = [bytes([v]) for v in base]
        for t in extra:
            t = bytes(t)
            if t not in tokens:
                tokens.append(t)
        return cls(tuple(tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[bytes]:
        return iter(self.tokens)

    def bytes_of(self, token_id: int) -> bytes:
        return self.tokens[token_id]

    def id_of(self, data: bytes) -> int:
        return self._index[data]

    def trie(self) -> TokenTrie:
        if self._trie is None:
            object.__setattr__(self, "_trie", TokenTrie.from_vocabulary(self))
        return self._trie

    def covers(self, data: bytes) -> bool:
        """True when every single byte of ``data`` is itself a token.

        Greedy segmentation can never get stuck on covered byte strings.
        """
        singles = {t[0] for t in self.tokens if len(t) == 1}
        return all(b in singles for b in data)

    def greedy_segment(self, data: bytes) -> list[int]:
        """Longest-match segmentation of ``data`` into token ids."""
        out: list[int] = []
        pos = 0
        root = self.trie().root
        while pos < len(data):
            node = root
            best: int | None = None
            best_len = 0
            for i in range(pos, len(data)):
                node = node.children.get(data[i])
                if node is None:
                    break
                if node.token_id is not None:
                    best = node.token_id
                    best_len = i - pos + 1
            if best is None:
                raise VocabularyError(f"no token matches input at byte {pos}: {data[pos:pos + 8]!r}")
            out.append(best)
            pos += best_len
        return out

    def decode(self, token_ids: Iterable[int]) -> bytes:
        return b"".join(self.tokens[t] for t in token_ids)

    # One token per line: decimal id, single space, hex-encoded bytes.  Hex
    # keeps whitespace-only tokens intact.
    def save(self, path: str) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for i, tok in enumerate(self.tokens):
                fh.write(f"{i} {tok.hex()}\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        entries: list[tuple[int, bytes]] = []
        with open(path, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise VocabularyError(f"line {lineno}: expected '<id> <hex>'")
                try:
                    token_id = int(parts[0])
                    data = bytes.fromhex(parts[1])
                except ValueError as exc:
                    raise VocabularyError(f"line {lineno}: {exc}") from exc
                entries.append((token_id, data))
        entries.sort()
        if [i for i, _ in entries] != list(range(len(entries))):
            raise VocabularyError("token ids must be dense 0..n-1")
        return cls(tuple(data for _, data in entries))


# ---------------------------------------------------------------------------
# Regular sets


class RegularSet:
    """Base class of the regular-expression AST over bytes.

    Nodes are hash-consed: the smart constructors intern structurally equal
    expressions to one instance, so node equality is identity, hashing is
    O(1), and per-node derivative memoization pays off.  Always build
    expressions through the constructors, never the classes directly.
    """

    __slots__ = ("null", "_dmap")

    null: bool  # does the language contain the empty string?

    def derive(self, byte: int) -> "RegularSet":
        cached = self._dmap.get(byte)
        if cached is None:
            cached = self._derive(byte)
            self._dmap[byte] = cached
        return cached

    def _derive(self, byte: int) -> "RegularSet":
        raise NotImplementedError

    def is_void(self) -> bool:
        """True iff the language is empty.

        Constructors collapse every empty-language expression to ``EMPTY``,
        so an identity test is exact.
        """
        return self is EMPTY

    def nullable(self) -> bool:
        return self.null


class Empty(RegularSet):
    __slots__ = ()

    def __init__(self) -> None:
        self.null = False
        self._dmap: dict[int, RegularSet] = {}

    def _derive(self, byte: int) -> RegularSet:
        return self

    def __repr__(self) -> str:
        return "EMPTY"


class Epsilon(RegularSet):
    __slots__ = ()

    def __init__(self) -> None:
        self.null = True
        self._dmap: dict[int, RegularSet] = {}

    def _derive(self, byte: int) -> RegularSet:
        return EMPTY

    def __repr__(self) -> str:
        return "EPSILON"


EMPTY = Empty()
EPSILON = Epsilon()


class Literal(RegularSet):
    """A single exact byte string (never empty; use EPSILON for that)."""

    __slots__ = ("text",)

    def __init__(self, text: bytes):
        self.text = text
        self.null = False
        self._dmap = {}

    def _derive(self, byte: int) -> RegularSet:
        if self.text[0] != byte:
            return EMPTY
        return literal(self.text[1:])

    def __repr__(self) -> str:
        return f"Literal({self.text!r})"


class ByteClass(RegularSet):
    """One byte drawn from a non-empty set."""

    __slots__ = ("allowed",)

    def __init__(self, allowed: frozenset[int]):
        self.allowed = allowed
        self.null = False
        self._dmap = {}

    def _derive(self, byte: int) -> RegularSet:
        return EPSILON if byte in self.allowed else EMPTY

    def __repr__(self) -> str:
        return f"ByteClass({len(self.allowed)} bytes)"


class Concat(RegularSet):
    __slots__ = ("parts",)

    def __init__(self, parts: tuple[RegularSet, ...]):
        self.parts = parts
        self.null = all(p.null for p in parts)
        self._dmap = {}

    def _derive(self, byte: int) -> RegularSet:
        head, tail = self.parts[0], self.parts[1:]
        branches = [concat(head.derive(byte), *tail)]
        if head.null:
            branches.append(concat(*tail).derive(byte))
        return alt(*branches)

    def __repr__(self) -> str:
        return f"Concat({', '.join(map(repr, self.parts))})"


class Alt(RegularSet):
    __slots__ = ("parts",)

    def __init__(self, parts: tuple[RegularSet, ...]):
        self.parts = parts
        self.null = any(p.null for p in parts)
        self._dmap = {}

    def _derive(self, byte: int) -> RegularSet:
        return alt(*(p.derive(byte) for p in self.parts))

    def __repr__(self) -> str:
        return f"Alt({', '.join(map(repr, self.parts))})"


class Star(RegularSet):
    __slots__ = ("inner",)

    def __init__(self, inner: RegularSet):
        self.inner = inner
        self.null = True
        self._dmap = {}

    def _derive(self, byte: int) -> RegularSet:
        return concat(self.inner.derive(byte), self)

    def __repr__(self) -> str:
        return f"Star({self.inner!r})"


class Strings(RegularSet):
    """Finite alternation of exact byte strings.

    First-class because "one of these k exact strings" is the dominant guide
    output; derivatives stay inside this node and cost one filter pass.
    """

    __slots__ = ("options",)

    def __init__(self, options: tuple[bytes, ...]):
        self.options = options
        self.null = b"" in options
        self._dmap = {}

    def _derive(self, byte: int) -> RegularSet:
        return strings(o[1:] for o in self.options if o and o[0] == byte)

    def __repr__(self) -> str:
        return f"Strings({len(self.options)} options)"


_INTERN: dict[tuple, RegularSet] = {}


def _interned(key: tuple, build) -> RegularSet:
    node = _INTERN.get(key)
    if node is None:
        if len(_INTERN) > 1_000_000:  # safety valve for very long processes
            _INTERN.clear()
        node = build()
        _INTERN[key] = node
    return node


def literal(data: bytes) -> RegularSet:
    if len(data) == 0:
        return EPSILON
    data = bytes(data)
    return _interned(("lit", data), lambda: Literal(data))


def byte_class(values: Iterable[int]) -> RegularSet:
    allowed = frozenset(values)
    if not allowed:
        return EMPTY
    return _interned(("cls", allowed), lambda: ByteClass(allowed))


def char_range(lo: str, hi: str) -> RegularSet:
    return byte_class(range(ord(lo), ord(hi) + 1))


def concat(*parts: RegularSet) -> RegularSet:
    flat: list[RegularSet] = []
    for p in parts:
        if p.is_void():
            return EMPTY
        if p is EPSILON:
            continue
        if isinstance(p, Concat):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return EPSILON
    if len(flat) == 1:
        return flat[0]
    key = ("cat", tuple(flat))
    return _interned(key, lambda: Concat(tuple(flat)))


def alt(*parts: RegularSet) -> RegularSet:
    flat: dict[RegularSet, None] = {}
    for p in parts:
        if p.is_void():
            continue
        if isinstance(p, Alt):
            for q in p.parts:
                flat.setdefault(q)
        else:
            flat.setdefault(p)
    if not flat:
        return EMPTY
    if len(flat) == 1:
        return next(iter(flat))
    ordered = tuple(flat)
    return _interned(("alt", ordered), lambda: Alt(ordered))


def star(inner: RegularSet) -> RegularSet:
    if inner.is_void() or inner is EPSILON:
        return EPSILON
    if isinstance(inner, Star):
        return inner
    return _interned(("star", inner), lambda: Star(inner))


def strings(options: Iterable[bytes]) -> RegularSet:
    uniq = tuple(sorted(set(bytes(o) for o in options)))
    if not uniq:
        return EMPTY
    return _interned(("strs", uniq), lambda: Strings(uniq))


def without_substring(delim: bytes) -> RegularSet:
    """All byte strings that do not contain ``delim`` as a substring.

    Supports one- and two-byte delimiters, which covers the block framing
    used throughout (defaults ``[[`` / ``]]``).
    """
    if len(delim) == 1:
        return star(byte_class(b for b in range(256) if b != delim[0]))
    if len(delim) != 2:
        raise ValueError("only 1- or 2-byte delimiters are supported")
    a, b = delim[0], delim[1]
    not_a = byte_class(v for v in range(256) if v != a)
    if a == b:
        # No two consecutive `a` bytes: runs of `a` have length one.
        unit = alt(not_a, concat(literal(bytes([a])), not_a))
        return concat(star(unit), alt(EPSILON, literal(bytes([a]))))
    not_ab = byte_class(v for v in range(256) if v not in (a, b))
    a_lit = literal(bytes([a]))
    a_run = concat(a_lit, star(a_lit))
    unit = alt(not_a, concat(a_run, not_ab))
    return concat(star(unit), star(a_lit))


# ---------------------------------------------------------------------------
# Matching

class PrefixStatus(enum.Enum):
    MATCH = "match"
    VIABLE_PREFIX = "viable_prefix"
    DEAD = "dead"


def matches(lang: RegularSet, data: bytes) -> bool:
    state = lang
    for b in data:
        state = state.derive(b)
        if state.is_void():
            return False
    return state.null


def prefix_status(lang: RegularSet, data: bytes) -> PrefixStatus:
    state = lang
    for b in data:
        state = state.derive(b)
        if state.is_void():
            return PrefixStatus.DEAD
    if state.null:
        return PrefixStatus.MATCH
    return PrefixStatus.VIABLE_PREFIX


@dataclass(frozen=True)
class RegionMask:
    """Per-region viability of each vocabulary token.

    ``viable`` holds tokens whose full byte replay never kills the region.
    ``matched`` reports whether the consumed bytes already complete the
    region (a match at offset 0).  ``match_offsets`` maps a token id to the
    byte offsets (1-based, counted inside the token) at which the region
    language is completed during replay; tokens that die after such an
    offset are the split-token candidates the decoder resolves against the
    closing delimiter.
    """

    viable: frozenset[int]
    matched: bool
    match_offsets: Mapping[int, tuple[int, ...]]

    def __contains__(self, token_id: int) -> bool:
        return token_id in self.viable

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.viable))

    def __len__(self) -> int:
        return len(self.viable)


def viable_tokens(lang: RegularSet, consumed: bytes, trie: TokenTrie) -> RegionMask:
    """Which tokens keep the region alive after ``consumed``?

    Precondition: ``consumed`` must itself be viable (Match or ViablePrefix).
    """
    state: RegularSet = lang
    for b in consumed:
        state = state.derive(b)
        if state.is_void():
            raise ValueError("consumed bytes already kill the region")

    viable: set[int] = set()
    offsets: dict[int, tuple[int, ...]] = {}
    # DFS over the trie; each frame carries the derivative (None once dead)
    # and the match offsets observed along the path.
    stack: list[tuple[_TrieNode, RegularSet | None, tuple[int, ...], int]] = [
        (trie.root, state, (), 0)
    ]
    while stack:
        node, st, offs, depth = stack.pop()
        if node.token_id is not None and depth > 0:
            if st is not None:
                viable.add(node.token_id)
            if offs:
                offsets[node.token_id] = offs
        if st is None and not offs:
            continue  # nothing below can be viable or split-resolvable
        for b, child in node.children.items():
            if st is None:
                stack.append((child, None, offs, depth + 1))
                continue
            nxt = st.derive(b)
            if nxt.is_void():
                stack.append((child, None, offs, depth + 1))
            elif nxt.null:
                stack.append((child, nxt, offs + (depth + 1,), depth + 1))
            else:
                stack.append((child, nxt, offs, depth + 1))
    return RegionMask(frozenset(viable), state.null, offsets)
