"""Byte-level regular sets and token viability.

The decoding substrate answers one question fast: given a constrained
region, the bytes consumed so far, and a token vocabulary, which tokens keep
the region alive?  This walk-through builds a few languages, matches them
incrementally, and inspects the per-token masks.
"""

from guidekit import lexical as rx
from guidekit.lexical import PrefixStatus, Vocabulary, prefix_status, viable_tokens

# A finite alternation: the dominant guide output is "one of these strings".
lang = rx.strings([b"(impus wren)", b"(orange wren)", b"nothing"])

for probe in (b"(imp", b"(impus wren)", b"(rompus", b"nothing"):
    print(f"{probe!r:<20} -> {prefix_status(lang, probe).value}")

# Derivatives make incremental matching cheap: consuming a byte rewrites the
# expression into the language of allowed suffixes.
state = lang
for byte in b"(or":
    state = state.derive(byte)
print("\nafter consuming b'(or':", state)

# Token masks: which vocabulary tokens may come next?
vocab = Vocabulary.printable_ascii(extra=[b"(impus", b"(orange", b"wren)", b"]]"])
mask = viable_tokens(lang, b"", vocab.trie())
print("\nviable first tokens:", sorted(vocab.bytes_of(t) for t in mask.viable)[:8], "...")

mask = viable_tokens(lang, b"(orange ", vocab.trie())
print("viable after b'(orange ':", sorted(vocab.bytes_of(t) for t in mask.viable))

# A completed region reports a match at offset zero instead of more tokens.
mask = viable_tokens(lang, b"nothing", vocab.trie())
print("after b'nothing': viable =", set(mask.viable), "| matched =", mask.matched)

# Star, classes, and substring exclusion compose as usual.
digits = rx.star(rx.char_range("0", "9"))
print("\ndigit star accepts empty:", rx.matches(digits, b""))
no_close = rx.without_substring(b"]]")
print("b'a]b' avoids ]]:", rx.matches(no_close, b"a]b"), "| b'a]]b':", rx.matches(no_close, b"a]]b"))
