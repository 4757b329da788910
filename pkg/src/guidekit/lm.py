"""Language-model contract and scripted test doubles.

The decoder needs exactly two capabilities from a model: sample a free
continuation, and sample a single token with the allowed set passed as a
logit bias.  No network client ships here; a hosted backend can implement
the same contract without touching the decoding loop.

``ScriptedLM`` replays a fixed script of intended messages and reacts to
interruptions according to a behavior policy:

* cooperative -- silently continues with its plan, adopting forced tokens
  that match what it was about to say;
* apologetic(k) -- prefixes its next k interrupted messages with an apology
  (which, inside a guided block, is itself a violation);
* adversarial -- never adopts forced tokens and re-says discarded text.

The chat adapter supplies the interruption signal: with a plain completion
interface a model continues seamlessly from any prefix, while a chat API can
only start a fresh message after a forced token.
"""

from __future__ import annotations

import enum
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Collection, Sequence

from .lexical import Vocabulary


class EmptyAllowedSet(ValueError):
    """sample_one was called with no allowed tokens."""


class ScriptError(ValueError):
    """Malformed script contents or script file."""


class LanguageModel(ABC):
    """Minimal API: free continuation plus biased single-token sampling."""

    def begin(self, prompt: bytes) -> None:
        """Start a session; the prompt prefixes every later context."""
        self._prompt = bytes(prompt)

    @abstractmethod
    def sample_continuation(self, context: bytes) -> list[int]:
        """One full response, as token ids, given prompt+generated context."""

    @abstractmethod
    def sample_one(self, context: bytes, allowed: Collection[int]) -> int:
        """One token drawn from ``allowed`` (never outside it)."""


class PolicyKind(enum.Enum):
    COOPERATIVE = "cooperative"
    APOLOGETIC = "apologetic"
    ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    apology_limit: float = 0  # math.inf for "apologizes forever"

    @classmethod
    def cooperative(cls) -> "Policy":
        return cls(PolicyKind.COOPERATIVE)

    @classmethod
    def apologetic(cls, limit: float = math.inf) -> "Policy":
        return cls(PolicyKind.APOLOGETIC, limit)

    @classmethod
    def adversarial(cls) -> "Policy":
        return cls(PolicyKind.ADVERSARIAL)


APOLOGY = b"Sorry, resuming the previous message: "


class ScriptedLM(LanguageModel):
    """Deterministic model replaying scripted messages.

    The script is a list of intended messages; one message is emitted per
    continuation request.  The model tracks which bytes of its plan have
    been said (or force-fed to it) and what the decoder kept, so recovery
    behavior is reproducible byte for byte given (script, policy, seed).
    """

    def __init__(
        self,
        messages: Sequence[bytes],
        vocab: Vocabulary,
        policy: Policy = Policy.cooperative(),
        seed: int = 0,
    ):
        self.messages = tuple(bytes(m) for m in messages)
        self.vocab = vocab
        self.policy = policy
        self.seed = seed
        self._plan = b"".join(self.messages)
        bounds: list[int] = []
        total = 0
        for m in self.messages:
            total += len(m)
            bounds.append(total)
        self._bounds = bounds
        for data in (self._plan, APOLOGY):
            if not vocab.covers(data):
                raise ScriptError("vocabulary lacks single-byte tokens for some script bytes")
        self.begin(b"")

    def begin(self, prompt: bytes) -> None:
        super().begin(prompt)
        self._said = b""                    # what the model believes was generated
        self._sources: list[int | None] = []  # per said-byte index into the plan
        self._p = 0                         # plan bytes consumed
        self._apologies = 0

    # -- plan bookkeeping --------------------------------------------------

    def _generated(self, context: bytes) -> bytes:
        if not context.startswith(self._prompt):
            raise ScriptError("context does not extend the session prompt")
        return context[len(self._prompt):]

    def _sync(self, generated: bytes) -> None:
        """Reconcile the decoder's view with the model's bookkeeping.

        The decoder only ever truncates the tail and appends forced bytes.
        Forced bytes that match the plan count as the model having said them;
        mismatching ones are adopted silently (cooperative, apologetic) or
        ignored entirely (adversarial, which also re-says discarded text).
        """
        common = 0
        limit = min(len(self._said), len(generated))
        while common < limit and self._said[common] == generated[common]:
            common += 1
        dropped_sources = [s for s in self._sources[common:] if s is not None]
        self._said = self._said[:common]
        self._sources = self._sources[:common]
        if dropped_sources and self.policy.kind is PolicyKind.ADVERSARIAL:
            self._p = min(dropped_sources)  # insist on re-saying its plan
        appended = generated[common:]
        for b in appended:
            if (
                self.policy.kind is not PolicyKind.ADVERSARIAL
                and self._p < len(self._plan)
                and self._plan[self._p] == b
            ):
                self._sources.append(self._p)
                self._p += 1
            else:
                self._sources.append(None)
            self._said += bytes([b])

    def _emit(self, data: bytes, from_plan_at: int | None) -> None:
        pos = from_plan_at
        for i, _ in enumerate(data):
            self._sources.append(None if pos is None else pos + i)
        self._said += data

    def _next_chunk(self) -> bytes:
        """Plan bytes from the pointer to the end of its current message."""
        if self._p >= len(self._plan):
            return b""
        for bound in self._bounds:
            if self._p < bound:
                return self._plan[self._p:bound]
        return b""

    # -- LanguageModel interface --------------------------------------------

    def continue_message(self, context: bytes, interrupted: bool) -> list[int]:
        self._sync(self._generated(context))
        out = b""
        if (
            interrupted
            and self.policy.kind is PolicyKind.APOLOGETIC
            and self._apologies < self.policy.apology_limit
        ):
            self._apologies += 1
            out += APOLOGY
            self._emit(APOLOGY, None)
        chunk = self._next_chunk()
        if chunk:
            self._emit(chunk, self._p)
            self._p += len(chunk)
            out += chunk
        return self.vocab.greedy_segment(out) if out else []

    def sample_continuation(self, context: bytes) -> list[int]:
        return self.continue_message(context, interrupted=False)

    def sample_one(self, context: bytes, allowed: Collection[int]) -> int:
        if not allowed:
            raise EmptyAllowedSet("no tokens are allowed here")
        self._sync(self._generated(context))
        intent = self._plan[self._p:]

        def score(token_id: int) -> tuple[int, bytes]:
            data = self.vocab.bytes_of(token_id)
            overlap = 0
            for a, b in zip(data, intent):
                if a != b:
                    break
                overlap += 1
            return (-overlap, data)  # max overlap, ties by token bytes

        return min(allowed, key=score)


class ChatAdapter(LanguageModel):
    """Chat-style wrapper: every continuation is a fresh message.

    After the decoder truncates or force-appends a token, the inner model's
    previous message no longer matches what it said, and the next request is
    flagged as an interruption -- which is what lets apologetic behavior
    fire.  With a cooperative inner model the adapter's output is byte
    identical to calling the model directly.
    """

    def __init__(self, inner: ScriptedLM):
        self.inner = inner
        self._expected: bytes | None = None

    def begin(self, prompt: bytes) -> None:
        super().begin(prompt)
        self.inner.begin(prompt)
        self._expected = prompt

    def sample_continuation(self, context: bytes) -> list[int]:
        interrupted = self._expected is not None and context != self._expected
        tokens = self.inner.continue_message(context, interrupted)
        self._expected = context + self.inner.vocab.decode(tokens)
        return tokens

    def sample_one(self, context: bytes, allowed: Collection[int]) -> int:
        return self.inner.sample_one(context, allowed)


def chat_adapter(inner: ScriptedLM) -> ChatAdapter:
    return ChatAdapter(inner)


# ---------------------------------------------------------------------------
# Script files: a policy header line, then one hex-encoded message per line.


def save_script(path: str, messages: Sequence[bytes], policy: Policy = Policy.cooperative()) -> None:
    with open(path, "w", encoding="ascii") as fh:
        if policy.kind is PolicyKind.APOLOGETIC:
            limit = "inf" if math.isinf(policy.apology_limit) else str(int(policy.apology_limit))
            fh.write(f"policy:apologetic:{limit}\n")
        else:
            fh.write(f"policy:{policy.kind.value}\n")
        for message in messages:
            fh.write(bytes(message).hex() + "\n")


def load_script(path: str) -> tuple[list[bytes], Policy]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines or not lines[0].startswith("policy:"):
        raise ScriptError("script file must start with a policy header")
    head = lines[0].split(":")
    if head[1] == "cooperative":
        policy = Policy.cooperative()
    elif head[1] == "adversarial":
        policy = Policy.adversarial()
    elif head[1] == "apologetic":
        limit = math.inf if len(head) < 3 or head[2] == "inf" else float(int(head[2]))
        policy = Policy.apologetic(limit)
    else:
        raise ScriptError(f"unknown policy {head[1]!r}")
    try:
        messages = [bytes.fromhex(line) for line in lines[1:]]
    except ValueError as exc:
        raise ScriptError(f"bad hex in script file: {exc}") from exc
    return messages, policy
