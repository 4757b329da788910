"""Certified, tool-guided text generation.

A guide maps the contents of previously completed blocks to a regular set of
allowed next blocks; lifting it into a completion engine and decoding under
byte-level constraints guarantees every block is drawn from that set no
matter how the model's tokenizer splits the text.  The flagship guide is
backed by a forward-chaining logic kernel, so its inference blocks are sound
with respect to the model's own formalization -- which in turn lets answers
be certified, abstentions detected, and self-training data filtered down to
formally derived solutions.
"""

from .lexical import (
    EMPTY,
    EPSILON,
    PrefixStatus,
    RegionMask,
    RegularSet,
    TokenTrie,
    Vocabulary,
    VocabularyError,
    alt,
    byte_class,
    char_range,
    concat,
    literal,
    matches,
    prefix_status,
    star,
    strings,
    viable_tokens,
    without_substring,
)
from .csd import (
    CompletionEngine,
    EngineCursor,
    EngineNode,
    Region,
    Span,
    Transcript,
    ValidationReport,
    Verdict,
    constrained_sample,
    split_token_ok,
    validate,
)
from .guides import (
    ConstantGuide,
    Guide,
    GuidedEngine,
    MemoryGuide,
    QuoteGuide,
    constant_guide,
    lift,
    memory_guide,
    quote_guide,
)
from .logic import (
    Answer,
    GoalStatus,
    Literal,
    NotDerivable,
    Rule,
    TheoryState,
    TheorySyntaxError,
    assert_fact,
    check_goal,
    closure,
    deontic_base,
    parse_sexpr,
    parse_theory,
    step_inferences,
)
from .logicguide import (
    ActionBlock,
    CertificationVerdict,
    CertifyReason,
    LogicGuide,
    ReplayMismatch,
    certify,
    logic_guide,
    replay,
)
from .lm import (
    ChatAdapter,
    EmptyAllowedSet,
    LanguageModel,
    Policy,
    ScriptedLM,
    chat_adapter,
)
from .problems import (
    Ontology,
    Problem,
    generate_deontic_problem,
    generate_ontology_problem,
    generate_split,
    load_dataset,
    oracle_answer,
    save_dataset,
)
from .harness import (
    EvalOutcome,
    EvalReport,
    StarMode,
    TrainingRecord,
    evaluate,
    star_filter,
)

__version__ = "0.1.0"
