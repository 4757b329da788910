"""Evaluation pipeline: decode datasets, score, and filter training records.

The pipeline decodes each problem (through the guide when requested, plain
sampling otherwise), extracts the stated answer by the fixed convention of a
final ``Answer: X`` line, certifies guided transcripts by replay, and
aggregates accuracy with seeded bootstrap confidence intervals.

Self-improvement filtering implements three admission criteria over a pool
of solved problems: keep correct answers from unguided runs, keep correct
answers from guided runs, or keep only records whose answer was formally
certified -- the strict filter that screens out accidentally-correct
reasoning before fine-tuning.
"""

from __future__ import annotations

import enum
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .csd import Transcript, constrained_sample
from .guides import lift
from .lexical import Vocabulary
from .lm import LanguageModel, Policy, ScriptedLM
from .logic import Answer
from .logicguide import CertificationVerdict, certify, logic_guide
from .problems import (
    Ontology,
    Problem,
    derivation_chain,
    generate_ontology_problem,
    render_deontic_sentence,
    render_fact_sentence,
    _ontology_tables,
)


DEFAULT_VOCAB_EXTRAS = (
    b"[[", b"]]", b"[[infer:", b"[[axiom:", b"[[goal:", b"[[object:",
    b"[[prop:", b"[[relation:", b" -> ", b"Answer:", b"nothing",
)


def default_vocabulary() -> Vocabulary:
    return Vocabulary.printable_ascii(extra=DEFAULT_VOCAB_EXTRAS)


# ---------------------------------------------------------------------------
# Prompts and reference solutions

_ANSWER_RE = re.compile(r"^Answer:\s*(True|False|Unknown)\b", re.MULTILINE | re.IGNORECASE)


def extract_answer(text: str) -> Answer | None:
    """Last ``Answer: X`` line, or None when the convention is not met."""
    found = _ANSWER_RE.findall(text)
    if not found:
        return None
    return Answer(found[-1].capitalize())


def _fact_sentence(problem: Problem, lit) -> str:
    if problem.ontology is Ontology.DEONTIC:
        sorts = {s.name: s.sort or "" for s in problem.theory_state().objects.values()}
        if lit.name in ("permissible", "obligatory"):
            from .problems import _deontic_goal_phrase

            phrase = _deontic_goal_phrase(lit, sorts)
            return f"It is {phrase[0].lower()}{phrase[1:]}."
        return render_deontic_sentence(lit, sorts)
    surfaces, _, _, _ = _ontology_tables(problem.ontology)
    return render_fact_sentence(lit, surfaces)


def render_guided_solution(problem: Problem) -> str:
    """The reference guided solution: formalize, set the goal, infer, answer."""
    state = problem.theory_state()
    lines: list[str] = []
    decls = " ".join(
        f"[[object:{name}]]" for name in state.objects
    )
    if decls:
        lines.append(f"Entities: {decls}")
    numbered = []
    for i, (sentence, axiom) in enumerate(zip(problem.context, problem.axiom_lines()), start=1):
        numbered.append(f"{i}- {sentence} [[axiom:{axiom}]].")
    lines.append(" ".join(numbered))
    goal = state.goal
    lines.append(f"Formalized goal: [[goal:{goal}]]")
    chain = derivation_chain(state)
    steps: list[str] = []
    if chain:
        for lit in chain:
            steps.append(f"[[infer:{lit}]] {_fact_sentence(problem, lit)}")
        final = chain[-1]
        if final == goal:
            steps.append("This was the goal.")
            stated = Answer.TRUE
        else:
            steps.append("This contradicts the goal.")
            stated = Answer.FALSE
    else:
        steps.append("[[infer:nothing]] Nothing further can be concluded.")
        stated = Answer.UNKNOWN
    lines.append("Reasoning: " + " ".join(steps))
    lines.append(f"Answer: {stated.value}")
    return "\n".join(lines)


def render_unguided_solution(problem: Problem) -> str:
    state = problem.theory_state()
    chain = derivation_chain(state)
    steps: list[str] = []
    if chain:
        steps = [_fact_sentence(problem, lit) for lit in chain]
        steps.append("This was the goal." if chain[-1] == state.goal else "This contradicts the goal.")
        stated = Answer.TRUE if chain[-1] == state.goal else Answer.FALSE
    else:
        steps = ["Nothing further can be concluded."]
        stated = Answer.UNKNOWN
    return "Reasoning: " + " ".join(steps) + f"\nAnswer: {stated.value}"


def render_problem_header(problem: Problem) -> str:
    context = " ".join(problem.context)
    return f"Context: {context}\nQuestion: {problem.question}\n"


def default_exemplars(guided: bool) -> list[tuple[Problem, str]]:
    """Two solved fictional problems (one True, one False) for few-shot use."""
    out: list[tuple[Problem, str]] = []
    seed = 90_001
    want = [True, False]
    while want:
        problem = generate_ontology_problem(seed, 2, Ontology.FICTIONAL)
        if problem.answer == want[0]:
            solution = render_guided_solution(problem) if guided else render_unguided_solution(problem)
            out.append((problem, solution))
            want.pop(0)
        seed += 1
    return out


def build_prompt(problem: Problem, guided: bool, exemplars: Sequence[tuple[Problem, str]] | None = None) -> str:
    if exemplars is None:
        exemplars = default_exemplars(guided)
    parts: list[str] = []
    for ex_problem, ex_solution in exemplars:
        parts.append(render_problem_header(ex_problem) + ex_solution + "\n\n")
    parts.append(render_problem_header(problem))
    return "".join(parts)


def perfect_lm_factory(vocab: Vocabulary) -> Callable[[Problem, str], ScriptedLM]:
    """A model that emits the reference guided solution in one message."""

    def factory(problem: Problem, prompt: str) -> ScriptedLM:
        return ScriptedLM([render_guided_solution(problem).encode()], vocab, Policy.cooperative())

    return factory


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class EvalOutcome:
    index: int
    hops: int
    ontology: Ontology
    prompt: str
    completion: str
    stated: Answer | None
    oracle: Answer
    guided: bool
    verdict: CertificationVerdict | None
    violations: int
    aborted: bool
    transcript: Transcript | None = None

    @property
    def correct(self) -> bool:
        return self.stated is not None and self.stated == self.oracle

    @property
    def certified(self) -> bool:
        return self.verdict is not None and self.verdict.certified


@dataclass(frozen=True)
class BucketStats:
    total: int
    correct: int
    certified_correct: int
    certified_wrong: int
    abstained: int
    aborted: int
    accuracy: float
    ci_low: float
    ci_high: float

    def to_record(self) -> dict:
        return self.__dict__.copy()


@dataclass(frozen=True)
class EvalReport:
    overall: BucketStats
    by_split: dict[str, BucketStats]
    by_hops: dict[int, BucketStats]

    def to_record(self) -> dict:
        return {
            "overall": self.overall.to_record(),
            "by_split": {k: v.to_record() for k, v in sorted(self.by_split.items())},
            "by_hops": {str(k): v.to_record() for k, v in sorted(self.by_hops.items())},
        }

    def render_table(self) -> str:
        rows = [("overall", self.overall)]
        rows += [(f"split={k}", v) for k, v in sorted(self.by_split.items())]
        rows += [(f"hops={k}", v) for k, v in sorted(self.by_hops.items())]
        lines = [f"{'bucket':<16} {'n':>5} {'acc':>6} {'ci95':>15} {'cert+':>6} {'cert-':>6} {'abst':>5} {'abort':>6}"]
        for name, s in rows:
            ci = f"[{s.ci_low:.3f},{s.ci_high:.3f}]"
            lines.append(
                f"{name:<16} {s.total:>5} {s.accuracy:>6.3f} {ci:>15} "
                f"{s.certified_correct:>6} {s.certified_wrong:>6} {s.abstained:>5} {s.aborted:>6}"
            )
        return "\n".join(lines)


def bootstrap_ci(flags: Sequence[bool], resamples: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Seeded percentile bootstrap for a proportion (95% interval)."""
    if not flags:
        return (0.0, 0.0)
    data = np.asarray(flags, dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(data), size=(resamples, len(data)))
    means = data[idx].mean(axis=1)
    return (float(np.percentile(means, 2.5)), float(np.percentile(means, 97.5)))


def _bucket(outcomes: Sequence[EvalOutcome], seed: int) -> BucketStats:
    flags = [o.correct for o in outcomes]
    return BucketStats(
        total=len(outcomes),
        correct=sum(flags),
        certified_correct=sum(1 for o in outcomes if o.certified and o.verdict.answer == o.oracle),
        certified_wrong=sum(1 for o in outcomes if o.certified and o.verdict.answer != o.oracle),
        abstained=sum(1 for o in outcomes if o.stated in (None, Answer.UNKNOWN)),
        aborted=sum(1 for o in outcomes if o.aborted),
        accuracy=(sum(flags) / len(outcomes)) if outcomes else 0.0,
        ci_low=bootstrap_ci(flags, seed=seed)[0],
        ci_high=bootstrap_ci(flags, seed=seed)[1],
    )


def _decode_unguided(lm: LanguageModel, vocab: Vocabulary, prompt: bytes, max_rounds: int = 64) -> str:
    lm.begin(prompt)
    generated = b""
    for _ in range(max_rounds):
        tokens = lm.sample_continuation(prompt + generated)
        if not tokens:
            break
        generated += vocab.decode(tokens)
    return generated.decode("utf-8", "surrogateescape")


def evaluate(
    problems: Sequence[Problem],
    lm_factory: Callable[[Problem, str], LanguageModel],
    guided: bool,
    vocab: Vocabulary | None = None,
    max_violations: int = 20,
    seed: int = 0,
    workers: int = 1,
    exemplars: Sequence[tuple[Problem, str]] | None = None,
) -> tuple[EvalReport, list[EvalOutcome]]:
    """Decode every problem, certify when guided, and aggregate."""
    if not problems:
        raise ValueError("dataset is empty")
    vocab = vocab or default_vocabulary()
    shots = exemplars if exemplars is not None else default_exemplars(guided)

    def solve(index: int) -> EvalOutcome:
        problem = problems[index]
        prompt = build_prompt(problem, guided, shots)
        lm = lm_factory(problem, prompt)
        oracle = Answer.TRUE if problem.answer else Answer.FALSE
        if guided:
            engine = lift(logic_guide())
            transcript = constrained_sample(lm, engine, vocab, max_violations, prompt.encode())
            completion = transcript.full_text.decode("utf-8", "surrogateescape")
            stated = extract_answer(completion)
            verdict = certify(transcript, stated or Answer.UNKNOWN)
            return EvalOutcome(
                index, problem.hops, problem.ontology, prompt, completion,
                stated, oracle, True, verdict, transcript.violation_count,
                transcript.aborted, transcript,
            )
        completion = _decode_unguided(lm, vocab, prompt.encode())
        stated = extract_answer(completion)
        return EvalOutcome(
            index, problem.hops, problem.ontology, prompt, completion,
            stated, oracle, False, None, 0, False, None,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(solve, range(len(problems))))
    else:
        outcomes = [solve(i) for i in range(len(problems))]
    outcomes.sort(key=lambda o: o.index)

    by_split: dict[str, list[EvalOutcome]] = {}
    by_hops: dict[int, list[EvalOutcome]] = {}
    for outcome in outcomes:
        by_split.setdefault(outcome.ontology.value, []).append(outcome)
        by_hops.setdefault(outcome.hops, []).append(outcome)
    report = EvalReport(
        overall=_bucket(outcomes, seed),
        by_split={k: _bucket(v, seed) for k, v in by_split.items()},
        by_hops={k: _bucket(v, seed) for k, v in by_hops.items()},
    )
    return report, outcomes


# ---------------------------------------------------------------------------
# Self-improvement filtering


class StarMode(enum.Enum):
    UNGUIDED = "unguided"
    GUIDED = "guided"
    STRICT_GUIDED = "strict"


@dataclass(frozen=True)
class TrainingRecord:
    prompt: str
    completion: str
    mode: StarMode

    def to_record(self) -> dict:
        return {"prompt": self.prompt, "completion": self.completion, "mode": self.mode.value}


def star_filter(outcomes: Iterable[EvalOutcome], mode: StarMode) -> list[TrainingRecord]:
    """Admission rules per mode, over a pool of solved problems.

    Unguided keeps correct stated answers from unguided runs; Guided keeps
    correct stated answers from guided runs; StrictGuided additionally
    requires the certified verdict -- records where the model guessed after
    exhausting inferences never pass it.
    """
    out: list[TrainingRecord] = []
    for o in outcomes:
        if not o.correct:
            continue
        if mode is StarMode.UNGUIDED and not o.guided:
            out.append(TrainingRecord(o.prompt, o.completion, mode))
        elif mode is StarMode.GUIDED and o.guided:
            out.append(TrainingRecord(o.prompt, o.completion, mode))
        elif mode is StarMode.STRICT_GUIDED and o.guided and o.certified and o.verdict.answer == o.oracle:
            out.append(TrainingRecord(o.prompt, o.completion, mode))
    return out
