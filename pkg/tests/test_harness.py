"""Evaluation pipeline, answer extraction, filtering, and the CLI."""

from __future__ import annotations

import json
import random

from guidekit.cli import main as cli_main
from guidekit.harness import (
    StarMode,
    bootstrap_ci,
    build_prompt,
    default_vocabulary,
    evaluate,
    extract_answer,
    perfect_lm_factory,
    render_guided_solution,
    render_unguided_solution,
    star_filter,
)
from guidekit.lm import Policy, ScriptedLM, chat_adapter
from guidekit.logic import Answer
from guidekit.problems import Ontology, generate_ontology_problem, generate_split


def small_dataset(n=8):
    return generate_split(n, Ontology.FICTIONAL, seed=21)


# ---------------------------------------------------------------------------
# answer extraction


def test_extract_answer_takes_last_answer_line():
    text = "Answer: False\nmore reasoning\nAnswer: True"
    assert extract_answer(text) is Answer.TRUE


def test_extract_answer_unparseable_is_none():
    assert extract_answer("no verdict here") is None
    assert extract_answer("Answer: maybe?") is None


def test_extract_answer_unknown():
    assert extract_answer("Reasoning...\nAnswer: Unknown") is Answer.UNKNOWN


# ---------------------------------------------------------------------------
# evaluate


def test_perfect_formalizer_is_perfectly_certified():
    problems = small_dataset()
    vocab = default_vocabulary()
    report, outcomes = evaluate(problems, perfect_lm_factory(vocab), guided=True, vocab=vocab)
    assert report.overall.accuracy == 1.0
    assert report.overall.certified_correct == len(problems)
    assert report.overall.certified_wrong == 0
    assert report.overall.aborted == 0
    assert all(o.violations == 0 for o in outcomes)


def test_random_answer_unguided_sits_at_chance():
    problems = generate_split(60, Ontology.FICTIONAL, seed=5)
    vocab = default_vocabulary()
    rng = random.Random(13)

    def factory(problem, prompt):
        answer = rng.choice(["True", "False"])
        return ScriptedLM([f"Reasoning: a guess.\nAnswer: {answer}".encode()], vocab)

    report, _ = evaluate(problems, factory, guided=False, vocab=vocab)
    assert report.overall.ci_low <= 0.5 <= report.overall.ci_high
    assert 0.3 <= report.overall.accuracy <= 0.7


def test_abstaining_model_counts_as_abstained():
    problems = small_dataset(4)
    vocab = default_vocabulary()

    def factory(problem, prompt):
        return ScriptedLM([b"Reasoning: unsure.\nAnswer: Unknown"], vocab)

    report, outcomes = evaluate(problems, factory, guided=False, vocab=vocab)
    assert report.overall.abstained == 4
    assert report.overall.accuracy == 0.0


def test_uncooperative_model_aborts_every_problem():
    problems = small_dataset(3)
    vocab = default_vocabulary()

    def factory(problem, prompt):
        inner = ScriptedLM([b"Formalized: [[axiom:"], vocab, Policy.apologetic())
        return chat_adapter(inner)

    report, outcomes = evaluate(problems, factory, guided=True, vocab=vocab, max_violations=6)
    assert report.overall.aborted == len(problems)
    assert all(o.verdict is not None and not o.verdict.certified for o in outcomes)


def test_parallel_evaluation_matches_serial():
    problems = small_dataset(6)
    vocab = default_vocabulary()
    serial, _ = evaluate(problems, perfect_lm_factory(vocab), guided=True, vocab=vocab, workers=1)
    parallel, _ = evaluate(problems, perfect_lm_factory(vocab), guided=True, vocab=vocab, workers=4)
    assert serial.to_record() == parallel.to_record()


def test_bootstrap_ci_is_seeded_and_sane():
    flags = [True] * 70 + [False] * 30
    lo1, hi1 = bootstrap_ci(flags, seed=11)
    lo2, hi2 = bootstrap_ci(flags, seed=11)
    assert (lo1, hi1) == (lo2, hi2)
    assert lo1 < 0.7 < hi1


# ---------------------------------------------------------------------------
# star filtering


def _guess_after_nothing_factory(vocab):
    def factory(problem, prompt):
        answer = "True" if problem.answer else "False"
        script = (
            f"Formalized context: 1- {problem.context[0]} "
            f"[[axiom:{problem.axiom_lines()[0]}]].\n"
            f"Reasoning: [[infer:nothing]] Hard to say.\nAnswer: {answer}"
        )
        return ScriptedLM([script.encode()], vocab)

    return factory


def test_star_filter_modes():
    problems = small_dataset(6)
    vocab = default_vocabulary()
    _, certified = evaluate(problems, perfect_lm_factory(vocab), guided=True, vocab=vocab)
    _, guessers = evaluate(problems, _guess_after_nothing_factory(vocab), guided=True, vocab=vocab)
    pool = certified + guessers

    strict = star_filter(pool, StarMode.STRICT_GUIDED)
    guided = star_filter(pool, StarMode.GUIDED)
    unguided = star_filter(pool, StarMode.UNGUIDED)

    assert len(strict) == len(certified)
    assert len(guided) == len(pool)  # guessers stated the right answer
    assert len(unguided) == 0
    prompts = {r.prompt for r in strict}
    assert prompts <= {r.prompt for r in guided}  # strict is a subset


def test_star_filter_drops_wrong_answers():
    problems = small_dataset(4)
    vocab = default_vocabulary()

    def wrong(problem, prompt):
        answer = "False" if problem.answer else "True"
        return ScriptedLM([f"Reasoning: hmm.\nAnswer: {answer}".encode()], vocab)

    _, outcomes = evaluate(problems, wrong, guided=False, vocab=vocab)
    assert star_filter(outcomes, StarMode.UNGUIDED) == []


def test_guided_solution_renders_blocks():
    problem = generate_ontology_problem(2, 2, Ontology.FICTIONAL)
    sol = render_guided_solution(problem)
    assert "[[axiom:" in sol and "[[infer:" in sol and "[[goal:" in sol
    assert sol.rstrip().endswith(("Answer: True", "Answer: False"))
    unguided = render_unguided_solution(problem)
    assert "[[" not in unguided


def test_prompt_contains_exemplars_and_problem():
    problem = generate_ontology_problem(4, 2, Ontology.FICTIONAL)
    prompt = build_prompt(problem, guided=True)
    assert prompt.count("Context:") == 3  # two exemplars + the problem
    assert prompt.endswith(problem.question + "\n")


# ---------------------------------------------------------------------------
# CLI pipeline


def test_cli_pipeline_round_trip(tmp_path, capsys):
    data = tmp_path / "data.jsonl"
    transcripts = tmp_path / "transcripts.jsonl"
    verdicts = tmp_path / "verdicts.jsonl"
    report = tmp_path / "report.json"
    records = tmp_path / "records.jsonl"

    assert cli_main(["generate", "--split", "fictional", "--count", "6", "--seed", "3", "--out", str(data)]) == 0
    assert cli_main(["solve", str(data)]) == 0
    assert cli_main(["decode", str(data), "--perfect", "--guided", "--out", str(transcripts)]) == 0
    assert cli_main(["certify", str(transcripts), str(data), "--out", str(verdicts)]) == 0
    assert cli_main(["eval", str(transcripts), str(data), "--out", str(report)]) == 0
    assert cli_main(["star-filter", str(transcripts), str(data), "--mode", "strict", "--out", str(records)]) == 0

    verdict_lines = [json.loads(l) for l in verdicts.read_text().splitlines()]
    assert all(v["certified"] for v in verdict_lines)
    loaded = json.loads(report.read_text())
    assert loaded["overall"]["accuracy"] == 1.0
    kept = [json.loads(l) for l in records.read_text().splitlines()]
    assert len(kept) == 6
    capsys.readouterr()


def test_cli_decode_with_script_file(tmp_path):
    from guidekit.lm import save_script

    data = tmp_path / "data.jsonl"
    transcripts = tmp_path / "transcripts.jsonl"
    script = tmp_path / "script.txt"
    cli_main(["generate", "--split", "fictional", "--count", "2", "--seed", "1", "--out", str(data)])
    save_script(str(script), [b"Reasoning: [[infer:nothing]] unclear.\nAnswer: Unknown"])
    assert cli_main([
        "decode", str(data), "--script", str(script), "--guided", "--out", str(transcripts)
    ]) == 0
    lines = [json.loads(l) for l in transcripts.read_text().splitlines()]
    assert len(lines) == 2
    assert all(not l["aborted"] for l in lines)
