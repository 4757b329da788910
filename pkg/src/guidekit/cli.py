"""Command-line pipeline: generate, solve, decode, certify, eval, star-filter.

Each subcommand reads and writes line-delimited JSON so stages compose:

    guidekit generate --split fictional --count 50 --seed 7 --out data.jsonl
    guidekit solve data.jsonl
    guidekit decode data.jsonl --perfect --guided --out transcripts.jsonl
    guidekit certify transcripts.jsonl data.jsonl --out verdicts.jsonl
    guidekit eval transcripts.jsonl data.jsonl --out report.json
    guidekit star-filter transcripts.jsonl data.jsonl --mode strict --out records.jsonl

An external model backend may be plugged in through the environment variable
``GUIDEKIT_LM_ENDPOINT`` formatted as ``module:factory``; the factory must
return an object implementing the LanguageModel contract.  Desk-scale runs
use scripted models and never need it.
"""

from __future__ import annotations

import argparse
import importlib
import json
import os
import sys

from .csd import Transcript, read_transcripts, write_transcripts
from .harness import (
    StarMode,
    build_prompt,
    default_exemplars,
    default_vocabulary,
    evaluate,
    extract_answer,
    perfect_lm_factory,
    star_filter,
)
from .lexical import Vocabulary
from .lm import ScriptedLM, chat_adapter, load_script
from .logic import Answer
from .logicguide import certify
from .problems import Ontology, generate_split, load_dataset, oracle_answer, save_dataset

ENDPOINT_VAR = "GUIDEKIT_LM_ENDPOINT"


def _lm_factory(args, vocab: Vocabulary):
    endpoint = os.environ.get(ENDPOINT_VAR)
    if endpoint:
        module_name, _, factory_name = endpoint.partition(":")
        module = importlib.import_module(module_name)
        external = getattr(module, factory_name)
        return lambda problem, prompt: external(problem=problem, prompt=prompt, vocab=vocab)
    if args.script:
        messages, policy = load_script(args.script)

        def scripted(problem, prompt):
            lm = ScriptedLM(messages, vocab, policy)
            return chat_adapter(lm) if args.chat else lm

        return scripted
    if args.perfect:
        return perfect_lm_factory(vocab)
    raise SystemExit("decode needs --script FILE, --perfect, or " + ENDPOINT_VAR)


def cmd_generate(args) -> int:
    problems = generate_split(args.count, Ontology(args.split), seed=args.seed, hops=args.hops)
    save_dataset(args.out, problems)
    print(f"wrote {len(problems)} problems to {args.out}")
    return 0


def cmd_solve(args) -> int:
    problems = load_dataset(args.dataset)
    mismatched = 0
    for i, problem in enumerate(problems):
        answer = oracle_answer(problem.theory)
        stored = Answer.TRUE if problem.answer else Answer.FALSE
        flag = "" if answer == stored else "  [mismatch vs stored answer]"
        if answer != stored:
            mismatched += 1
        print(f"{i}\t{answer.value}{flag}")
    if mismatched:
        print(f"{mismatched} mismatches", file=sys.stderr)
    return 1 if mismatched else 0


def cmd_decode(args) -> int:
    problems = load_dataset(args.dataset)
    vocab = Vocabulary.load(args.vocab) if args.vocab else default_vocabulary()
    factory = _lm_factory(args, vocab)
    report, outcomes = evaluate(
        problems,
        factory,
        guided=args.guided,
        vocab=vocab,
        max_violations=args.max_violations,
        seed=args.seed,
    )
    transcripts = []
    extras = []
    for o in outcomes:
        transcripts.append(
            o.transcript
            if o.transcript is not None
            else Transcript(o.completion.encode("utf-8", "surrogateescape"), (), 0, False)
        )
        extras.append({"problem": o.index, "guided": o.guided})
    write_transcripts(args.out, transcripts, extras)
    print(f"wrote {len(transcripts)} transcripts to {args.out}")
    print(report.render_table())
    return 0


def _iter_transcripts(path: str, problems):
    for transcript, record in read_transcripts(path):
        index = record.get("problem")
        problem = problems[index] if index is not None and index < len(problems) else None
        yield transcript, record, problem


def cmd_certify(args) -> int:
    problems = load_dataset(args.dataset)
    lines = []
    for transcript, record, problem in _iter_transcripts(args.transcripts, problems):
        stated = extract_answer(transcript.full_text.decode("utf-8", "surrogateescape"))
        verdict = certify(transcript, stated or Answer.UNKNOWN)
        lines.append(
            {
                "problem": record.get("problem"),
                "answer": verdict.answer.value,
                "certified": verdict.certified,
                "reason": verdict.reason.value,
            }
        )
    with open(args.out, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line) + "\n")
    print(f"wrote {len(lines)} verdicts to {args.out}")
    return 0


def _outcomes_from_files(transcripts_path: str, dataset_path: str):
    from .harness import EvalOutcome
    from .logicguide import certify as _certify

    problems = load_dataset(dataset_path)
    exemplars_cache: dict[bool, list] = {}
    outcomes = []
    for transcript, record, problem in _iter_transcripts(transcripts_path, problems):
        if problem is None:
            continue
        guided = bool(record.get("guided", True))
        if guided not in exemplars_cache:
            exemplars_cache[guided] = default_exemplars(guided)
        completion = transcript.full_text.decode("utf-8", "surrogateescape")
        stated = extract_answer(completion)
        verdict = _certify(transcript, stated or Answer.UNKNOWN) if guided else None
        outcomes.append(
            EvalOutcome(
                index=record.get("problem", 0),
                hops=problem.hops,
                ontology=problem.ontology,
                prompt=build_prompt(problem, guided, exemplars_cache[guided]),
                completion=completion,
                stated=stated,
                oracle=Answer.TRUE if problem.answer else Answer.FALSE,
                guided=guided,
                verdict=verdict,
                violations=transcript.violation_count,
                aborted=transcript.aborted,
                transcript=transcript,
            )
        )
    return outcomes


def cmd_eval(args) -> int:
    from .harness import EvalReport, _bucket

    outcomes = _outcomes_from_files(args.transcripts, args.dataset)
    by_split: dict[str, list] = {}
    by_hops: dict[int, list] = {}
    for o in outcomes:
        by_split.setdefault(o.ontology.value, []).append(o)
        by_hops.setdefault(o.hops, []).append(o)
    report = EvalReport(
        overall=_bucket(outcomes, args.seed),
        by_split={k: _bucket(v, args.seed) for k, v in by_split.items()},
        by_hops={k: _bucket(v, args.seed) for k, v in by_hops.items()},
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_record(), fh, indent=2, sort_keys=True)
        print(f"wrote report to {args.out}")
    print(report.render_table())
    return 0


def cmd_star_filter(args) -> int:
    outcomes = _outcomes_from_files(args.transcripts, args.dataset)
    records = star_filter(outcomes, StarMode(args.mode))
    with open(args.out, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_record()) + "\n")
    print(f"kept {len(records)} of {len(outcomes)} records ({args.mode})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guidekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a problem split")
    p.add_argument("--split", choices=[o.value for o in Ontology], required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--hops", type=int, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="print oracle answers for a dataset")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("decode", help="decode a dataset with a scripted or external model")
    p.add_argument("dataset")
    p.add_argument("--script", help="script file (policy header + hex messages)")
    p.add_argument("--perfect", action="store_true", help="synthesize a perfect-formalizer script per problem")
    p.add_argument("--chat", action="store_true", help="wrap the scripted model in the chat adapter")
    p.add_argument("--guided", action="store_true")
    p.add_argument("--max-violations", type=int, default=20)
    p.add_argument("--vocab", help="vocabulary file (id + hex per line)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("certify", help="replay transcripts and emit verdicts")
    p.add_argument("transcripts")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("eval", help="score transcripts against a dataset")
    p.add_argument("transcripts")
    p.add_argument("dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("star-filter", help="emit fine-tuning records under an admission mode")
    p.add_argument("transcripts")
    p.add_argument("dataset")
    p.add_argument("--mode", choices=[m.value for m in StarMode], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_star_filter)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
