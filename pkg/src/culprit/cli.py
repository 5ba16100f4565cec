"""Command line interface: ``culprit {reduce,score,bisect,eval,simulate,generate}``.

Machine-readable output is TSV on stdout (or ``--out``); human summaries go to
stderr. Exit status: 0 success, 1 invalid input, 2 environment failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bisection, evaluation
from .history import GitError, GitRepo
from .model import FormatError, ValidationError, parse_coverage
from .pipeline import Reduction, StageError, reduce, relevant_matrix, score
from .scoring import Tau, VoteMode, VotingConfig, read_scores
from .suspiciousness import load_external_scores, ochiai_scores

log = logging.getLogger("culprit")

EXIT_OK, EXIT_INVALID, EXIT_ENV = 0, 1, 2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--repo", required=True, help="git repository holding the buggy version")
    p.add_argument("--coverage", required=True, help="coverage JSON")
    p.add_argument("--end", default="HEAD", help="buggy revision (default: HEAD)")
    p.add_argument("--no-stage2", action="store_true", help="skip the semantic-preserving filter")
    p.add_argument("--jobs", type=int, default=1, help="parallel git/filter workers")
    p.add_argument("--evolve-cache", help="read the evolve TSV from here, or write it after mining")
    p.add_argument("--keep-going", action="store_true", help="record mining failures instead of aborting")
    p.add_argument("--all-tests", action="store_true", help="use every test, not just the relevant ones")
    p.add_argument("--out", help="output file (default: stdout)")


def _reduction(args):
    matrix = parse_coverage(args.coverage)
    if not args.all_tests:
        matrix = relevant_matrix(matrix)
    red = reduce(
        args.repo, matrix, end=args.end, stage2=not args.no_stage2, jobs=args.jobs,
        evolve_cache=args.evolve_cache, keep_going=args.keep_going,
    )
    for elem, err in sorted(red.report.failures.items()):
        print(f"mining failed for {elem}: {err}", file=sys.stderr)
    return matrix, red


def _report_tsv(red: Reduction) -> str:
    rows = [
        ("summary", "C", len(red.all_commits)),
        ("summary", "C_F", len(red.c_f)),
        ("summary", "C_SP", len(red.c_sp)),
        ("summary", "C_BIC", len(red.c_bic)),
        ("summary", "ratio_C_F", f"{red.ratio_stage1:.6f}"),
        ("summary", "ratio_C_BIC", f"{red.ratio_stage2:.6f}"),
    ]
    for c in sorted(red.c_f, key=lambda c: c.recency_key):
        rows.append(("commit", c.hash, "SP" if c in red.c_sp else "BIC"))
    return "kind\tkey\tvalue\n" + "".join(f"{a}\t{b}\t{v}\n" for a, b, v in rows)


def cmd_reduce(args) -> int:
    _, red = _reduction(args)
    _emit(_report_tsv(red), args.out)
    print(
        f"|C|={len(red.all_commits)} |C_F|={len(red.c_f)} ({red.ratio_stage1:.1%}) "
        f"|C_BIC|={len(red.c_bic)} ({red.ratio_stage2:.1%}), {len(red.c_sp)} semantic-preserving",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_score(args) -> int:
    config = VotingConfig(alpha=args.alpha, tau=Tau(args.tau), lam=args.lam, vote=VoteMode(args.vote))
    matrix, red = _reduction(args)
    if args.fl == "ochiai":
        susp = ochiai_scores(matrix)
    elif args.fl.startswith("external:"):
        susp = load_external_scores(args.fl.split(":", 1)[1], shift_to_zero=args.shift_to_zero)
    else:
        raise ValidationError(f"--fl must be 'ochiai' or 'external:<path>', got {args.fl!r}")
    table = score(red, susp, config, aggregation=args.aggregate)
    _emit(table.to_tsv(), args.out)
    print(f"scored {len(table.entries)} candidate commits", file=sys.stderr)
    return EXIT_OK


def cmd_bisect(args) -> int:
    repo = GitRepo(args.repo)
    commits = repo.commits(args.end)
    if args.standard:
        session = bisection.standard_session(commits)
    else:
        session = bisection.new_session(read_scores(args.scores), commits)
    log_path = args.resume or args.log
    if args.resume:
        bisection.replay(session, bisection.read_log(args.resume))
    if args.run:
        oracle = bisection.CommandOracle(args.repo, args.run)
    elif args.interactive:
        oracle = bisection.InteractiveOracle()
    else:
        k = args.oracle_index
        if not 0 <= k < len(session.candidates):
            raise ValidationError(f"--oracle-index {k} outside 0..{len(session.candidates) - 1}")
        oracle = bisection.simulated_oracle(k)
    bic, n = bisection.run(session, oracle, log_path=log_path)
    total = len(session.log)
    _emit(f"bic\t{bic.hash}\niterations\t{total}\ncandidates\t{len(session.candidates)}\n", args.out)
    print(f"bug inducing commit: {bic.hash} after {total} iterations ({n} this run)", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    records = evaluation.read_rank_file(args.ranks)
    rows = evaluation.evaluate_ranks(records)
    text = "metric\tvalue\trandom_baseline\n" + "".join(
        f"{m}\t{v:.6f}\t{b:.6f}\n" for m, v, b in rows
    )
    _emit(text, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    paths = sorted(Path(args.scenarios).glob("*.tsv"))
    if not paths:
        raise ValidationError(f"no scenario files (*.tsv) in {args.scenarios}")
    results = evaluation.compare_bisection(evaluation.read_bisection_scenario(p) for p in paths)
    lines = ["\t".join(evaluation.COMPARISON_HEADER)]
    lines += ["\t".join(map(str, row)) for row in evaluation.comparison_rows(results)]
    _emit("\n".join(lines) + "\n", args.out)
    saved = [r.saved_full for r in results]
    print(f"{len(results)} scenarios, mean saving on C: {sum(saved) / len(saved):.2f}", file=sys.stderr)
    return EXIT_OK


def cmd_generate(args) -> int:
    params = evaluation.ScenarioParams(n_commits=args.commits)
    scenario = evaluation.generate_scenario(args.seed, params)
    paths = evaluation.write_fixture(scenario, args.out)
    print(f"fixture written to {args.out} (repo, coverage.json, truth.tsv)", file=sys.stderr)
    _emit("".join(f"{k}\t{v}\n" for k, v in paths.items()), None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="culprit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--seed", type=int, default=0, help="seed for generated data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="compute C_F, C_SP and C_BIC")
    _pipeline_args(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("score", help="rank candidate commits")
    _pipeline_args(p)
    p.add_argument("--fl", default="ochiai", help="ochiai | external:<tsv>")
    p.add_argument("--shift-to-zero", action="store_true", help="shift negative external scores up to 0")
    p.add_argument("--alpha", type=int, choices=(0, 1), default=0)
    p.add_argument("--tau", choices=[t.value for t in Tau], default="max")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--vote", choices=[v.value for v in VoteMode], default="rank")
    p.add_argument("--aggregate", choices=("voting", "max"), default="voting",
                   help="'max' scores each commit by its most suspicious element")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bisect", help="weighted bisection over scored commits")
    p.add_argument("--repo", required=True)
    p.add_argument("--end", default="HEAD")
    p.add_argument("--scores", help="scores TSV from `culprit score`")
    p.add_argument("--standard", action="store_true", help="ignore scores: plain bisection over all commits")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--run", help="command judged at each pivot; exit 0 means good")
    mode.add_argument("--interactive", action="store_true")
    mode.add_argument("--oracle-index", type=int, help="simulate with the BIC at this candidate index")
    p.add_argument("--resume", help="session log to replay and continue")
    p.add_argument("--log", help="session log to append verdicts to")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bisect)

    p = sub.add_parser("eval", help="MRR and Acc@n from a rank file")
    p.add_argument("--ranks", required=True, help="bug_id<TAB>rank<TAB>search_space_size")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="standard vs weighted bisection iteration counts")
    p.add_argument("--scenarios", required=True, help="directory of scenario TSV files")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="materialise a synthetic fixture repository")
    p.add_argument("--out", required=True, help="empty or missing directory")
    p.add_argument("--commits", type=int, default=30)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "bisect" and not args.standard and not args.scores:
        parser.error("bisect needs --scores unless --standard is given")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV if isinstance(exc.cause, (GitError, OSError)) else EXIT_INVALID
    except (FormatError, ValidationError, ValueError, bisection.BisectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (GitError, OSError, bisection.OracleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV


if __name__ == "__main__":
    sys.exit(main())
