"""End-to-end composition: coverage + history -> candidate commits -> scores."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .history import GitFileReader, GitRepo, MiningReport, build_evolve_relation, prepare_request
from .model import (
    CommitId,
    CoverageMatrix,
    ElementId,
    EvolveRelation,
    covered_class_names,
    parse_evolve,
    restrict_to_tests,
    select_relevant_tests,
    write_evolve,
)
from .scoring import CommitScoreTable, VotingConfig, reduce_search_space, score_all, score_all_max
from .semantic import filter_commits
from .suspiciousness import SuspiciousnessMap, failure_elements

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


@dataclass
class Reduction:
    all_commits: list[CommitId]
    e_f: set[ElementId]
    evolve: EvolveRelation
    c_f: set[CommitId]
    c_sp: set[CommitId]
    c_bic: set[CommitId]
    report: MiningReport = field(default_factory=MiningReport)

    @property
    def ratio_stage1(self) -> float:
        return len(self.c_f) / len(self.all_commits) if self.all_commits else 0.0

    @property
    def ratio_stage2(self) -> float:
        return len(self.c_bic) / len(self.all_commits) if self.all_commits else 0.0


def relevant_matrix(matrix: CoverageMatrix) -> CoverageMatrix:
    """Keep failing tests and tests named after a class the failing tests cover."""
    tests = select_relevant_tests(matrix.tests, covered_class_names(matrix))
    return restrict_to_tests(matrix, tests)


def reduce(
    repo_path: str | Path,
    matrix: CoverageMatrix,
    end: str = "HEAD",
    stage2: bool = True,
    jobs: int = 1,
    evolve_cache: str | Path | None = None,
    keep_going: bool = False,
) -> Reduction:
    repo = GitRepo(repo_path)
    try:
        all_commits = repo.commits(end)
    except Exception as exc:
        raise StageError("stage 1 (history)", exc) from exc
    e_f = failure_elements(matrix)
    report = MiningReport()
    try:
        if evolve_cache is not None and Path(evolve_cache).exists():
            evolve = parse_evolve(evolve_cache)
            log.info("read evolve relation from %s", evolve_cache)
        else:
            request = prepare_request(repo_path, end, e_f)
            evolve = build_evolve_relation(request, jobs=jobs, keep_going=keep_going, report=report)
            if evolve_cache is not None:
                write_evolve(evolve, evolve_cache)
    except Exception as exc:
        raise StageError("stage 1 (history)", exc) from exc
    c_f = reduce_search_space(e_f, evolve)
    if stage2:
        try:
            c_bic, c_sp = filter_commits(c_f, e_f, evolve, GitFileReader(repo), jobs=jobs)
        except Exception as exc:
            raise StageError("stage 2 (semantic filter)", exc) from exc
    else:
        c_bic, c_sp = set(c_f), set()
    return Reduction(all_commits, e_f, evolve, c_f, c_sp, c_bic, report)


def score(
    reduction: Reduction,
    susp: SuspiciousnessMap,
    config: VotingConfig = VotingConfig(),
    aggregation: str = "voting",
) -> CommitScoreTable:
    restricted = susp.restricted(reduction.e_f)
    if aggregation == "max":
        return score_all_max(restricted, reduction.evolve, reduction.c_bic)
    return score_all(config, restricted, reduction.evolve, reduction.c_bic)

