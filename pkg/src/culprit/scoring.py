"""Commit scoring: search-space reduction, rank-based voting and depth-based decay."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .model import CommitId, ElementId, EvolveRelation, FormatError, ValidationError


class Tau(enum.Enum):
    MAX = "max"
    DENSE = "dense"


class VoteMode(enum.Enum):
    RANK = "rank"  # rank-based voting power
    RAW = "raw"  # vote(e) = susp(e), the ablated variant


@dataclass(frozen=True)
class VotingConfig:
    alpha: int = 0
    tau: Tau = Tau.MAX
    lam: float = 0.1
    vote: VoteMode = VoteMode.RANK

    def __post_init__(self):
        if self.alpha not in (0, 1):
            raise ValidationError(f"alpha must be 0 or 1, got {self.alpha}")
        if not 0 <= self.lam < 1:
            raise ValidationError(f"lambda must lie in [0, 1), got {self.lam}")
        object.__setattr__(self, "tau", Tau(self.tau))
        object.__setattr__(self, "vote", VoteMode(self.vote))


def reduce_search_space(e_f: Iterable[ElementId], evolve: EvolveRelation) -> set[CommitId]:
    """C_F: commits in the history of at least one failure-covered element."""
    return {c for e in e_f for c in evolve.commits_of(e)}


def rank_scores(scores: Mapping, tau: Tau | str = Tau.MAX) -> dict:
    """Rank keys by descending score.

    ``max`` gives every member of a tie group the worst rank of the group;
    ``dense`` gives the best rank and does not skip ranks after ties.
    """
    tau = Tau(tau)
    values = sorted(scores.values(), reverse=True)
    if tau is Tau.MAX:
        # rank = number of entries scoring >= s
        worst: dict[float, int] = {}
        for i, v in enumerate(values, start=1):
            worst[v] = i
        return {k: worst[v] for k, v in scores.items()}
    dense: dict[float, int] = {}
    for v in values:
        dense.setdefault(v, len(dense) + 1)
    return {k: dense[v] for k, v in scores.items()}


def rank_elements(susp: Mapping[ElementId, float], tau: Tau | str = Tau.MAX) -> dict[ElementId, int]:
    if any(s < 0 for s in susp.values()):
        raise ValidationError("suspiciousness scores must be non-negative")
    return rank_scores(susp, tau)


def vote(element: ElementId, susp: Mapping[ElementId, float], ranks: Mapping[ElementId, int], alpha: int) -> float:
    return (alpha * susp[element] + (1 - alpha) * 1) / ranks[element]


def voting_powers(susp: Mapping[ElementId, float], config: VotingConfig) -> dict[ElementId, float]:
    if config.vote is VoteMode.RAW:
        return dict(susp)
    ranks = rank_elements(susp, config.tau)
    return {e: vote(e, susp, ranks, config.alpha) for e in susp}


def depth(element: ElementId, commit: CommitId, c_bic: Iterable[CommitId], evolve: EvolveRelation) -> int:
    """Number of candidate commits in the element's history newer than ``commit``."""
    c_bic = set(c_bic)
    return sum(
        1 for c in evolve.commits_of(element) if c in c_bic and c.is_newer_than(commit)
    )


def elements_of_commit(commit: CommitId, e_f: Iterable[ElementId], evolve: EvolveRelation) -> list[ElementId]:
    """E_{F,c}, in sorted order."""
    return sorted(e for e in e_f if evolve.evolves(commit, e))


def commit_score(
    commit: CommitId,
    config: VotingConfig,
    susp: Mapping[ElementId, float],
    evolve: EvolveRelation,
    c_bic: Iterable[CommitId],
) -> float:
    """Score of one candidate. ``susp`` must be restricted to E_F."""
    c_bic = set(c_bic)
    votes = voting_powers(susp, config)
    total = 0.0
    for e in elements_of_commit(commit, susp, evolve):
        total += votes[e] * (1 - config.lam) ** depth(e, commit, c_bic, evolve)
    return total


@dataclass
class CommitScore:
    score: float
    rank: int


@dataclass
class CommitScoreTable:
    entries: dict[CommitId, CommitScore] = field(default_factory=dict)
    in_search_space: set[CommitId] = field(default_factory=set)

    def ranked(self) -> list[tuple[CommitId, CommitScore]]:
        return sorted(
            self.entries.items(), key=lambda kv: (kv[1].rank, -kv[1].score, kv[0].recency_key, kv[0].hash)
        )

    def score_of(self, commit: CommitId | str) -> float:
        key = commit if isinstance(commit, CommitId) else CommitId(commit)
        entry = self.entries.get(key)
        return entry.score if entry else 0.0

    def rank_of(self, commit: CommitId | str) -> int | None:
        key = commit if isinstance(commit, CommitId) else CommitId(commit)
        entry = self.entries.get(key)
        return entry.rank if entry else None

    def to_tsv(self) -> str:
        return "".join(f"{s.rank}\t{c.hash}\t{s.score!r}\n" for c, s in self.ranked())

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")


def _table(scores: dict[CommitId, float], c_bic: set[CommitId]) -> CommitScoreTable:
    ranks = rank_scores(scores, Tau.MAX)
    return CommitScoreTable(
        {c: CommitScore(s, ranks[c]) for c, s in scores.items()}, set(c_bic)
    )


def score_all(
    config: VotingConfig,
    susp: Mapping[ElementId, float],
    evolve: EvolveRelation,
    c_bic: Iterable[CommitId],
    all_commits: Iterable[CommitId] = (),
) -> CommitScoreTable:
    """Score every commit of C_BIC; commits of ``all_commits`` outside it score 0.

    ``susp`` is the suspiciousness map restricted to E_F. Each commit's sum is
    accumulated over elements in sorted order, so results are reproducible.
    """
    c_bic = set(c_bic)
    votes = voting_powers(susp, config)
    decay = 1 - config.lam
    scores: dict[CommitId, float] = {c: 0.0 for c in all_commits}
    scores.update({c: 0.0 for c in c_bic})
    for e in sorted(susp):
        d = 0
        for c in evolve.commits_of(e):  # newest first
            if c in c_bic:
                scores[c] += votes[e] * decay**d
                d += 1
    return _table(scores, c_bic)


def max_aggregation(
    commit: CommitId, susp: Mapping[ElementId, float], evolve: EvolveRelation
) -> float:
    """Baseline: the highest suspiciousness among E_{F,c}; 0 when empty."""
    return max((susp[e] for e in elements_of_commit(commit, susp, evolve)), default=0.0)


def score_all_max(
    susp: Mapping[ElementId, float],
    evolve: EvolveRelation,
    c_bic: Iterable[CommitId],
    all_commits: Iterable[CommitId] = (),
) -> CommitScoreTable:
    c_bic = set(c_bic)
    scores = {c: 0.0 for c in all_commits}
    scores.update({c: max_aggregation(c, susp, evolve) for c in c_bic})
    return _table(scores, c_bic)


def read_scores(path: str | Path) -> dict[str, float]:
    """Read a ``rank<TAB>commit_hash<TAB>score`` file into ``hash -> score``."""
    path = Path(path)
    scores: dict[str, float] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}: line {lineno}: expected rank, hash and score")
        try:
            int(parts[0])
            score = float(parts[2])
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from None
        if parts[1] in scores:
            raise FormatError(f"{path}: line {lineno}: duplicate commit {parts[1]}")
        scores[parts[1]] = score
    return scores
