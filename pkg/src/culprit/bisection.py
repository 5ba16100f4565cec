"""Weighted bisection over score-bearing candidate commits.

Candidates are ordered newest first. ``bad`` starts at the newest candidate and
``good`` one past the oldest; each pivot splits the remaining score mass as
evenly as possible. With equal weights this is ordinary bisection.
"""

from __future__ import annotations

import bisect as _bisect
import enum
import itertools
import logging
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .model import CommitId, FormatError, ValidationError

log = logging.getLogger(__name__)


class Verdict(enum.Enum):
    BAD = "bad"  # bug present
    GOOD = "good"  # bug absent


class BisectionError(RuntimeError):
    pass


class OracleError(RuntimeError):
    pass


@dataclass
class BisectionSession:
    candidates: list[CommitId]
    weights: list[float]
    bad: int = 0
    good: int = -1
    log: list[tuple[int, Verdict]] = field(default_factory=list)
    pivot: int | None = None

    def __post_init__(self):
        if len(self.candidates) != len(self.weights):
            raise ValidationError("candidates and weights differ in length")
        if not self.candidates:
            raise ValidationError("no candidate commits")
        if any(not w > 0 for w in self.weights):
            raise ValidationError("every candidate weight must be positive")
        if self.good < 0:
            self.good = len(self.candidates)
        # prefix[i] = sum of weights[:i]
        self._prefix = [0.0, *itertools.accumulate(self.weights)]

    @property
    def finished(self) -> bool:
        return self.bad + 1 >= self.good

    @property
    def result(self) -> CommitId:
        if not self.finished:
            raise BisectionError("bisection has not finished")
        return self.candidates[self.bad]

    def select_pivot(self) -> int:
        """Index in ``(bad, good)`` that best balances the score mass on each side.

        The left side is ``[bad, p)`` and the right side ``[p, good)``; ties
        go to the smallest index.
        """
        if self.finished:
            raise BisectionError("bisection has already finished")
        prefix, bad, good = self._prefix, self.bad, self.good
        total = prefix[bad] + prefix[good]

        def imbalance(p):
            return abs((prefix[p] - prefix[bad]) - (prefix[good] - prefix[p]))

        # differences at rounding level count as ties, so equal weights such as
        # 0.3 still give the midpoint
        eps = 1e-9 * (prefix[good] - prefix[bad])
        # imbalance is unimodal in p; the minimum sits next to the half-way point
        k = _bisect.bisect_left(prefix, total / 2, bad + 1, good)
        best = None
        for p in (k - 1, k):
            if bad + 1 <= p <= good - 1 and (best is None or imbalance(p) < imbalance(best) - eps):
                best = p
        self.pivot = best
        return best

    def step(self, verdict: Verdict) -> "BisectionSession":
        if self.finished:
            raise BisectionError("step after the bisection finished")
        if self.pivot is None:
            raise BisectionError("no pivot selected")
        verdict = Verdict(verdict)
        if verdict is Verdict.BAD:
            self.bad = self.pivot
        else:
            self.good = self.pivot
        self.log.append((self.pivot, verdict))
        self.pivot = None
        return self


def new_session(scores: Mapping[str, float] | "CommitScoreTable", all_commits: Sequence[CommitId]) -> BisectionSession:
    """Session over the positive-score commits of ``all_commits`` (newest first)."""
    lookup = getattr(scores, "score_of", None) or (lambda c: scores.get(c.hash, 0.0))
    pairs = [(c, lookup(c)) for c in all_commits]
    pairs = [(c, s) for c, s in pairs if s > 0]
    if not pairs:
        raise ValidationError(
            "no commit has a positive score; run standard bisection over the full history"
        )
    return BisectionSession([c for c, _ in pairs], [s for _, s in pairs])


def standard_session(commits: Sequence[CommitId]) -> BisectionSession:
    return BisectionSession(list(commits), [1.0] * len(commits))


Oracle = Callable[[CommitId, int], Verdict]


def run(session: BisectionSession, oracle: Oracle, log_path: str | Path | None = None) -> tuple[CommitId, int]:
    """Drive the session to completion. Returns ``(bic, oracle invocations)``.

    Verdicts are appended to ``log_path`` as they arrive so an interrupted run
    can be resumed with :func:`replay`.
    """
    iterations = 0
    while not session.finished:
        p = session.select_pivot()
        verdict = Verdict(oracle(session.candidates[p], p))
        iterations += 1
        session.step(verdict)
        if log_path is not None:
            append_log(log_path, p, session.candidates[p], verdict)
    return session.result, iterations


def simulated_oracle(bic_index: int) -> Oracle:
    """Perfect oracle: the bug is present at the BIC and every newer candidate."""

    def oracle(commit: CommitId, index: int) -> Verdict:
        return Verdict.BAD if index <= bic_index else Verdict.GOOD

    return oracle


def count_iterations(weights: Sequence[float], bic_index: int) -> int:
    commits = [CommitId(str(i)) for i in range(len(weights))]
    session = BisectionSession(commits, list(weights))
    found, n = run(session, simulated_oracle(bic_index))
    if found.hash != str(bic_index):
        raise BisectionError("simulated bisection missed the BIC")
    return n


def append_log(path: str | Path, pivot: int, commit: CommitId, verdict: Verdict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(f"{pivot}\t{commit.hash}\t{verdict.value}\n")


def read_log(path: str | Path) -> list[tuple[int, str, Verdict]]:
    path = Path(path)
    if not path.exists():
        return []
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            pivot, chash, verdict = line.split("\t")
            records.append((int(pivot), chash, Verdict(verdict)))
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: expected pivot, hash and verdict") from None
    return records


def replay(session: BisectionSession, records) -> BisectionSession:
    """Re-apply logged verdicts, checking each pivot against a fresh selection."""
    for pivot, chash, verdict in records:
        expected = session.select_pivot()
        if expected != pivot or session.candidates[pivot].hash != chash:
            raise BisectionError(
                f"log diverges from the session: expected pivot {expected}, log has {pivot} ({chash})"
            )
        session.step(verdict)
    return session


class CommandOracle:
    """Runs a shell command in a temporary worktree at the pivot.

    Exit status 0 means GOOD, anything else BAD.
    """

    def __init__(self, repo_path: str | Path, command: str, git: str | None = None):
        from .history import GitRepo

        self.repo = GitRepo(repo_path, git)
        self.command = command

    def __call__(self, commit: CommitId, index: int) -> Verdict:
        from .history import GitError

        with tempfile.TemporaryDirectory(prefix="culprit-bisect-") as tmp:
            worktree = Path(tmp) / "wt"
            try:
                self.repo.run("worktree", "add", "--detach", str(worktree), commit.hash)
            except GitError as exc:
                raise OracleError(f"cannot check out {commit.hash}: {exc}") from exc
            try:
                proc = subprocess.run(self.command, shell=True, cwd=worktree)
            except OSError as exc:
                raise OracleError(f"cannot run {self.command!r}: {exc}") from exc
            finally:
                self.repo.run("worktree", "remove", "--force", str(worktree), check=False)
                self.repo.run("worktree", "prune", check=False)
        log.info("%s at %s exited %d", shlex.quote(self.command), commit.hash, proc.returncode)
        return Verdict.GOOD if proc.returncode == 0 else Verdict.BAD


class InteractiveOracle:
    def __init__(self, read=input, out=sys.stderr):
        self.read = read
        self.out = out

    def __call__(self, commit: CommitId, index: int) -> Verdict:
        while True:
            try:
                answer = self.read(f"[{index}] {commit.hash}: good/bad/skip? ").strip().lower()
            except EOFError:
                raise OracleError("input closed before a verdict was given") from None
            if answer in ("good", "g"):
                return Verdict.GOOD
            if answer in ("bad", "b"):
                return Verdict.BAD
            if answer in ("skip", "s"):
                print(
                    "skip is not supported: weighted bisection needs a definite verdict "
                    "for every pivot",
                    file=self.out,
                )
            else:
                print("please answer good or bad", file=self.out)
