"""Mining per-statement change histories from a git repository.

Each statement is traced through the history of its enclosing method with
``git log -C -M -L<start>,<end>:<file>``.
"""

from __future__ import annotations

import logging
import os
import subprocess
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .model import CommitId, ElementId, EvolveRelation, newest_first
from .semantic import LexError, NormalisationError, match_brackets, tokenize

log = logging.getLogger(__name__)


class GitError(RuntimeError):
    def __init__(self, args: Sequence[str], returncode: int, stderr: str):
        self.command = list(args)
        self.returncode = returncode
        self.stderr = stderr.strip()
        super().__init__(f"{' '.join(self.command)} exited with {returncode}: {self.stderr}")


class UnbalancedSourceWarning(UserWarning):
    pass


def git_binary() -> str:
    return os.environ.get("CULPRIT_GIT", "git")


class GitRepo:
    """Thin subprocess wrapper around the system git binary."""

    def __init__(self, path: str | Path, git: str | None = None):
        self.path = Path(path)
        self.git = git or git_binary()
        self._commit_table: dict[str, dict[str, CommitId]] = {}
        self._modified: dict[str, frozenset[str]] = {}

    def run(self, *args: str, check: bool = True) -> str:
        cmd = [self.git, *args]
        try:
            proc = subprocess.run(
                cmd, cwd=self.path, capture_output=True, text=True, errors="surrogateescape"
            )
        except OSError as exc:
            raise GitError(cmd, -1, str(exc)) from exc
        if check and proc.returncode != 0:
            raise GitError(cmd, proc.returncode, proc.stderr)
        return proc.stdout

    def resolve(self, rev: str) -> str:
        return self.run("rev-parse", "--verify", f"{rev}^{{commit}}").strip()

    def commits(self, end: str = "HEAD") -> list[CommitId]:
        """All ancestors of ``end`` (inclusive), newest first, with order indices."""
        end_hash = self.resolve(end)
        if end_hash not in self._commit_table:
            out = self.run("log", "--date-order", "--format=%H %ct", end_hash)
            rows = [line.split() for line in out.splitlines() if line.strip()]
            # stable: equal timestamps keep git's topological date order
            rows.sort(key=lambda r: -int(r[1]))
            table = {
                h: CommitId(h, int(t), i) for i, (h, t) in enumerate(rows)
            }
            self._commit_table[end_hash] = table
        return sorted(self._commit_table[end_hash].values(), key=lambda c: c.order_index)

    def commit_table(self, end: str = "HEAD") -> dict[str, CommitId]:
        self.commits(end)
        return self._commit_table[self.resolve(end)]

    def show(self, rev: str, path: str) -> str | None:
        try:
            return self.run("show", f"{rev}:{path}")
        except GitError:
            return None

    def exists(self, rev: str, path: str) -> bool:
        try:
            self.run("cat-file", "-e", f"{rev}:{path}")
        except GitError:
            return False
        return True

    def parents(self, rev: str) -> list[str]:
        out = self.run("rev-list", "--parents", "-n", "1", rev).split()
        return out[1:]

    def modified_paths(self, commit: str) -> frozenset[str]:
        """Paths changed in place (status M) by ``commit`` relative to its first parent."""
        if commit not in self._modified:
            parents = self.parents(commit)
            if not parents:
                paths = frozenset()
            else:
                out = self.run(
                    "diff-tree", "-r", "-M", "--name-status", "--no-commit-id", parents[0], commit
                )
                paths = frozenset(
                    line.split("\t", 1)[1]
                    for line in out.splitlines()
                    if line.startswith("M\t")
                )
            self._modified[commit] = paths
        return self._modified[commit]


class GitFileReader:
    """File reader for the semantic filter.

    Only paths modified in place by the commit are readable; added, deleted,
    renamed and copied files are reported unreadable so the commit is kept.
    """

    def __init__(self, repo: GitRepo):
        self.repo = repo

    def __call__(self, commit: CommitId, path: str, side: str) -> str | None:
        if path not in self.repo.modified_paths(commit.hash):
            return None
        if side == "after":
            return self.repo.show(commit.hash, path)
        if side == "before":
            return self.repo.show(self.repo.parents(commit.hash)[0], path)
        raise ValueError(f"side must be 'before' or 'after', got {side!r}")


_NOT_METHODS = {
    "if", "for", "while", "switch", "catch", "synchronized", "return", "new",
    "sizeof", "foreach", "using", "lock", "fixed", "when",
}
_QUALIFIERS = {"const", "noexcept", "override", "final", "volatile", "mutable"}


def _method_spans(tokens, match) -> list[tuple[int, int]]:
    spans = []
    for k, tok in enumerate(tokens):
        if tok.kind != "op" or tok.text != "{":
            continue
        r = k - 1
        # skip `throws A, b.C` / trailing qualifiers between `)` and `{`
        j = r
        while j >= 0 and (
            (tokens[j].kind == "ident" and tokens[j].text not in _NOT_METHODS)
            or tokens[j].text in (",", ".")
        ):
            if tokens[j].text == "throws" or tokens[j].text in _QUALIFIERS:
                r = j - 1
            j -= 1
        if r < 0 or tokens[r].text != ")" or tokens[r].kind != "op":
            continue
        name = match[r] - 1
        if name < 0 or tokens[name].kind != "ident" or tokens[name].text in _NOT_METHODS:
            continue
        if name > 0 and tokens[name - 1].text in ("new", ".", "->"):
            continue
        start = name
        while start > 0 and not (
            tokens[start - 1].kind == "directive"
            or (tokens[start - 1].kind == "op" and tokens[start - 1].text in (";", "{", "}"))
        ):
            start -= 1
        spans.append((tokens[start].line, tokens[match[k]].line))
    return spans


def resolve_enclosing_range(file: str, line: int, source_text: str) -> tuple[int, int]:
    """Smallest method span containing ``line``; the whole file when none does.

    Unparseable source also falls back to the whole file and emits an
    UnbalancedSourceWarning.
    """
    whole = (1, max(1, len(source_text.splitlines()), line))
    try:
        tokens = tokenize(source_text)
        match = match_brackets(tokens)
    except (LexError, NormalisationError) as exc:
        warnings.warn(f"{file}: {exc}; using whole-file range", UnbalancedSourceWarning, stacklevel=2)
        return whole
    containing = [s for s in _method_spans(tokens, match) if s[0] <= line <= s[1]]
    if not containing:
        return whole
    return min(containing, key=lambda s: (s[1] - s[0], -s[0]))


@dataclass
class MiningRequest:
    repo_path: str | Path
    end_commit: str
    elements: list[ElementId]


@dataclass
class MiningReport:
    ranges: int = 0
    failures: dict[ElementId, str] = field(default_factory=dict)
    empty: list[ElementId] = field(default_factory=list)


def prepare_request(repo_path: str | Path, end_commit: str, elements: Iterable[ElementId]) -> MiningRequest:
    """Attach enclosing method ranges, read from the files at ``end_commit``."""
    repo = GitRepo(repo_path)
    sources: dict[str, str | None] = {}
    resolved = []
    for e in sorted(set(elements)):
        if e.file not in sources:
            sources[e.file] = repo.show(end_commit, e.file)
        text = sources[e.file]
        if text is None:
            resolved.append(e)
            continue
        resolved.append(e.with_range(*resolve_enclosing_range(e.file, e.line, text)))
    return MiningRequest(repo_path, end_commit, resolved)


def _parse_log_l(out: str) -> list[tuple[str, str | None]]:
    entries: list[tuple[str, str | None]] = []
    for line in out.splitlines():
        if line.startswith("\x00"):
            entries.append((line[1:].split()[0], None))
        elif line.startswith("+++ ") and entries:
            target = line[4:]
            path = target[2:] if target.startswith("b/") else None
            entries[-1] = (entries[-1][0], path)
    return entries


def mine_element_history(
    request: MiningRequest, element: ElementId, repo: GitRepo | None = None
) -> tuple[list[CommitId], dict[str, str]]:
    """Commits touching the element's enclosing range, newest first.

    Also returns the path the range had at each commit (keyed by hash).
    """
    repo = repo or GitRepo(request.repo_path)
    end = request.end_commit
    text = repo.show(end, element.file)
    if text is None:
        return [], {}
    n_lines = max(1, len(text.splitlines()))
    start, stop = element.enclosing_range or (element.line, element.line)
    start, stop = min(start, n_lines), min(stop, n_lines)
    out = repo.run(
        "log", "-C", "-M", f"-L{start},{stop}:{element.file}", "--format=%x00%H %ct", repo.resolve(end)
    )
    table = repo.commit_table(end)
    commits, paths = [], {}
    for chash, path in _parse_log_l(out):
        if chash not in table:
            raise GitError(["log", "-L"], 0, f"commit {chash} is not an ancestor of {end}")
        commits.append(table[chash])
        paths[chash] = path or element.file
    return newest_first(commits), paths


def build_evolve_relation(
    request: MiningRequest,
    jobs: int = 1,
    keep_going: bool = False,
    report: MiningReport | None = None,
) -> EvolveRelation:
    """Mine every element's history. Statements sharing a range are mined once."""
    repo = GitRepo(request.repo_path)
    repo.commit_table(request.end_commit)
    report = report if report is not None else MiningReport()

    by_range: dict[tuple[str, tuple[int, int] | None], list[ElementId]] = {}
    for e in sorted(set(request.elements)):
        by_range.setdefault((e.file, e.enclosing_range), []).append(e)
    keys = sorted(by_range, key=lambda k: (k[0], k[1] or (0, 0)))
    report.ranges = len(keys)

    def mine(key):
        try:
            return mine_element_history(request, by_range[key][0], repo), None
        except GitError as exc:
            if not keep_going:
                raise
            return ([], {}), str(exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(mine, keys))
    else:
        results = [mine(k) for k in keys]

    history: dict[ElementId, list[CommitId]] = {}
    paths: dict[tuple[ElementId, str], str] = {}
    for key, ((commits, commit_paths), error) in zip(keys, results):
        for e in by_range[key]:
            if error is not None:
                report.failures[e] = error
                log.warning("history mining failed for %s: %s", e, error)
            if not commits:
                report.empty.append(e)
            history[e] = list(commits)
            for chash, path in commit_paths.items():
                paths[(e, chash)] = path
    return EvolveRelation(history, paths)
