"""Ranking metrics, bisection cost comparison, and synthetic fixture scenarios."""

from __future__ import annotations

import csv
import os
import random
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .bisection import BisectionSession, new_session, run, simulated_oracle, standard_session
from .model import (
    CommitId,
    CoverageMatrix,
    ElementId,
    FormatError,
    Outcome,
    TestId,
    ValidationError,
    write_coverage,
)

DEFAULT_NS = (1, 2, 3, 5, 10)


# -- metrics ---------------------------------------------------------------


def mrr(ranks: Sequence[float]) -> float:
    if not ranks:
        raise ValidationError("MRR of an empty rank list is undefined")
    if any(r < 1 for r in ranks):
        raise ValidationError("ranks start at 1")
    return sum(1 / r for r in ranks) / len(ranks)


def acc_at_n(ranks: Sequence[float], n: int) -> float:
    """Percentage of ranks within the top ``n``."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if not ranks:
        return 0.0
    return 100.0 * sum(1 for r in ranks if r <= n) / len(ranks)


def expected_random_rank(size: int) -> float:
    """Expected rank of the BIC among ``size`` uniformly shuffled candidates."""
    if size < 1:
        raise ValidationError("search space size must be >= 1")
    return (1 + size) / 2


def random_baseline(sizes: Sequence[int], ns: Iterable[int] = DEFAULT_NS) -> dict[str, float]:
    """MRR from each bug's expected random rank; Acc@n assumes a uniform rank."""
    if not sizes:
        raise ValidationError("no search space sizes given")
    result = {"mrr": mrr([expected_random_rank(s) for s in sizes])}
    for n in ns:
        result[f"acc@{n}"] = 100.0 * sum(min(1.0, n / s) for s in sizes) / len(sizes)
    return result


@dataclass
class RankRecord:
    bug_id: str
    rank: int
    search_space_size: int


def read_rank_file(path: str | Path) -> list[RankRecord]:
    path = Path(path)
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("bug_id\t"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}: line {lineno}: expected bug_id, rank and search_space_size")
        try:
            rec = RankRecord(parts[0], int(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from None
        if rec.rank < 1 or rec.search_space_size < rec.rank:
            raise FormatError(f"{path}: line {lineno}: need 1 <= rank <= search_space_size")
        records.append(rec)
    return records


def evaluate_ranks(records: Sequence[RankRecord], ns: Iterable[int] = DEFAULT_NS) -> list[tuple[str, float, float]]:
    """Rows of ``(metric, value, random baseline value)``."""
    ns = list(ns)
    ranks = [r.rank for r in records]
    base = random_baseline([r.search_space_size for r in records], ns)
    rows = [("MRR", mrr(ranks), base["mrr"])]
    rows += [(f"Acc@{n}", acc_at_n(ranks, n), base[f"acc@{n}"]) for n in ns]
    return rows


# -- bisection comparison ---------------------------------------------------


@dataclass
class BisectionScenario:
    name: str
    commits: list[CommitId]  # full history C, newest first
    scores: dict[str, float]  # zero outside C_BIC
    bic: str


@dataclass
class BisectionComparison:
    name: str
    n_commits: int
    n_candidates: int
    standard_full: int
    weighted_full: int
    standard_reduced: int
    weighted_reduced: int

    @property
    def saved_full(self) -> int:
        return self.standard_full - self.weighted_full

    @property
    def saved_reduced(self) -> int:
        return self.standard_reduced - self.weighted_reduced


def _iterations(session: BisectionSession, bic: str) -> int:
    index = [c.hash for c in session.candidates].index(bic)
    found, n = run(session, simulated_oracle(index))
    assert found.hash == bic
    return n


def compare_one(scenario: BisectionScenario) -> BisectionComparison:
    weighted = new_session(scenario.scores, scenario.commits)
    reduced = list(weighted.candidates)
    if scenario.bic not in {c.hash for c in reduced}:
        raise ValidationError(f"{scenario.name}: the BIC has no positive score")
    w = _iterations(weighted, scenario.bic)
    return BisectionComparison(
        scenario.name,
        len(scenario.commits),
        len(reduced),
        standard_full=_iterations(standard_session(scenario.commits), scenario.bic),
        weighted_full=w,
        standard_reduced=_iterations(standard_session(reduced), scenario.bic),
        # weighted bisection drops zero-score commits itself, so both setups coincide
        weighted_reduced=w,
    )


def compare_bisection(scenarios: Iterable[BisectionScenario]) -> list[BisectionComparison]:
    return [compare_one(s) for s in scenarios]


SCENARIO_HEADER = ["commit_hash", "score", "is_bic"]
COMPARISON_HEADER = [
    "scenario", "n_commits", "n_candidates",
    "standard_C", "weighted_C", "saved_C",
    "standard_C_BIC", "weighted_C_BIC", "saved_C_BIC",
]


def write_bisection_scenario(scenario: BisectionScenario, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(SCENARIO_HEADER)
        for c in scenario.commits:
            w.writerow([c.hash, repr(scenario.scores.get(c.hash, 0.0)), int(c.hash == scenario.bic)])


def read_bisection_scenario(path: str | Path) -> BisectionScenario:
    path = Path(path)
    rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines(), delimiter="\t"))
    if not rows or rows[0] != SCENARIO_HEADER:
        raise FormatError(f"{path}: line 1: expected header {'/'.join(SCENARIO_HEADER)}")
    commits, scores, bics = [], {}, []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise FormatError(f"{path}: line {lineno}: expected 3 columns")
        try:
            score, is_bic = float(row[1]), int(row[2])
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from None
        commits.append(CommitId(row[0], 0, len(commits)))
        scores[row[0]] = score
        if is_bic:
            bics.append(row[0])
    if len(bics) != 1:
        raise FormatError(f"{path}: expected exactly one BIC row, found {len(bics)}")
    return BisectionScenario(path.stem, commits, scores, bics[0])


def comparison_rows(results: Sequence[BisectionComparison]) -> list[list]:
    return [
        [r.name, r.n_commits, r.n_candidates, r.standard_full, r.weighted_full, r.saved_full,
         r.standard_reduced, r.weighted_reduced, r.saved_reduced]
        for r in results
    ]


def random_bisection_scenarios(seed: int, count: int, n_commits: int = 200, n_candidates: int = 20) -> list[BisectionScenario]:
    """Skewed score distributions: a few recent candidates carry most of the
    mass and the BIC is usually among them."""
    rng = random.Random(seed)
    out = []
    for k in range(count):
        commits = [CommitId(f"s{seed}c{i:04d}", 0, i) for i in range(n_commits)]
        picked = sorted(rng.sample(range(n_commits), n_candidates))
        scores = {commits[i].hash: rng.paretovariate(1.5) * 0.9 ** j for j, i in enumerate(picked)}
        ranked = sorted(scores, key=scores.get, reverse=True)
        bic = ranked[min(int(rng.expovariate(0.5)), len(ranked) - 1)]
        out.append(BisectionScenario(f"scenario{k:03d}", commits, scores, bic))
    return out


# -- synthetic fixture repositories ------------------------------------------------


@dataclass
class ScenarioParams:
    n_commits: int = 30
    n_files: int = 3
    methods_per_file: int = 4
    statements_per_method: int = 4
    edit_density: float = 0.7
    target_edits_before_bic: int = 2
    comment_only_commit: bool = True
    partial_tests: int = 2

    def validate(self) -> None:
        if self.n_files < 1 or self.methods_per_file < 1 or self.statements_per_method < 2:
            raise ValidationError("need at least one file, one method and two statements per method")
        specials = 1 + self.target_edits_before_bic + int(self.comment_only_commit)
        if self.n_commits < self.n_files + specials + 1:
            raise ValidationError(
                f"{self.n_commits} commits cannot hold {self.n_files} file creations "
                f"and {specials} scheduled target edits"
            )
        if not 0 <= self.edit_density <= 1:
            raise ValidationError("edit_density must lie in [0, 1]")


@dataclass
class Edit:
    kind: str  # create | semantic | bic | comment | unrelated
    file: str
    method: str | None = None
    message: str = ""


@dataclass
class Scenario:
    seed: int
    params: ScenarioParams
    schedule: list[Edit]
    snapshots: list[dict[str, str]]  # per commit: full tree contents
    target_file: str
    target_method: str
    bic: int
    comment_commit: int | None
    coverage: CoverageMatrix
    expected_e_f: set[ElementId]
    method_history: dict[tuple[str, str], list[int]]  # (file, method) -> touching commits, newest first
    element_method: dict[ElementId, tuple[str, str]]
    base_time: int = 1_600_000_000

    def time_of(self, index: int) -> int:
        return self.base_time + 3600 * index

    @property
    def expected_c_f(self) -> set[int]:
        return {i for e in self.expected_e_f for i in self.method_history[self.element_method[e]]}

    @property
    def expected_c_sp(self) -> set[int]:
        return {self.comment_commit} if self.comment_commit is not None else set()

    @property
    def expected_c_bic(self) -> set[int]:
        return self.expected_c_f - self.expected_c_sp

    def expected_history(self) -> dict[ElementId, list[int]]:
        return {e: self.method_history[m] for e, m in self.element_method.items()}


@dataclass
class _Method:
    name: str
    ops: list[str]
    consts: list[int]
    revision: int = 0


def _class_name(k: int) -> str:
    return f"Calc{k}"


def _render(cls: str, methods: list[_Method]) -> tuple[str, dict[str, list[int]]]:
    """Java source for a class plus the executable lines of each method."""
    lines = ["package demo;", "", f"public class {cls} {{", ""]
    exec_lines: dict[str, list[int]] = {}
    for m in methods:
        lines.append(f"    public int {m.name}(int x) {{")
        lines.append(f"        // {m.name}: revision {m.revision}")
        body = [len(lines) + 1]
        lines.append("        int acc = x;")
        for op, c in zip(m.ops, m.consts):
            body.append(len(lines) + 1)
            lines.append(f"        acc = acc {op} {c};")
        body.append(len(lines) + 1)
        lines.append("        return acc;")
        lines.append("    }")
        lines.append("")
        exec_lines[m.name] = body
    lines.append("}")
    return "\n".join(lines) + "\n", exec_lines


def generate_scenario(seed: int = 0, params: ScenarioParams | None = None) -> Scenario:
    """Deterministic synthetic history with one seeded BIC.

    The BIC flips an operator in the target method. No semantic edit touches
    the target method after the BIC; an optional comment-only commit does.
    The failing test covers only the target method.
    """
    params = params or ScenarioParams()
    params.validate()
    rng = random.Random(seed)
    files = [f"src/demo/{_class_name(k)}.java" for k in range(params.n_files)]
    methods = {
        f: [
            _Method(
                f"m{k}_{j}",
                [rng.choice("+*") for _ in range(params.statements_per_method - 1)],
                [rng.randint(2, 9) for _ in range(params.statements_per_method - 1)],
            )
            for j in range(params.methods_per_file)
        ]
        for k, f in enumerate(files)
    }
    target_file = files[rng.randrange(len(files))]
    target = rng.choice(methods[target_file])

    n = params.n_commits
    creation = {f: k for k, f in enumerate(files)}
    first_free = params.n_files
    # BIC somewhere in the later part of history, leaving room for the comment commit
    latest_bic = n - 1 - int(params.comment_only_commit)
    earliest_bic = max(first_free + params.target_edits_before_bic, (first_free + latest_bic) // 2)
    bic = rng.randint(earliest_bic, latest_bic)
    comment = rng.randint(bic + 1, n - 1) if params.comment_only_commit else None
    pre_slots = [i for i in range(max(first_free, creation[target_file] + 1), bic)]
    target_edits = set(rng.sample(pre_slots, params.target_edits_before_bic))

    others = [(f, m) for f in files for m in methods[f] if m is not target]
    schedule: list[Edit] = []
    snapshots: list[dict[str, str]] = []
    tree: dict[str, str] = {"README.md": "demo project\n"}
    history: dict[tuple[str, str], list[int]] = {(f, m.name): [] for f in files for m in methods[f]}
    notes = 0

    def semantic_edit(m: _Method) -> None:
        j = rng.randrange(len(m.consts))
        m.consts[j] = rng.choice([c for c in range(2, 10) if c != m.consts[j]])

    for i in range(n):
        created = [f for f in files if creation[f] == i]
        if created:
            f = created[0]
            edit = Edit("create", f, None, f"add {Path(f).stem}")
            for m in methods[f]:
                history[(f, m.name)].append(i)
        elif i == bic:
            j = rng.randrange(len(target.ops))
            target.ops[j] = "-"
            edit = Edit("bic", target_file, target.name, f"tweak {target.name}")
        elif i == comment:
            target.revision += 1
            edit = Edit("comment", target_file, target.name, f"document {target.name}")
        elif i in target_edits:
            semantic_edit(target)
            edit = Edit("semantic", target_file, target.name, f"tune {target.name}")
        else:
            live = [(f, m) for f, m in others if creation[f] < i]
            if live and rng.random() < params.edit_density:
                f, m = rng.choice(live)
                semantic_edit(m)
                edit = Edit("semantic", f, m.name, f"tune {m.name}")
            else:
                notes += 1
                tree["NOTES.md"] = tree.get("NOTES.md", "") + f"- note {notes}\n"
                edit = Edit("unrelated", "NOTES.md", None, f"notes {notes}")
        if edit.method is not None:
            history[(edit.file, edit.method)].append(i)
        for f in files:
            if creation[f] <= i:
                tree[f] = _render(Path(f).stem, methods[f])[0]
        schedule.append(edit)
        snapshots.append(dict(tree))

    # coverage at the final snapshot
    exec_lines = {f: _render(Path(f).stem, methods[f])[1] for f in files}
    tests: list[TestId] = []
    covered: dict[str, list[ElementId]] = {}
    element_method: dict[ElementId, tuple[str, str]] = {}
    for f in files:
        cls = Path(f).stem
        for m in methods[f]:
            elems = [ElementId(f, ln) for ln in exec_lines[f][m.name]]
            for e in elems:
                element_method[e] = (f, m.name)
            name = f"demo.{cls}Test::test_{m.name}"
            failing = m is target
            tests.append(TestId(name, Outcome.FAIL if failing else Outcome.PASS))
            covered[name] = elems
            if failing:
                for p in range(params.partial_tests):
                    pname = f"demo.{cls}Test::test_{m.name}_prefix{p}"
                    tests.append(TestId(pname, Outcome.PASS))
                    covered[pname] = elems[: 1 + p]
    matrix = CoverageMatrix.from_coverage(tests, covered)
    e_f = {ElementId(target_file, ln) for ln in exec_lines[target_file][target.name]}
    return Scenario(
        seed=seed,
        params=params,
        schedule=schedule,
        snapshots=snapshots,
        target_file=target_file,
        target_method=target.name,
        bic=bic,
        comment_commit=comment,
        coverage=matrix,
        expected_e_f=e_f,
        method_history={k: sorted(v, reverse=True) for k, v in history.items()},
        element_method=element_method,
    )


def _git(repo: Path, *args: str, env: dict | None = None) -> str:
    git = os.environ.get("CULPRIT_GIT", "git")
    proc = subprocess.run(
        [git, "-c", "commit.gpgsign=false", "-c", "core.autocrlf=false", *args],
        cwd=repo, capture_output=True, text=True, env=env,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"git {' '.join(args)} failed: {proc.stderr.strip()}")
    return proc.stdout


def materialise(scenario: Scenario, repo: str | Path) -> list[str]:
    """Write the scenario as a git repository. Returns commit hashes, oldest first.

    Author, committer and dates are fixed, so the same scenario always yields
    the same hashes.
    """
    repo = Path(repo)
    repo.mkdir(parents=True, exist_ok=True)
    if any(repo.iterdir()):
        raise ValidationError(f"{repo} is not empty")
    base_env = {
        k: v for k, v in os.environ.items() if not k.startswith("GIT_")
    }
    base_env.update(
        GIT_AUTHOR_NAME="Fixture", GIT_AUTHOR_EMAIL="fixture@example.com",
        GIT_COMMITTER_NAME="Fixture", GIT_COMMITTER_EMAIL="fixture@example.com",
        GIT_CONFIG_NOSYSTEM="1",
    )
    _git(repo, "init", "-q", env=base_env)
    _git(repo, "checkout", "-q", "-b", "main", env=base_env)
    hashes = []
    written: dict[str, str] = {}
    for i, (edit, snap) in enumerate(zip(scenario.schedule, scenario.snapshots)):
        for path, text in snap.items():
            if written.get(path) != text:
                target = repo / path
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(text.encode("utf-8"))
                written[path] = text
        _git(repo, "add", "-A", env=base_env)
        stamp = f"@{scenario.time_of(i)} +0000"
        env = dict(base_env, GIT_AUTHOR_DATE=stamp, GIT_COMMITTER_DATE=stamp)
        _git(repo, "commit", "-q", "--allow-empty", "-m", f"{edit.message} [{edit.kind}]", env=env)
        hashes.append(_git(repo, "rev-parse", "HEAD", env=base_env).strip())
    return hashes


def write_fixture(scenario: Scenario, directory: str | Path) -> dict[str, Path]:
    """Materialise a scenario as ``repo/``, ``coverage.json`` and ``truth.tsv``."""
    directory = Path(directory)
    hashes = materialise(scenario, directory / "repo")
    write_coverage(scenario.coverage, directory / "coverage.json")
    truth = directory / "truth.tsv"
    rows = [
        "bug_id\tbic_hash\tcomment_only_hash\tn_commits",
        f"seed{scenario.seed}\t{hashes[scenario.bic]}\t"
        f"{hashes[scenario.comment_commit] if scenario.comment_commit is not None else '-'}\t{len(hashes)}",
    ]
    truth.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return {"repo": directory / "repo", "coverage": directory / "coverage.json", "truth": truth}
