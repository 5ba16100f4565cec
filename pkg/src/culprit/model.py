"""Core value types and the on-disk formats for coverage and change history."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class FormatError(ValueError):
    """An input file does not follow its declared format."""


class ValidationError(ValueError):
    """Input is well formed but violates a semantic precondition."""


class Outcome(enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"


@dataclass(frozen=True)
class TestId:
    __test__ = False  # keep pytest from collecting this

    full_name: str
    outcome: Outcome = Outcome.PASS

    @property
    def failing(self) -> bool:
        return self.outcome is Outcome.FAIL


@dataclass(frozen=True, order=True)
class ElementId:
    """A statement, identified by ``(file, line)``.

    ``enclosing_range`` is carried along for history mining but takes no part in
    equality, hashing or ordering.
    """

    file: str
    line: int
    enclosing_range: tuple[int, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.line < 1:
            raise ValueError(f"line must be >= 1, got {self.line}")
        if self.enclosing_range is not None:
            start, end = self.enclosing_range
            if not start <= self.line <= end:
                raise ValueError(
                    f"{self.file}:{self.line} lies outside enclosing range {start}-{end}"
                )

    def with_range(self, start: int, end: int) -> "ElementId":
        return ElementId(self.file, self.line, (start, end))

    def __str__(self):
        return f"{self.file}:{self.line}"


@dataclass(frozen=True)
class CommitId:
    """A commit. ``order_index`` 0 is the newest commit of the analysed range.

    Identity is the hash alone; ``time`` and ``order_index`` define recency.
    """

    hash: str
    time: int = field(default=0, compare=False)
    order_index: int = field(default=0, compare=False)

    @property
    def recency_key(self) -> tuple[int, int]:
        """Sort key placing newer commits first."""
        return (-self.time, self.order_index)

    def is_newer_than(self, other: "CommitId") -> bool:
        return self.recency_key < other.recency_key

    def __str__(self):
        return self.hash


def newest_first(commits: Iterable[CommitId]) -> list[CommitId]:
    return sorted(commits, key=lambda c: c.recency_key)


@dataclass
class CoverageMatrix:
    tests: list[TestId]
    elements: list[ElementId]
    covered: dict[str, frozenset[ElementId]]

    def __post_init__(self):
        names = [t.full_name for t in self.tests]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate test names: {', '.join(dupes)}")
        if any(not n for n in names):
            raise ValidationError("test names must be non-empty")
        known = set(self.elements)
        name_set = set(names)
        for name, elems in self.covered.items():
            if name not in name_set:
                raise ValidationError(f"coverage recorded for unknown test {name!r}")
            missing = elems - known
            if missing:
                raise ValidationError(
                    f"test {name!r} covers unknown elements: {sorted(map(str, missing))}"
                )

    @classmethod
    def from_coverage(
        cls, tests: Sequence[TestId], covered: Mapping[str, Iterable[ElementId]]
    ) -> "CoverageMatrix":
        cov = {t.full_name: frozenset(covered.get(t.full_name, ())) for t in tests}
        elements = sorted(set().union(*cov.values())) if cov else []
        return cls(list(tests), elements, cov)

    @property
    def failing_tests(self) -> list[TestId]:
        return [t for t in self.tests if t.failing]

    def covers(self, test: TestId | str, element: ElementId) -> bool:
        name = test if isinstance(test, str) else test.full_name
        return element in self.covered.get(name, frozenset())

    def require_failure(self) -> None:
        if not self.failing_tests:
            raise ValidationError("coverage contains no failing test")


def parse_coverage(path: str | Path) -> CoverageMatrix:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return coverage_from_json(data, source=str(path), require_failure=True)


def coverage_from_json(data, source="<json>", require_failure=True) -> CoverageMatrix:
    if not isinstance(data, dict) or not isinstance(data.get("tests"), list):
        raise FormatError(f"{source}: top-level object must have a 'tests' list")
    tests: list[TestId] = []
    covered: dict[str, list[ElementId]] = {}
    for i, entry in enumerate(data["tests"]):
        where = f"{source}: tests[{i}]"
        if not isinstance(entry, dict):
            raise FormatError(f"{where}: expected an object")
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise FormatError(f"{where}.name: expected a non-empty string")
        try:
            outcome = Outcome(entry.get("outcome"))
        except ValueError:
            raise FormatError(
                f"{where}.outcome: expected 'PASS' or 'FAIL', got {entry.get('outcome')!r}"
            ) from None
        if name in covered:
            raise ValidationError(f"{where}.name: duplicate test name {name!r}")
        elems = []
        for j, cell in enumerate(entry.get("covered", [])):
            if not isinstance(cell, dict):
                raise FormatError(f"{where}.covered[{j}]: expected an object")
            file, line = cell.get("file"), cell.get("line")
            if not isinstance(file, str) or not file:
                raise FormatError(f"{where}.covered[{j}].file: expected a non-empty string")
            if not isinstance(line, int) or isinstance(line, bool) or line < 1:
                raise FormatError(f"{where}.covered[{j}].line: expected an integer >= 1")
            elems.append(ElementId(file, line))
        tests.append(TestId(name, outcome))
        covered[name] = elems
    matrix = CoverageMatrix.from_coverage(tests, covered)
    if require_failure:
        matrix.require_failure()
    return matrix


def coverage_to_json(matrix: CoverageMatrix) -> dict:
    return {
        "tests": [
            {
                "name": t.full_name,
                "outcome": t.outcome.value,
                "covered": [
                    {"file": e.file, "line": e.line}
                    for e in sorted(matrix.covered.get(t.full_name, ()))
                ],
            }
            for t in matrix.tests
        ]
    }


def write_coverage(matrix: CoverageMatrix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(coverage_to_json(matrix), indent=1) + "\n", encoding="utf-8")


@dataclass
class EvolveRelation:
    """Per-element commit histories, newest first.

    ``paths`` optionally records the path an element's code had at a given
    commit (keyed by ``(element, commit_hash)``) when the history source knows it.
    """

    history: dict[ElementId, list[CommitId]] = field(default_factory=dict)
    paths: dict[tuple[ElementId, str], str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for elem, commits in self.history.items():
            ordered = newest_first(commits)
            if len({c.hash for c in ordered}) != len(ordered):
                raise ValidationError(f"duplicate commit in history of {elem}")
            for a, b in zip(ordered, ordered[1:]):
                if a.recency_key == b.recency_key:
                    raise ValidationError(
                        f"commits {a.hash} and {b.hash} share time and order index"
                    )
            self.history[elem] = ordered

    def commits_of(self, element: ElementId) -> list[CommitId]:
        return self.history.get(element, [])

    def commits(self) -> set[CommitId]:
        return {c for hist in self.history.values() for c in hist}

    def evolves(self, commit: CommitId, element: ElementId) -> bool:
        return any(c.hash == commit.hash for c in self.history.get(element, ()))

    def path_at(self, element: ElementId, commit: CommitId) -> str:
        return self.paths.get((element, commit.hash), element.file)


EVOLVE_HEADER = ["file", "line", "commit_hash", "epoch_seconds", "order_index"]


def parse_evolve(path: str | Path) -> EvolveRelation:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return EvolveRelation()
    rows = csv.reader(text.splitlines(), delimiter="\t")
    header = next(rows)
    if header != EVOLVE_HEADER:
        raise FormatError(f"{path}: line 1: expected header {'/'.join(EVOLVE_HEADER)}")
    history: dict[ElementId, list[CommitId]] = {}
    commits: dict[str, CommitId] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise FormatError(f"{path}: line {lineno}: expected 5 columns, got {len(row)}")
        file, line, chash, epoch, order = row
        try:
            elem = ElementId(file, int(line))
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: bad line number {line!r}") from None
        if not epoch.strip():
            raise FormatError(f"{path}: line {lineno}: missing epoch_seconds")
        try:
            commit = CommitId(chash, int(epoch), int(order))
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: non-integer epoch or order index") from None
        seen = commits.setdefault(chash, commit)
        if (seen.time, seen.order_index) != (commit.time, commit.order_index):
            raise FormatError(f"{path}: line {lineno}: inconsistent metadata for commit {chash}")
        history.setdefault(elem, []).append(seen)
    return EvolveRelation(history)


def write_evolve(relation: EvolveRelation, path: str | Path) -> None:
    lines = ["\t".join(EVOLVE_HEADER)]
    for elem in sorted(relation.history):
        for c in relation.history[elem]:
            lines.append(f"{elem.file}\t{elem.line}\t{c.hash}\t{c.time}\t{c.order_index}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def class_name_of(path: str) -> str:
    """Simple class name of a source file: ``src/org/a/FieldUtils.java`` -> ``FieldUtils``."""
    return Path(path).name.split(".", 1)[0]


def covered_class_names(matrix: CoverageMatrix) -> set[str]:
    names = set()
    for t in matrix.failing_tests:
        names.update(class_name_of(e.file) for e in matrix.covered.get(t.full_name, ()))
    return names


def select_relevant_tests(all_tests: Sequence[TestId], failing_cover: Iterable[str]) -> list[TestId]:
    """Failing tests plus every test whose full name contains a covered class name."""
    classes = [c for c in set(failing_cover) if c]
    return [
        t for t in all_tests
        if t.failing or any(c in t.full_name for c in classes)
    ]


def restrict_to_tests(matrix: CoverageMatrix, tests: Sequence[TestId]) -> CoverageMatrix:
    keep = {t.full_name for t in tests}
    kept = [t for t in matrix.tests if t.full_name in keep]
    return CoverageMatrix.from_coverage(kept, {t.full_name: matrix.covered[t.full_name] for t in kept})
