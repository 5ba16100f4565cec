"""Statement-level suspiciousness: Ochiai from coverage, or external scores."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import CoverageMatrix, ElementId, FormatError, ValidationError


class ScoreSource(enum.Enum):
    SBFL_OCHIAI = "ochiai"
    EXTERNAL = "external"


@dataclass
class SuspiciousnessMap:
    scores: dict[ElementId, float] = field(default_factory=dict)
    source: ScoreSource = ScoreSource.SBFL_OCHIAI

    def __post_init__(self):
        for e, s in self.scores.items():
            if not s >= 0:
                raise ValidationError(f"negative or NaN suspiciousness {s} for {e}")

    def __getitem__(self, element: ElementId) -> float:
        return self.scores.get(element, 0.0)

    def restricted(self, elements) -> dict[ElementId, float]:
        """Scores over ``elements``; elements without a score get 0."""
        return {e: self.scores.get(e, 0.0) for e in elements}


def failure_elements(matrix: CoverageMatrix) -> set[ElementId]:
    """E_F: every element covered by at least one failing test."""
    failing = matrix.failing_tests
    if not failing:
        raise ValidationError("no failing tests: E_F is undefined")
    return set().union(*(matrix.covered[t.full_name] for t in failing))


def _counts(matrix: CoverageMatrix) -> tuple[np.ndarray, np.ndarray, int]:
    index = {e: i for i, e in enumerate(matrix.elements)}
    cover = np.zeros((len(matrix.tests), len(matrix.elements)), dtype=bool)
    for r, t in enumerate(matrix.tests):
        for e in matrix.covered.get(t.full_name, ()):
            cover[r, index[e]] = True
    fail = np.array([t.failing for t in matrix.tests], dtype=bool)
    return cover[fail].sum(axis=0), cover.sum(axis=0), int(fail.sum())


def ochiai(matrix: CoverageMatrix, element: ElementId) -> float:
    n_fail = len(matrix.failing_tests)
    ef = sum(1 for t in matrix.failing_tests if matrix.covers(t, element))
    n_cov = sum(1 for t in matrix.tests if matrix.covers(t, element))
    if ef == 0 or n_cov == 0:
        return 0.0
    return ef / math.sqrt(n_fail * n_cov)


def ochiai_scores(matrix: CoverageMatrix) -> SuspiciousnessMap:
    """Ochiai for every element of the matrix, vectorised."""
    ef, n_cov, n_fail = _counts(matrix)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(ef > 0, ef / np.sqrt(n_fail * np.maximum(n_cov, 1)), 0.0)
    return SuspiciousnessMap(
        {e: float(s) for e, s in zip(matrix.elements, scores)}, ScoreSource.SBFL_OCHIAI
    )


def load_external_scores(path: str | Path, shift_to_zero: bool = False) -> SuspiciousnessMap:
    """Read ``file<TAB>line<TAB>score`` rows (no header).

    With ``shift_to_zero`` a negative minimum is shifted up to 0.
    """
    path = Path(path)
    scores: dict[ElementId, float] = {}
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise FormatError(f"{path}: line {lineno}: expected 3 columns, got {len(row)}")
            try:
                elem = ElementId(row[0], int(row[1]))
                score = float(row[2])
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
            if not math.isfinite(score):
                raise FormatError(f"{path}: line {lineno}: non-finite score")
            scores[elem] = score
    if scores and shift_to_zero:
        low = min(scores.values())
        if low < 0:
            scores = {e: s - low for e, s in scores.items()}
    negative = [e for e, s in scores.items() if s < 0]
    if negative:
        raise ValidationError(
            f"{path}: negative scores (e.g. {negative[0]}); use shift_to_zero to normalise"
        )
    return SuspiciousnessMap(scores, ScoreSource.EXTERNAL)


def write_external_scores(smap: SuspiciousnessMap, path: str | Path) -> None:
    lines = [f"{e.file}\t{e.line}\t{smap.scores[e]!r}" for e in sorted(smap.scores)]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
