"""Rank the commits that may have introduced an observed test failure.

Statement-level fault localisation scores are pushed onto the commits that
shaped those statements, and the resulting commit scores steer a weighted
bisection.
"""

from .bisection import BisectionSession, Verdict, new_session, run  # noqa: F401
from .model import (  # noqa: F401
    CommitId,
    CoverageMatrix,
    ElementId,
    EvolveRelation,
    FormatError,
    Outcome,
    TestId,
    ValidationError,
    parse_coverage,
    parse_evolve,
    select_relevant_tests,
)
from .scoring import CommitScoreTable, Tau, VoteMode, VotingConfig, score_all  # noqa: F401
from .suspiciousness import SuspiciousnessMap, failure_elements, ochiai, ochiai_scores  # noqa: F401

__version__ = "0.1.0"
