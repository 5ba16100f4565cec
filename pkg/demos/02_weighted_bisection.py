"""Weighted against standard bisection.

Run: python demos/02_weighted_bisection.py
"""

# %%
from pathlib import Path

import numpy as np

from culprit.bisection import BisectionSession, simulated_oracle, standard_session
from culprit.evaluation import compare_bisection, random_bisection_scenarios, read_bisection_scenario

root = Path(__file__).resolve().parent.parent
sc = read_bisection_scenario(root / "tests" / "fixtures" / "skewed_scores.tsv")
weights = [sc.scores[c.hash] for c in sc.commits]
bic = [c.hash for c in sc.commits].index(sc.bic)
print("scores, newest first:", weights)
print("BIC at index", bic)


# %% follow the pivots by hand
def trace(session):
    oracle = simulated_oracle(bic)
    while not session.finished:
        p = session.select_pivot()
        verdict = oracle(session.candidates[p], p)
        print(f"  [{session.bad}, {session.good}) pivot {p} -> {verdict.value}")
        session.step(verdict)
    print("  found", session.result.hash, "after", len(session.log), "steps")


print("weighted:")
trace(BisectionSession(list(sc.commits), weights))
print("standard:")
trace(standard_session(sc.commits))

# %% many skewed score distributions over 200-commit histories
results = compare_bisection(random_bisection_scenarios(seed=0, count=200))
saved = np.array([r.saved_full for r in results])
print("mean saving over the full history:", saved.mean())
print("share of scenarios with a saving:", (saved > 0).mean())
print("worst case:", saved.min())
