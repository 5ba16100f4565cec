"""Generate a small repository with a seeded bug and find the commit that introduced it.

Run: python demos/04_end_to_end.py
"""

# %%
import tempfile
from pathlib import Path

from culprit.bisection import new_session, run, simulated_oracle
from culprit.evaluation import ScenarioParams, generate_scenario, materialise
from culprit.pipeline import reduce, relevant_matrix, score
from culprit.scoring import VotingConfig
from culprit.suspiciousness import ochiai_scores

scenario = generate_scenario(seed=7, params=ScenarioParams(n_commits=40))
workdir = Path(tempfile.mkdtemp(prefix="culprit-demo-"))
hashes = materialise(scenario, workdir / "repo")
print("repository:", workdir / "repo")
print("bug introduced by commit", scenario.bic, hashes[scenario.bic][:10])
print("comment-only commit", scenario.comment_commit, hashes[scenario.comment_commit][:10])

# %% stage 1 and 2: commits that touched failure-covered code, minus cosmetic ones
matrix = relevant_matrix(scenario.coverage)
red = reduce(workdir / "repo", matrix)
print(f"{len(red.all_commits)} commits -> {len(red.c_f)} touch covered code -> {len(red.c_bic)} candidates")
print("filtered as cosmetic:", [c.hash[:10] for c in red.c_sp])

# %% stage 3: score the candidates
table = score(red, ochiai_scores(matrix), VotingConfig())
for commit, entry in table.ranked()[:5]:
    mark = "  <- bug" if commit.hash == hashes[scenario.bic] else ""
    print(entry.rank, commit.hash[:10], f"{entry.score:.4f}{mark}")

# %% bisect using the scores as weights
session = new_session(table, red.all_commits)
index = [c.hash for c in session.candidates].index(hashes[scenario.bic])
found, steps = run(session, simulated_oracle(index))
print("bisection found", found.hash[:10], "in", steps, "steps over", len(session.candidates), "candidates")
