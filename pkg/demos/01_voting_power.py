"""Rank-based voting and depth decay on a hand-sized example.

Run: python demos/01_voting_power.py
"""

# %%
from culprit import CommitId, ElementId, EvolveRelation, VotingConfig, score_all
from culprit.scoring import rank_elements, voting_powers

elems = [ElementId("Parser.java", line) for line in (10, 11, 12, 13, 20)]
susp = dict(zip(elems, [1.0, 0.6, 0.6, 0.6, 0.3]))

# %% ranks: ties share the worst rank (max) or the best one without gaps (dense)
for tau in ("max", "dense"):
    ranks = rank_elements(susp, tau)
    print(tau, [ranks[e] for e in elems])

# %% voting power for each setting
for alpha in (0, 1):
    for tau in ("max", "dense"):
        votes = voting_powers(susp, VotingConfig(alpha=alpha, tau=tau))
        print(f"alpha={alpha} tau={tau:5}", " ".join(f"{votes[e]:.2f}" for e in elems))

# %% three commits, newest first. c_old wrote every line; c_mid later touched
# lines 10-13 and c_new only line 20.
c_new, c_mid, c_old = (CommitId(h, t, i) for i, (h, t) in enumerate([("c_new", 300), ("c_mid", 200), ("c_old", 100)]))
evolve = EvolveRelation({
    elems[0]: [c_mid, c_old],
    elems[1]: [c_mid, c_old],
    elems[2]: [c_mid, c_old],
    elems[3]: [c_mid, c_old],
    elems[4]: [c_new, c_old],
})

# %% c_old collects every vote, but each one is decayed by the newer edit above it
table = score_all(VotingConfig(), susp, evolve, {c_new, c_mid, c_old})
for commit, entry in table.ranked():
    print(entry.rank, commit.hash, round(entry.score, 4))

# %% a stronger decay hands the lead to the more recent editor
steep = score_all(VotingConfig(lam=0.3), susp, evolve, {c_new, c_mid, c_old})
print([c.hash for c, _ in steep.ranked()])
