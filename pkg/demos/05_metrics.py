"""Ranking metrics and what a random ordering would score.

Run: python demos/05_metrics.py
"""

# %%
import numpy as np

from culprit.evaluation import acc_at_n, mrr, random_baseline

rng = np.random.default_rng(0)
sizes = rng.integers(2, 60, size=100)
# a ranker that is usually right near the top
ranks = np.minimum(sizes, rng.geometric(0.45, size=sizes.size))

# %%
print("MRR", round(mrr(ranks.tolist()), 3))
for n in (1, 3, 5, 10):
    print(f"Acc@{n}", round(acc_at_n(ranks.tolist(), n), 1))

# %% random orderings of the same search spaces
base = random_baseline(sizes.tolist(), ns=(1, 3, 5, 10))
print({k: round(v, 3) for k, v in base.items()})

# %% the random MRR uses each bug's expected rank, (1 + size) / 2
print(mrr(((1 + sizes) / 2).tolist()) == base["mrr"])
