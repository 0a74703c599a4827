"""Map trained models into 2-D by t-SNE of their 31,153 flattened weights,
then summarize the cloud with a radial distribution around its barycenter.

Trains 16 small models (~2 minutes).  Run: python demos/05_parameter_map.py
"""

import numpy as np

from attractorlab.analysis import (
    embedding_to_csv,
    radial_distribution,
    tsne,
)
from attractorlab.lstm import MemoryInit
from attractorlab.sampling import build_ergodic, build_short, build_split
from attractorlab.training import TrainConfig, train

# 8 models on the ergodic data and 8 on the split data, differing only in
# their seeds.  Short training keeps the demo quick; the parameter clouds
# are already distinguishable.
ergodic = build_ergodic(seed=42)
datasets = {"ergodic": build_short(ergodic), "split": build_split(ergodic, seed=7)}

vectors, strategies = [], []
for name, ds in datasets.items():
    for seed in range(8):
        cfg = TrainConfig(epochs=8, param_seed=seed, shuffle_seed=seed + 100,
                          memory_init=MemoryInit("zero", seed + 200))
        model = train(ds, cfg)
        vectors.append(model.params.flatten())
        strategies.append(name)
        print(f"{name} seed {seed}: loss {min(model.history):.2e}")

points = tsne(np.array(vectors), perplexity=5, n_iter=600, seed=0,
              strategies=strategies)
embedding_to_csv(points, "parameter_map.csv")
print("wrote parameter_map.csv (model_id,strategy,gamma1,gamma2,d2_error)")

rd = radial_distribution(points, n_bins=8, n_tiers=2)
for strategy in rd.strategies:
    hist = rd.counts[strategy].sum(axis=0)
    print(f"{strategy:8s} radial counts {hist.tolist()} "
          f"(mass within median radius: {rd.mass_within_median_radius(strategy):.2f})")
