"""Correlation-dimension estimation on clouds of known dimension and on a
model's synthetic attractor.

Takes ~2 minutes (trains one model).  Run: python demos/04_dimension_diagnostics.py
"""

import numpy as np

from attractorlab.dynsys import integrate
from attractorlab.evaluate import correlation_dimension, free_run
from attractorlab.lstm import MemoryInit
from attractorlab.sampling import build_ergodic
from attractorlab.training import TrainConfig, train

rng = np.random.default_rng(0)

# Sanity fixtures: sets whose dimension we know exactly.
segment = np.outer(rng.uniform(0, 10, 10_000), [1.0, 0.0, 0.0])
square = np.zeros((10_000, 3))
square[:, :2] = rng.uniform(0, 10, (10_000, 2))
print(f"segment       d2 = {correlation_dimension(segment, theiler=0).d2:.3f}  (true 1)")
print(f"square        d2 = {correlation_dimension(square, theiler=0).d2:.3f}  (true 2)")

# The real attractor, from a long integration.
traj = integrate(np.ones(3), n_steps=50_000, transient=5000)
est = correlation_dimension(traj, theiler=20)
print(f"true attractor d2 = {est.d2:.3f}  (Kaplan-Yorke reference 2.06)")

# A trained model's synthetic attractor: free-run 50k steps and measure
# the dimension of what the network actually generates.
ds = build_ergodic(seed=42)
model = train(ds, TrainConfig(epochs=60, param_seed=3, shuffle_seed=4,
                              memory_init=MemoryInit("zero", 5)))
pred = free_run(model, traj.samples[0], MemoryInit("zero"), 51_000)
cloud = pred.samples[1_000:]
est = correlation_dimension(cloud, theiler=20)
flag = " (degenerate!)" if est.degenerate else ""
err = abs(est.d2 - 2.06) / 2.06
print(f"model free-run d2 = {est.d2:.3f}{flag}  relative error {err:.1%} "
      f"-> {'failure' if err > 0.25 else 'acceptable'} at the 25% threshold")
