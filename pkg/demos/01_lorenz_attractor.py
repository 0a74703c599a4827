"""Tour of the dynamical core: integrate the Lorenz system, inspect its
fixed points and local eigen-structure, and measure the Lyapunov spectrum
with the Kaplan-Yorke dimension.

Run:  python demos/01_lorenz_attractor.py
"""

import numpy as np

from attractorlab.dynsys import (
    eigen_directions,
    fixed_points,
    integrate,
    jacobian,
    lorenz_rhs,
    lyapunov_spectrum,
    trajectory_to_csv,
)

# A trajectory on the attractor: start anywhere reasonable, discard the
# transient (50 time units), keep 20 time units of data.
traj = integrate(np.array([1.0, 1.0, 1.0]), n_steps=2000, transient=5000)
print(f"trajectory: {len(traj)} samples, dt={traj.dt}, "
      f"x range [{traj.samples[:, 0].min():.2f}, {traj.samples[:, 0].max():.2f}]")

trajectory_to_csv(traj, "lorenz_demo.csv")
print("wrote lorenz_demo.csv (t,x,y,z)")

# The three unstable fixed points and the local picture around them.
for name, fp in zip(["F+", "F-", "F0"], fixed_points()):
    eigs = np.linalg.eigvals(jacobian(fp))
    print(f"{name} = ({fp[0]:+.4f}, {fp[1]:+.4f}, {fp[2]:+.4f})  "
          f"|rhs| = {np.linalg.norm(lorenz_rhs(fp)):.1e}  "
          f"eigenvalues = {np.round(eigs, 3)}")

dirs = eigen_directions(fixed_points()[2])
print("unit directions at the origin (rows):")
print(np.round(dirs, 4))

# Lyapunov spectrum: 2e5 steps is enough for a quick look; use >= 2e6 for
# quantitative work (the acceptance suite does).
rep = lyapunov_spectrum(n_steps=200_000, seed=0)
l1, l2, l3 = rep.exponents
print(f"Lyapunov exponents ~ ({l1:.3f}, {l2:.3f}, {l3:.3f}); "
      f"sum {l1 + l2 + l3:.3f} (volume contraction -41/3 = {-41 / 3:.3f})")
print(f"Kaplan-Yorke dimension ~ {rep.ky_dimension:.3f}")
print(f"Lyapunov time 1/l1 ~ {1 / l1:.2f} time units")
