"""Lorenz'63 dynamics.

Exact right-hand side, classical RK4 integration at a fixed step, the three
unstable fixed points with their local eigen-structure, and a Benettin-type
Lyapunov spectrum with the Kaplan-Yorke dimension.

States are plain float64 arrays ``(x, y, z)``; trajectories wrap a uniform
(n, 3) sample block together with the step ``dt`` and start time ``t0``.
All numerics in this module are 64-bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EigenFailureError, NonFiniteError, RhoTooSmallError
from .seeding import rng_from

DEFAULT_DT = 0.01
# 50 time units discarded before a state counts as "on the attractor".
DEFAULT_TRANSIENT = 5000

# Empirical bounding box of the attractor for the default parameters,
# with margin, taken from a long reference run.
ATTRACTOR_BOUNDS = np.array([[-25.0, 25.0], [-35.0, 35.0], [0.0, 55.0]])


@dataclass(frozen=True)
class LorenzParams:
    """System constants; defaults are the classical chaotic regime."""

    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    def __post_init__(self):
        if not (self.sigma > 0.0 and self.rho > 0.0 and self.beta > 0.0):
            raise ValueError("sigma, rho and beta must all be strictly positive")


DEFAULT_PARAMS = LorenzParams()


@dataclass(eq=False)
class Trajectory:
    """Uniformly sampled orbit segment: sample k sits at time t0 + k*dt."""

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[1] != 3:
            raise ValueError("samples must have shape (n, 3)")
        if len(self.samples) == 0:
            raise ValueError("trajectory must contain at least one sample")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))


@dataclass(frozen=True)
class LyapunovReport:
    """Lyapunov exponents (descending, units 1/time) and derived quantities."""

    exponents: tuple[float, float, float]
    ky_dimension: float
    n_steps: int


def lorenz_rhs(s: np.ndarray, p: LorenzParams = DEFAULT_PARAMS) -> np.ndarray:
    """Time derivative (sigma*(y-x), rho*x - y - x*z, x*y - beta*z)."""
    x, y, z = float(s[0]), float(s[1]), float(s[2])
    return np.array([
        p.sigma * (y - x),
        p.rho * x - y - x * z,
        x * y - p.beta * z,
    ])


def rk4_step(s: np.ndarray, p: LorenzParams = DEFAULT_PARAMS, dt: float = DEFAULT_DT) -> np.ndarray:
    """One classical 4-stage Runge-Kutta step of size dt."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    x, y, z = _kernels._rk4_point(
        float(s[0]), float(s[1]), float(s[2]), p.sigma, p.rho, p.beta, dt
    )
    return np.array([x, y, z])


def integrate(
    s0: np.ndarray,
    p: LorenzParams = DEFAULT_PARAMS,
    dt: float = DEFAULT_DT,
    n_steps: int = 1,
    transient: int = 0,
) -> Trajectory:
    """Integrate from s0, discard `transient` steps, record `n_steps` states.

    The first recorded sample is the state reached after `transient` steps
    (s0 itself when transient == 0), at time t0 = transient * dt.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if transient < 0:
        raise ValueError("transient must be >= 0")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    s0 = np.asarray(s0, dtype=np.float64)
    samples = _kernels.lorenz_path(s0, p.sigma, p.rho, p.beta, dt, transient, n_steps)
    if not np.isfinite(samples).all():
        raise NonFiniteError("integration overflowed; state left the finite range")
    return Trajectory(samples, dt=dt, t0=transient * dt)


def fixed_points(p: LorenzParams = DEFAULT_PARAMS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three fixed points (F+, F-, F0); F+/- exist only for rho > 1."""
    if p.rho <= 1.0:
        raise RhoTooSmallError("rho must exceed 1 for the off-origin fixed points")
    a = np.sqrt(p.beta * (p.rho - 1.0))
    f_plus = np.array([a, a, p.rho - 1.0])
    f_minus = np.array([-a, -a, p.rho - 1.0])
    f_zero = np.zeros(3)
    return f_plus, f_minus, f_zero


def jacobian(s: np.ndarray, p: LorenzParams = DEFAULT_PARAMS) -> np.ndarray:
    x, y, z = float(s[0]), float(s[1]), float(s[2])
    return np.array([
        [-p.sigma, p.sigma, 0.0],
        [p.rho - z, -1.0, -x],
        [y, x, -p.beta],
    ])


def eigen_directions(fp: np.ndarray, p: LorenzParams = DEFAULT_PARAMS) -> np.ndarray:
    """Three unit-norm real directions spanning the local eigen-structure.

    Rows are the directions, ordered by descending real part of the
    associated eigenvalue.  A complex-conjugate pair contributes the real
    and imaginary parts of one of its eigenvectors (these span the same
    invariant plane).  If the resulting set is numerically dependent, an
    orthonormalized basis of the eigenvector set is returned instead.
    """
    try:
        eigvals, eigvecs = np.linalg.eig(jacobian(fp, p))
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError(f"eigendecomposition failed at {fp!r}") from exc

    directions = []
    used = set()
    order = np.argsort(-eigvals.real, kind="stable")
    for idx in order:
        if idx in used:
            continue
        lam = eigvals[idx]
        if abs(lam.imag) <= 1e-12 * max(1.0, abs(lam.real)):
            directions.append(eigvecs[:, idx].real)
            used.add(idx)
        else:
            # conjugate partner: closest eigenvalue to lam.conj()
            partner = min(
                (j for j in range(3) if j != idx and j not in used),
                key=lambda j: abs(eigvals[j] - lam.conjugate()),
            )
            vec = eigvecs[:, idx] if lam.imag > 0 else eigvecs[:, partner]
            directions.append(vec.real)
            directions.append(vec.imag)
            used.add(idx)
            used.add(partner)
        if len(directions) >= 3:
            break

    dirs = np.array(directions[:3])
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(norms < 1e-12):
        dirs = _orthonormal_fallback(eigvecs)
    else:
        dirs = dirs / norms[:, None]
        if abs(np.linalg.det(dirs)) < 1e-10:
            dirs = _orthonormal_fallback(eigvecs)
    # sign convention: largest-magnitude component positive
    for i in range(3):
        k = np.argmax(np.abs(dirs[i]))
        if dirs[i, k] < 0:
            dirs[i] = -dirs[i]
    return dirs


def _orthonormal_fallback(eigvecs: np.ndarray) -> np.ndarray:
    basis = np.column_stack([eigvecs.real, eigvecs.imag, np.eye(3)])
    q, r = np.linalg.qr(basis)
    return q[:, :3].T.copy()


def kaplan_yorke_dimension(exponents) -> float:
    """Dimension estimate from a descending exponent spectrum.

    Largest j with a non-negative partial sum, plus the interpolated
    fraction into the next exponent; for a 3-D chaotic flow this is
    2 + (l1 + l2) / |l3|.
    """
    lams = np.sort(np.asarray(exponents, dtype=np.float64))[::-1]
    csum = np.cumsum(lams)
    nonneg = np.nonzero(csum >= 0.0)[0]
    if len(nonneg) == 0:
        return 0.0
    j = int(nonneg[-1]) + 1
    if j >= len(lams):
        return float(len(lams))
    return j + float(csum[j - 1] / abs(lams[j]))


def lyapunov_spectrum(
    p: LorenzParams = DEFAULT_PARAMS,
    dt: float = DEFAULT_DT,
    n_steps: int = 2_000_000,
    seed: int = 0,
    renorm_every: int = 10,
    transient: int = DEFAULT_TRANSIENT,
) -> LyapunovReport:
    """Full Lyapunov spectrum via tangent-space QR averaging.

    The initial condition is drawn from the attractor bounding box with the
    given seed and relaxed for `transient` steps first.  Exponents converge
    slowly; n_steps >= 1e6 at dt = 0.01 is recommended for quantitative use.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng = rng_from(seed)
    ic = rng.uniform(ATTRACTOR_BOUNDS[:, 0], ATTRACTOR_BOUNDS[:, 1])
    start = _kernels.lorenz_path(ic, p.sigma, p.rho, p.beta, dt, transient, 1)[0]
    sums, final = _kernels.lorenz_lyapunov_sums(
        start, p.sigma, p.rho, p.beta, dt, n_steps, renorm_every
    )
    if not (np.isfinite(sums).all() and np.isfinite(final).all()):
        raise NonFiniteError("tangent integration overflowed")
    exps = np.sort(sums / (n_steps * dt))[::-1]
    return LyapunovReport(
        exponents=(float(exps[0]), float(exps[1]), float(exps[2])),
        ky_dimension=kaplan_yorke_dimension(exps),
        n_steps=n_steps,
    )


# ---------------------------------------------------------------------------
# Trajectory serialization: CSV with a t,x,y,z header, and a binary format
# (magic "ATLB", u16 version, little-endian float64 payload).

_MAGIC = b"ATLB"
_VERSION = 1
_HEADER = struct.Struct("<4sHQdd")  # magic, version, n_samples, dt, t0


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write t,x,y,z rows with 17 significant digits (exact roundtrip)."""
    times = traj.times
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t,x,y,z\n")
        for t, (x, y, z) in zip(times, traj.samples):
            fh.write(f"{t:.17g},{x:.17g},{y:.17g},{z:.17g}\n")


def trajectory_from_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    if data.shape[0] < 2:
        raise ValueError("need at least two rows to recover dt from the t column")
    dt = float(data[1, 0] - data[0, 0])
    return Trajectory(data[:, 1:4], dt=dt, t0=float(data[0, 0]))


def trajectory_to_binary(traj: Trajectory, path) -> None:
    payload = np.ascontiguousarray(traj.samples, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, len(traj), traj.dt, traj.t0))
        fh.write(payload.tobytes())


def trajectory_from_binary(path) -> Trajectory:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError("truncated trajectory file")
        magic, version, n, dt, t0 = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}; not a trajectory file")
        if version != _VERSION:
            raise ValueError(f"unsupported trajectory format version {version}")
        raw = fh.read(n * 3 * 8)
    if len(raw) != n * 3 * 8:
        raise ValueError("truncated trajectory payload")
    samples = np.frombuffer(raw, dtype="<f8").reshape(n, 3).astype(np.float64)
    return Trajectory(samples, dt=dt, t0=t0)
