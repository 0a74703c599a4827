"""Model quality measurement.

A trained network is judged on closed-loop (free-run) behavior: how long
the prediction tracks the true trajectory in Lyapunov-time units, and
whether the long-run synthetic attractor reproduces the correlation
dimension of the real one.  A model whose estimated dimension differs from
the reference value by more than 25% counts as a failure; ensembles of
independently trained models turn that into a failure fraction per
sampling strategy and memory mode.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .dynsys import (
    DEFAULT_PARAMS,
    LorenzParams,
    Trajectory,
    integrate,
    lyapunov_spectrum,
)
from .errors import LengthMismatchError
from .lstm import DEFAULT_ARCH, Architecture, MemoryInit, init_memory, step
from .sampling import Strategy, build_strategy, random_attractor_state
from .seeding import derive, model_seed, rng_from
from .training import TrainConfig, TrainedModel, train


def free_run(
    model: TrainedModel,
    ic: np.ndarray,
    memory_init: MemoryInit,
    n_steps: int,
    step_fn=None,
    warmup: np.ndarray | None = None,
) -> Trajectory:
    """Iterate the model closed-loop from an initial condition.

    The initial condition is normalized, fed through the network with each
    output becoming the next input, and the outputs are denormalized.  The
    first sample is the 1-step prediction, at t0 = dt.  `step_fn` replaces
    the network with an arbitrary map on normalized states (used by
    diagnostics, e.g. substituting the true dynamics).

    `warmup` is an optional (m, 3) block of raw states immediately
    preceding `ic` in time; it is fed open-loop first so the memory enters
    the closed loop consistent with the trajectory instead of at its
    initialization value.  A memory-capable model evaluated from a bare
    point otherwise spends its first steps flushing the arbitrary initial
    memory, which measures the initialization transient rather than the
    learned dynamics.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    x0 = model.scaler.normalize(np.asarray(ic, dtype=np.float64))
    if step_fn is not None:
        out = np.empty((n_steps, x0.size))
        x = x0
        for k in range(n_steps):
            x = np.asarray(step_fn(x), dtype=np.float64)
            out[k] = x
        return Trajectory(model.scaler.denormalize(out), dt=model.dt, t0=model.dt)

    mem = init_memory(memory_init, model.arch)
    if warmup is not None and len(warmup):
        for w in model.scaler.normalize(np.asarray(warmup, dtype=np.float64)):
            _, mem = step(model.params, w, mem)
    if len(model.arch.hidden) == 2:
        (w1, u1, b1), (w2, u2, b2) = model.params.layers
        out = _kernels.lstm2_free_run(
            w1, u1, b1, w2, u2, b2, model.params.w_out, model.params.b_out,
            x0, mem.h[0], mem.c[0], mem.h[1], mem.c[1], n_steps,
        )
    else:
        out = np.empty((n_steps, model.arch.n_out))
        x = x0
        for k in range(n_steps):
            x, mem = step(model.params, x, mem)
            out[k] = x
    return Trajectory(model.scaler.denormalize(out), dt=model.dt, t0=model.dt)


def true_continuation(
    ic: np.ndarray,
    n_steps: int,
    p: LorenzParams = DEFAULT_PARAMS,
    dt: float = 0.01,
) -> Trajectory:
    """The exact trajectory a free run from `ic` is compared against
    (first sample one step after the initial condition)."""
    traj = integrate(np.asarray(ic, dtype=np.float64), p, dt=dt, n_steps=n_steps + 1)
    return Trajectory(traj.samples[1:], dt=dt, t0=dt)


def valid_time(
    pred: Trajectory,
    truth: Trajectory,
    lambda1: float,
    threshold: float = 0.4,
) -> float:
    """Prediction horizon in Lyapunov-time units.

    The normalized error E(k) = ||pred_k - truth_k|| / rms(truth) is
    scanned for its first crossing of `threshold`; the corresponding time
    from the prediction start, times lambda1, is returned.  A prediction
    that never crosses scores the full horizon.
    """
    if len(pred) != len(truth):
        raise LengthMismatchError(f"length mismatch: {len(pred)} vs {len(truth)}")
    if pred.dt != truth.dt:
        raise ValueError("prediction and truth must share dt")
    if not lambda1 > 0.0:
        raise ValueError("lambda1 must be positive")
    err = np.linalg.norm(pred.samples - truth.samples, axis=1)
    rms = np.sqrt(np.mean(np.sum(truth.samples**2, axis=1)))
    exceed = np.nonzero(err / rms > threshold)[0]
    t_star = len(pred) * pred.dt if exceed.size == 0 else exceed[0] * pred.dt
    return float(t_star * lambda1)


# ---------------------------------------------------------------------------
# Correlation dimension (Grassberger-Procaccia)


@dataclass(frozen=True)
class D2Estimate:
    d2: float
    degenerate: bool
    log_r: np.ndarray
    log_c: np.ndarray
    fit_lo: int
    fit_hi: int
    n_points: int


def correlation_dimension(
    traj,
    r_grid: np.ndarray | None = None,
    fit_range: tuple[float, float] | None = None,
    n_points: int = 5_000,
    theiler: int = 20,
    r_per_decade: int = 20,
    n_decades: float = 3.0,
    min_pairs: int = 10,
) -> D2Estimate:
    """Correlation-sum scaling exponent of a point cloud.

    The trajectory is subsampled to at most `n_points` states; pairs closer
    than `theiler` original time steps are excluded.  C(r) is accumulated
    on a log-spaced radius grid and d2 is the least-squares slope of
    log C over log r on `fit_range` if given, otherwise on the one-decade
    window where the local slopes are flattest.

    A cloud with (near) zero spatial extent is degenerate: its dimension
    is reported as 0 with the `degenerate` flag set.
    """
    samples = traj.samples if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError("expected an (n, 3) point cloud")
    stride = max(1, len(samples) // n_points)
    pts = np.ascontiguousarray(samples[::stride][:n_points])
    min_sep = int(np.ceil(theiler / stride)) if theiler > 0 else 0

    extent = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if extent < 1e-8:
        k = max(r_per_decade, 2)
        empty = np.full(k, np.nan)
        return D2Estimate(0.0, True, empty, empty, 0, 0, len(pts))

    if r_grid is None:
        n_r = int(round(r_per_decade * n_decades)) + 1
        r_grid = np.logspace(np.log10(extent) - n_decades, np.log10(extent), n_r)
    else:
        r_grid = np.asarray(r_grid, dtype=np.float64)
        if r_grid.ndim != 1 or len(r_grid) < 3 or not (np.diff(r_grid) > 0).all():
            raise ValueError("r_grid must be an increasing 1-D grid")

    counts, total = _kernels.corr_counts(pts, r_grid, min_sep)
    if total == 0 or counts[-1] < min_pairs:
        empty = np.full(len(r_grid), np.nan)
        return D2Estimate(0.0, True, empty, empty, 0, 0, len(pts))
    with np.errstate(divide="ignore"):
        log_c = np.where(counts >= min_pairs, np.log(counts / total), np.nan)
    log_r = np.log(r_grid)

    valid = np.isfinite(log_c)
    if fit_range is not None:
        lo_r, hi_r = fit_range
        window = valid & (r_grid >= lo_r) & (r_grid <= hi_r)
        idx = np.nonzero(window)[0]
        if len(idx) < 2:
            raise ValueError("fit_range selects fewer than 2 usable radii")
        lo, hi = int(idx[0]), int(idx[-1]) + 1
    else:
        lo, hi = _plateau_window(log_r, log_c, valid, width=r_per_decade)

    slope = np.polyfit(log_r[lo:hi], log_c[lo:hi], 1)[0]
    return D2Estimate(float(slope), False, log_r, log_c, lo, hi, len(pts))


def _plateau_window(log_r, log_c, valid, width):
    """Index window (lo, hi) of ~one decade where local slopes vary least."""
    idx = np.nonzero(valid)[0]
    first, last = idx[0], idx[-1] + 1
    n = last - first
    width = min(width + 1, n)
    if n < 3:
        return first, last
    slopes = np.diff(log_c[first:last]) / np.diff(log_r[first:last])
    best_lo, best_score = first, np.inf
    for lo in range(first, last - width + 1):
        s = slopes[lo - first : lo - first + width - 1]
        score = np.var(s)
        if score < best_score:
            best_score = score
            best_lo = lo
    return best_lo, best_lo + width


# ---------------------------------------------------------------------------
# Single-model evaluation and the ensemble runner


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation settings shared by all models of an ensemble.

    `warmup` true states are fed open-loop before the closed-loop run so
    the memory is consistent with the trajectory at the initial condition
    (0 disables the warmup).
    """

    horizon: int = 1_500
    threshold: float = 0.4
    d2_steps: int = 50_000
    d2_spinup: int = 1_000
    d2_points: int = 5_000
    theiler: int = 20
    d_true: float = 2.06
    lambda1: float | None = None
    envelope_steps: int = 500
    warmup: int = 100

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "threshold": self.threshold,
            "d2_steps": self.d2_steps,
            "d2_spinup": self.d2_spinup,
            "d2_points": self.d2_points,
            "theiler": self.theiler,
            "d_true": self.d_true,
            "lambda1": self.lambda1,
            "envelope_steps": self.envelope_steps,
            "warmup": self.warmup,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalConfig":
        return cls(**d)


@dataclass(frozen=True)
class EvalReport:
    valid_time_lyapunov: float
    d2: float
    d2_failure: bool
    free_run_length: int
    ic_in_training: bool
    degenerate: bool = False
    model_seed: int = 0

    def to_dict(self) -> dict:
        return {
            "valid_time_lyapunov": self.valid_time_lyapunov,
            "d2": self.d2,
            "d2_failure": self.d2_failure,
            "free_run_length": self.free_run_length,
            "ic_in_training": self.ic_in_training,
            "degenerate": self.degenerate,
            "model_seed": self.model_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)


def resolve_lambda1(eval_cfg: EvalConfig, n_steps: int = 200_000) -> float:
    """The leading Lyapunov exponent used for time units; measured at
    runtime unless pinned in the config."""
    if eval_cfg.lambda1 is not None:
        return float(eval_cfg.lambda1)
    return lyapunov_spectrum(n_steps=n_steps, seed=0).exponents[0]


def evaluate_model(
    model: TrainedModel,
    ic: np.ndarray,
    memory_init: MemoryInit,
    eval_cfg: EvalConfig,
    p: LorenzParams = DEFAULT_PARAMS,
    ic_in_training: bool = False,
    model_seed_value: int = 0,
    warmup_seq: np.ndarray | None = None,
):
    """Free-run a model from `ic` and score it.

    `warmup_seq` holds the true states immediately preceding `ic`
    (typically eval_cfg.warmup of them); when omitted the closed loop
    starts cold from the initialized memory.  Returns (EvalReport,
    envelope_prefix) where the prefix is the first `envelope_steps`
    denormalized predictions, for ensemble statistics.  eval_cfg.lambda1
    must already be resolved.
    """
    if eval_cfg.lambda1 is None:
        raise ValueError("resolve lambda1 before evaluating (see resolve_lambda1)")
    total = max(eval_cfg.horizon, eval_cfg.d2_spinup + eval_cfg.d2_steps)
    pred = free_run(model, ic, memory_init, total, warmup=warmup_seq)
    truth = true_continuation(ic, eval_cfg.horizon, p, model.dt)
    head = Trajectory(pred.samples[: eval_cfg.horizon], dt=model.dt, t0=model.dt)
    vt = valid_time(head, truth, eval_cfg.lambda1, eval_cfg.threshold)
    cloud = pred.samples[eval_cfg.d2_spinup : eval_cfg.d2_spinup + eval_cfg.d2_steps]
    est = correlation_dimension(cloud, n_points=eval_cfg.d2_points, theiler=eval_cfg.theiler)
    failure = abs(est.d2 - eval_cfg.d_true) / eval_cfg.d_true > 0.25
    report = EvalReport(
        valid_time_lyapunov=vt,
        d2=est.d2,
        d2_failure=bool(failure),
        free_run_length=eval_cfg.d2_steps,
        ic_in_training=ic_in_training,
        degenerate=est.degenerate,
        model_seed=model_seed_value,
    )
    return report, pred.samples[: eval_cfg.envelope_steps].copy()


@dataclass(eq=False)
class EnsembleReport:
    strategy: str
    memory_mode: str
    reports: list[EvalReport]
    failure_fraction: float
    seeds: list[int]
    lambda1: float
    d_true: float
    d2_hist_edges: np.ndarray
    d2_hist_counts: np.ndarray
    envelope_t: np.ndarray
    envelope_mean: np.ndarray
    envelope_std: np.ndarray
    failed: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "memory_mode": self.memory_mode,
            "reports": [r.to_dict() for r in self.reports],
            "failure_fraction": self.failure_fraction,
            "seeds": self.seeds,
            "lambda1": self.lambda1,
            "d_true": self.d_true,
            "d2_hist_edges": self.d2_hist_edges.tolist(),
            "d2_hist_counts": self.d2_hist_counts.tolist(),
            "failed": self.failed,
        }


D2_HIST_EDGES = np.linspace(0.0, 3.0, 31)


def run_ensemble(
    strategy: Strategy | str,
    memory_mode: str = "zero",
    n_models: int = 20,
    cfg: TrainConfig | None = None,
    eval_cfg: EvalConfig | None = None,
    p: LorenzParams = DEFAULT_PARAMS,
    dt: float = 0.01,
    data_seed: int = 1_000,
    seed_root: int = 0,
    seeds: list[int] | None = None,
    arch: Architecture = DEFAULT_ARCH,
    workers: int = 1,
) -> EnsembleReport:
    """Train and evaluate an ensemble on one strategy / memory-mode cell.

    All models share the same dataset (built once from `data_seed`) and the
    same held-out initial condition; they differ only in their derived
    seeds (parameter init, shuffling, memory draws).  Models are reported
    in id order whatever the scheduling, and a fixed seed list reproduces
    the report exactly.  Models whose training overflows are recorded under
    `failed` instead of aborting the run.
    """
    if n_models < 1:
        raise ValueError("n_models must be >= 1")
    strategy = Strategy(strategy)
    cfg = cfg if cfg is not None else TrainConfig()
    eval_cfg = eval_cfg if eval_cfg is not None else EvalConfig()
    if eval_cfg.lambda1 is None:
        eval_cfg = replace(eval_cfg, lambda1=resolve_lambda1(eval_cfg))
    if seeds is None:
        seeds = [model_seed(seed_root, i) for i in range(n_models)]
    elif len(seeds) != n_models:
        raise ValueError("need exactly one seed per model")

    ds = build_strategy(strategy, p, dt, seed=data_seed)
    # held-out trajectory from a stream disjoint from all model seeds; the
    # evaluation IC sits eval_cfg.warmup states in so the preceding truth
    # can prime the memory
    held_out_start = random_attractor_state(p, dt, rng=rng_from(derive(data_seed, 0xE7A1)))
    lead_in = integrate(held_out_start, p, dt=dt, n_steps=eval_cfg.warmup + 1)
    warmup_seq = lead_in.samples[: eval_cfg.warmup]
    ic = lead_in.samples[eval_cfg.warmup]

    payloads = [
        (ds, cfg, arch, eval_cfg, p, ic, warmup_seq, memory_mode, int(s)) for s in seeds
    ]
    if workers > 1:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_train_eval_job, payloads))
    else:
        outcomes = [_train_eval_job(pl) for pl in payloads]

    reports: list[EvalReport] = []
    envelopes = []
    failed = []
    for i, (ok, result) in enumerate(outcomes):
        if ok:
            report, env = result
            reports.append(report)
            envelopes.append(env)
        else:
            failed.append({"model": i, "seed": int(seeds[i]), "error": result})

    if reports:
        failure_fraction = sum(r.d2_failure for r in reports) / len(reports)
        counts, _ = np.histogram([r.d2 for r in reports], bins=D2_HIST_EDGES)
        env = np.stack(envelopes)
        env_mean = env.mean(axis=0)
        env_std = env.std(axis=0)
        env_t = dt * (1 + np.arange(env.shape[1]))
    else:
        failure_fraction = float("nan")
        counts = np.zeros(len(D2_HIST_EDGES) - 1, dtype=int)
        env_mean = np.zeros((0, 3))
        env_std = np.zeros((0, 3))
        env_t = np.zeros(0)

    return EnsembleReport(
        strategy=strategy.value,
        memory_mode=memory_mode,
        reports=reports,
        failure_fraction=float(failure_fraction),
        seeds=[int(s) for s in seeds],
        lambda1=float(eval_cfg.lambda1),
        d_true=eval_cfg.d_true,
        d2_hist_edges=D2_HIST_EDGES.copy(),
        d2_hist_counts=counts,
        envelope_t=env_t,
        envelope_mean=env_mean,
        envelope_std=env_std,
        failed=failed,
    )


def _train_eval_job(payload):
    """One ensemble member: train, free-run, score.  Never raises."""
    ds, cfg, arch, eval_cfg, p, ic, warmup_seq, memory_mode, seed = payload
    try:
        model_cfg = replace(
            cfg,
            param_seed=derive(seed, 1),
            shuffle_seed=derive(seed, 2),
            memory_init=MemoryInit(memory_mode, derive(seed, 3)),
        )
        model = train(ds, model_cfg, arch=arch)
        eval_memory = MemoryInit(memory_mode, derive(seed, 4))
        report, env = evaluate_model(
            model, ic, eval_memory, eval_cfg, p,
            ic_in_training=False, model_seed_value=seed, warmup_seq=warmup_seq,
        )
        return True, (report, env)
    except (ArithmeticError, ValueError) as exc:  # NonFinite and friends
        return False, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# Report persistence: JSON for the aggregate, CSV for per-model rows and
# the prediction envelope.


def save_ensemble_report(report: EnsembleReport, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(directory / "models.csv", "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model_id", "seed", "strategy", "memory", "d2", "valid_time", "failure"])
        for i, r in enumerate(report.reports):
            writer.writerow([
                i, r.model_seed, report.strategy, report.memory_mode,
                f"{r.d2:.17g}", f"{r.valid_time_lyapunov:.17g}", int(r.d2_failure),
            ])
    with open(directory / "envelope.csv", "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "mean_x", "std_x", "mean_y", "std_y", "mean_z", "std_z"])
        for t, m, s in zip(report.envelope_t, report.envelope_mean, report.envelope_std):
            writer.writerow(
                [f"{t:.17g}"]
                + [f"{v:.17g}" for pair in zip(m, s) for v in pair]
            )
    return directory


def load_ensemble_report(directory) -> EnsembleReport:
    directory = Path(directory)
    with open(directory / "report.json", encoding="utf-8") as fh:
        d = json.load(fh)
    env = np.loadtxt(directory / "envelope.csv", delimiter=",", skiprows=1, ndmin=2)
    if env.size == 0:
        env = np.zeros((0, 7))
    return EnsembleReport(
        strategy=d["strategy"],
        memory_mode=d["memory_mode"],
        reports=[EvalReport.from_dict(r) for r in d["reports"]],
        failure_fraction=d["failure_fraction"],
        seeds=d["seeds"],
        lambda1=d["lambda1"],
        d_true=d["d_true"],
        d2_hist_edges=np.array(d["d2_hist_edges"]),
        d2_hist_counts=np.array(d["d2_hist_counts"]),
        envelope_t=env[:, 0],
        envelope_mean=env[:, 1::2],
        envelope_std=env[:, 2::2],
        failed=d["failed"],
    )
