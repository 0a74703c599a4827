"""Parameter-space diagnostics.

Flattened parameter vectors of trained models are compared across sampling
strategies with an exact (quadratic) t-SNE embedding, the radial
distribution of the embedded cloud around its barycenter, and histograms
of the estimated correlation dimension per strategy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import PerplexityInfeasibleError
from .seeding import rng_from

_P_FLOOR = 1e-12


@dataclass(frozen=True)
class EmbeddingPoint:
    gamma1: float
    gamma2: float
    model_id: int
    strategy: str = ""
    d2_error: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "strategy": self.strategy,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "d2_error": self.d2_error,
        }


@dataclass(eq=False)
class TsneResult:
    embedding: np.ndarray
    kl_history: list[tuple[int, float]]


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _conditional_probabilities(sq_dists: np.ndarray, perplexity: float, max_iter: int = 100):
    """Per-point Gaussian affinities with bandwidth solved by bisection so
    each row's entropy matches log(perplexity)."""
    n = sq_dists.shape[0]
    target = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        d = np.delete(sq_dists[i], i)
        beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
        row = np.exp(-d * beta)
        for _ in range(max_iter):
            total = row.sum()
            if total <= 0.0:
                entropy = 0.0
            else:
                q = row / total
                nz = q > 0
                entropy = -np.sum(q[nz] * np.log(q[nz]))
            diff = entropy - target
            if abs(diff) < 1e-7:
                break
            if diff > 0:  # too spread out: sharpen
                beta_lo = beta
                beta = beta * 2.0 if np.isinf(beta_hi) else 0.5 * (beta + beta_hi)
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else 0.5 * (beta + beta_lo)
            row = np.exp(-d * beta)
        total = row.sum()
        if total <= 0.0:
            raise PerplexityInfeasibleError(
                f"cannot bracket a bandwidth for point {i}; degenerate distances"
            )
        p[i, np.arange(n) != i] = row / total
    return p


def tsne_embed(
    x: np.ndarray,
    perplexity: float = 15.0,
    n_iter: int = 1_000,
    seed: int = 0,
    learning_rate: float = 100.0,
    early_exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    momentum_start: float = 0.5,
    momentum_final: float = 0.8,
    init: np.ndarray | None = None,
    kl_every: int = 50,
) -> TsneResult:
    """Exact 2-D t-SNE of a point set.

    Gaussian input affinities are matched to the target perplexity by
    bisection, symmetrized, and the Student-t embedding is optimized by
    momentum gradient descent with per-coordinate gains and an early
    exaggeration phase.  Deterministic for a fixed seed (or explicit init).
    The KL divergence is recorded every `kl_every` iterations after the
    exaggeration phase ends.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an (n, d) matrix of vectors")
    n = x.shape[0]
    if n < 10:
        raise PerplexityInfeasibleError("need at least 10 points")
    if not 5.0 <= perplexity <= (n - 1) / 3.0:
        raise PerplexityInfeasibleError(
            f"perplexity {perplexity} outside [5, (n-1)/3] for n={n}"
        )

    # canonical internal row order (raw-byte lexicographic): the embedding
    # is a function of the point set, so permuting the input permutes the
    # output bit-exactly instead of perturbing reduction order
    order = sorted(range(n), key=lambda i: x[i].tobytes())
    x = x[order]
    if init is not None:
        init = np.asarray(init, dtype=np.float64)
        if init.shape != (n, 2):
            raise ValueError("init must have shape (n, 2)")
        init = init[order]

    cond = _conditional_probabilities(_pairwise_sq_dists(x), perplexity)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, _P_FLOOR)

    if init is not None:
        y = init.copy()
    else:
        y = rng_from(seed).normal(scale=1e-4, size=(n, 2))

    update = np.zeros_like(y)
    gains = np.ones_like(y)
    kl_history: list[tuple[int, float]] = []

    p_run = p * early_exaggeration
    for it in range(n_iter):
        if it == exaggeration_iters:
            p_run = p
        num = 1.0 / (1.0 + _pairwise_sq_dists(y))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), _P_FLOOR)

        pq = (p_run - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)

        momentum = momentum_start if it < exaggeration_iters else momentum_final
        flip = (grad * update) > 0.0
        gains[flip] *= 0.8
        gains[~flip] += 0.2
        np.clip(gains, 0.01, None, out=gains)
        update = momentum * update - learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)

        post_phase = it >= exaggeration_iters
        if post_phase and ((it - exaggeration_iters) % kl_every == 0 or it == n_iter - 1):
            kl = float(np.sum(p * np.log(p / q)))
            kl_history.append((it, kl))

    out = np.empty_like(y)
    out[order] = y
    return TsneResult(embedding=out, kl_history=kl_history)


def tsne(
    vectors,
    perplexity: float = 15.0,
    n_iter: int = 1_000,
    seed: int = 0,
    model_ids=None,
    strategies=None,
    d2_errors=None,
    **kwargs,
) -> list[EmbeddingPoint]:
    """Embed flattened model-parameter vectors; metadata rides along."""
    x = np.asarray(vectors, dtype=np.float64)
    result = tsne_embed(x, perplexity=perplexity, n_iter=n_iter, seed=seed, **kwargs)
    n = x.shape[0]
    model_ids = list(model_ids) if model_ids is not None else list(range(n))
    strategies = list(strategies) if strategies is not None else [""] * n
    d2_errors = list(d2_errors) if d2_errors is not None else [float("nan")] * n
    if not (len(model_ids) == len(strategies) == len(d2_errors) == n):
        raise ValueError("metadata lists must match the number of vectors")
    return [
        EmbeddingPoint(
            gamma1=float(g1), gamma2=float(g2),
            model_id=model_ids[i], strategy=strategies[i], d2_error=d2_errors[i],
        )
        for i, (g1, g2) in enumerate(result.embedding)
    ]


# ---------------------------------------------------------------------------
# Radial distribution around the embedding barycenter


@dataclass(eq=False)
class RadialDistribution:
    """Histogram of distances from the joint barycenter, per strategy,
    split into accuracy tiers (tier 0 = most accurate models)."""

    bin_edges: np.ndarray
    strategies: list[str]
    counts: dict
    normalized_per_strategy: bool = False

    def tier_fractions(self, strategy: str) -> np.ndarray:
        c = self.counts[strategy].astype(np.float64)
        total = c.sum()
        return c / total if total > 0 else c

    def mass_within_median_radius(self, strategy: str) -> float:
        """Fraction of a strategy's models inside the all-points median
        radius bin; a compact cloud concentrates this toward 1."""
        c = self.counts[strategy].sum(axis=0)
        half = len(self.bin_edges) // 2
        total = c.sum()
        return float(c[:half].sum() / total) if total else float("nan")


def radial_distribution(
    points: list[EmbeddingPoint],
    n_bins: int = 20,
    n_tiers: int = 4,
    normalize_per_strategy: bool = True,
) -> RadialDistribution:
    """Distance-from-barycenter histogram of an embedding.

    The barycenter is taken over all points jointly.  Within each strategy,
    models are ordered by their dimension error and split into `n_tiers`
    shading tiers, most accurate first.
    """
    if not points:
        raise ValueError("no points")
    coords = np.array([[pt.gamma1, pt.gamma2] for pt in points])
    center = coords.mean(axis=0)
    radii = np.linalg.norm(coords - center, axis=1)
    r_max = float(radii.max())
    edges = np.linspace(0.0, r_max if r_max > 0 else 1.0, n_bins + 1)
    edges[-1] = np.nextafter(edges[-1], np.inf)  # closed last bin

    strategies = sorted({pt.strategy for pt in points})
    counts = {}
    for strat in strategies:
        idx = [i for i, pt in enumerate(points) if pt.strategy == strat]
        order = sorted(idx, key=lambda i: (_nan_high(points[i].d2_error), i))
        tiers = np.array_split(np.array(order, dtype=int), n_tiers)
        mat = np.zeros((n_tiers, n_bins), dtype=int)
        for t, tier in enumerate(tiers):
            if len(tier):
                mat[t], _ = np.histogram(radii[tier], bins=edges)
        counts[strat] = mat
    return RadialDistribution(
        bin_edges=edges,
        strategies=strategies,
        counts=counts,
        normalized_per_strategy=normalize_per_strategy,
    )


def _nan_high(v: float) -> float:
    return float("inf") if np.isnan(v) else v


# ---------------------------------------------------------------------------
# Dimension histograms


@dataclass(eq=False)
class D2Histogram:
    bin_edges: np.ndarray
    counts: dict
    failure_fractions: dict


def d2_histogram(reports, bins: np.ndarray | None = None) -> D2Histogram:
    """Shared-bin histograms of estimated d2 per ensemble, with the failure
    fraction carried as the annotation.

    `reports` is an iterable of EnsembleReport; labels are the strategy
    names, qualified by memory mode when a strategy appears twice.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports")
    labels = []
    strategy_names = [r.strategy for r in reports]
    for r in reports:
        label = r.strategy if strategy_names.count(r.strategy) == 1 else (
            f"{r.strategy}/{r.memory_mode}"
        )
        labels.append(label)
    all_d2 = [rep.d2 for r in reports for rep in r.reports]
    if bins is None:
        top = max(3.0, max(all_d2, default=3.0) * 1.01)
        bins = np.linspace(0.0, top, 31)
    counts = {}
    fractions = {}
    for label, r in zip(labels, reports):
        values = [rep.d2 for rep in r.reports]
        counts[label], _ = np.histogram(values, bins=bins)
        fractions[label] = r.failure_fraction
    return D2Histogram(bin_edges=np.asarray(bins), counts=counts, failure_fractions=fractions)


# ---------------------------------------------------------------------------
# Emission


def embedding_to_csv(points: list[EmbeddingPoint], path) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model_id", "strategy", "gamma1", "gamma2", "d2_error"])
        for pt in points:
            writer.writerow([
                pt.model_id, pt.strategy,
                f"{pt.gamma1:.17g}", f"{pt.gamma2:.17g}", f"{pt.d2_error:.17g}",
            ])


def embedding_to_json(points: list[EmbeddingPoint], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([pt.to_dict() for pt in points], fh, indent=2, sort_keys=True)
        fh.write("\n")


def histogram_to_json(hist: D2Histogram, path) -> None:
    payload = {
        "bin_edges": hist.bin_edges.tolist(),
        "counts": {k: v.tolist() for k, v in hist.counts.items()},
        "failure_fractions": hist.failure_fractions,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
