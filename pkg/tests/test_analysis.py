import numpy as np
import pytest
from scipy.spatial.distance import cdist
from scipy.stats import spearmanr

from attractorlab.analysis import (
    D2Histogram,
    EmbeddingPoint,
    RadialDistribution,
    d2_histogram,
    embedding_to_csv,
    embedding_to_json,
    radial_distribution,
    tsne,
    tsne_embed,
)
from attractorlab.errors import PerplexityInfeasibleError
from attractorlab.evaluate import EnsembleReport, EvalReport
from attractorlab.seeding import rng_from


def two_clusters(n_per=20, dim=50, separation=10.0, seed=0):
    rng = rng_from(seed)
    a = rng.normal(size=(n_per, dim))
    offset = np.full(dim, separation / np.sqrt(dim) * np.sqrt(dim))
    b = rng.normal(size=(n_per, dim)) + offset
    labels = np.array([0] * n_per + [1] * n_per)
    return np.vstack([a, b]), labels


def upper_distances(y):
    iu = np.triu_indices(len(y), 1)
    return cdist(y, y)[iu]


class TestTsne:
    def test_two_cluster_purity(self):
        x, labels = two_clusters()
        y = tsne_embed(x, perplexity=10, n_iter=1000, seed=1).embedding
        d = cdist(y, y)
        np.fill_diagonal(d, np.inf)
        purity = (labels[d.argmin(axis=1)] == labels).mean()
        assert purity >= 0.95

    def test_kl_non_increasing_post_exaggeration(self):
        x, _ = two_clusters(seed=3)
        res = tsne_embed(x, perplexity=10, n_iter=1000, seed=2)
        kls = [k for _, k in res.kl_history]
        assert len(kls) >= 10
        assert all(b <= a + 1e-9 for a, b in zip(kls, kls[1:]))

    def test_same_seed_identical(self):
        x, _ = two_clusters(seed=4)
        a = tsne_embed(x, perplexity=10, n_iter=400, seed=9).embedding
        b = tsne_embed(x, perplexity=10, n_iter=400, seed=9).embedding
        assert np.array_equal(a, b)

    def test_duplicates_land_together(self):
        x, _ = two_clusters(seed=5)
        xd = np.vstack([x, x[:1]])
        y = tsne_embed(xd, perplexity=10, n_iter=800, seed=3).embedding
        dup_dist = np.linalg.norm(y[0] - y[-1])
        assert dup_dist < np.percentile(upper_distances(y), 1)

    def test_permutation_equivariance(self):
        rng = rng_from(0)
        t = np.sort(rng.uniform(0, 4 * np.pi, 40))
        base = np.stack([np.cos(t), np.sin(t), t / 3], axis=1)
        x = base @ rng.normal(size=(3, 50)) + 0.01 * rng.normal(size=(40, 50))
        perm = rng.permutation(40)
        y1 = tsne_embed(x, perplexity=10, n_iter=600, seed=5).embedding
        y2 = tsne_embed(x[perm], perplexity=10, n_iter=600, seed=5).embedding
        assert np.array_equal(y2, y1[perm])
        rho = spearmanr(upper_distances(y1), upper_distances(y2[np.argsort(perm)])).statistic
        assert rho >= 0.99

    def test_perplexity_bounds(self):
        x, _ = two_clusters(n_per=10)  # n = 20
        with pytest.raises(PerplexityInfeasibleError):
            tsne_embed(x, perplexity=4.0)
        with pytest.raises(PerplexityInfeasibleError):
            tsne_embed(x, perplexity=10.0)  # > (20-1)/3
        with pytest.raises(PerplexityInfeasibleError):
            tsne_embed(x[:8], perplexity=5.0)  # too few points

    def test_metadata_wiring(self):
        x, labels = two_clusters(seed=6)
        points = tsne(
            x, perplexity=10, n_iter=300, seed=0,
            strategies=["a" if v == 0 else "b" for v in labels],
            d2_errors=np.linspace(0, 1, 40).tolist(),
        )
        assert len(points) == 40
        assert points[0].model_id == 0
        assert points[0].strategy == "a" and points[-1].strategy == "b"
        assert np.isfinite([p.gamma1 for p in points]).all()

    def test_metadata_length_check(self):
        x, _ = two_clusters(seed=7)
        with pytest.raises(ValueError):
            tsne(x, perplexity=10, n_iter=300, strategies=["a"])


def synthetic_points(coords, strategies=None, d2_errors=None):
    n = len(coords)
    strategies = strategies or [""] * n
    d2_errors = d2_errors if d2_errors is not None else [0.0] * n
    return [
        EmbeddingPoint(float(c[0]), float(c[1]), i, strategies[i], d2_errors[i])
        for i, c in enumerate(coords)
    ]


class TestRadialDistribution:
    def test_identical_points_fill_first_bin(self):
        pts = synthetic_points(np.ones((12, 2)))
        rd = radial_distribution(pts, n_bins=8)
        counts = rd.counts[""]
        assert counts.sum() == 12
        assert counts[:, 0].sum() == 12

    def test_counts_sum_to_strategy_cardinality(self):
        rng = rng_from(1)
        coords = rng.normal(size=(30, 2))
        strategies = ["a"] * 18 + ["b"] * 12
        rd = radial_distribution(synthetic_points(coords, strategies), n_bins=10)
        assert rd.counts["a"].sum() == 18
        assert rd.counts["b"].sum() == 12

    def test_ring_concentrates_mass(self):
        angles = np.linspace(0, 2 * np.pi, 36, endpoint=False)
        ring = 5.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        rd = radial_distribution(synthetic_points(ring), n_bins=10)
        counts = rd.counts[""].sum(axis=0)
        assert counts[-1] == 36  # all mass in the outermost bin (r = 5 = max)

    def test_rotation_invariance(self):
        rng = rng_from(2)
        coords = rng.normal(size=(25, 2))
        theta = 1.1
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        rd1 = radial_distribution(synthetic_points(coords), n_bins=12)
        rd2 = radial_distribution(synthetic_points(coords @ rot.T), n_bins=12)
        np.testing.assert_allclose(rd1.bin_edges, rd2.bin_edges, rtol=1e-12)
        assert np.array_equal(rd1.counts[""], rd2.counts[""])

    def test_accuracy_tier_ordering(self):
        # most accurate model in tier 0
        coords = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]] * 3)
        errors = list(np.linspace(0.0, 1.0, 12))
        rd = radial_distribution(synthetic_points(coords, d2_errors=errors), n_bins=4, n_tiers=3)
        counts = rd.counts[""]
        assert counts.shape == (3, 4)
        assert counts.sum() == 12
        assert counts[0].sum() == 4  # 12 models over 3 tiers

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            radial_distribution([])


def _mk_ensemble_report(strategy, memory, d2_values):
    reports = [
        EvalReport(
            valid_time_lyapunov=1.0, d2=v,
            d2_failure=abs(v - 2.06) / 2.06 > 0.25,
            free_run_length=100, ic_in_training=False, model_seed=i,
        )
        for i, v in enumerate(d2_values)
    ]
    frac = sum(r.d2_failure for r in reports) / len(reports)
    return EnsembleReport(
        strategy=strategy, memory_mode=memory, reports=reports,
        failure_fraction=frac, seeds=list(range(len(reports))),
        lambda1=0.9, d_true=2.06,
        d2_hist_edges=np.linspace(0, 3, 31),
        d2_hist_counts=np.histogram(d2_values, np.linspace(0, 3, 31))[0],
        envelope_t=np.zeros(0), envelope_mean=np.zeros((0, 3)), envelope_std=np.zeros((0, 3)),
    )


class TestD2Histogram:
    def test_single_model(self):
        rep = _mk_ensemble_report("ergodic", "zero", [2.06])
        hist = d2_histogram([rep])
        counts = hist.counts["ergodic"]
        assert counts.sum() == 1
        bin_idx = np.searchsorted(hist.bin_edges, 2.06, side="right") - 1
        assert counts[bin_idx] == 1
        assert hist.failure_fractions["ergodic"] == 0.0

    def test_bimodal_occupies_two_bins(self):
        rep = _mk_ensemble_report("random", "zero", [0.0, 2.06])
        hist = d2_histogram([rep])
        assert np.count_nonzero(hist.counts["random"]) == 2
        assert hist.failure_fractions["random"] == 0.5

    def test_shared_edges_and_label_qualification(self):
        a = _mk_ensemble_report("ergodic", "zero", [2.0, 2.1])
        b = _mk_ensemble_report("ergodic", "gaussian", [1.9, 2.2])
        hist = d2_histogram([a, b])
        assert set(hist.counts) == {"ergodic/zero", "ergodic/gaussian"}

    def test_failure_annotation_matches_report(self):
        rep = _mk_ensemble_report("split", "zero", [0.1, 2.0, 2.1, 0.0])
        hist = d2_histogram([rep])
        assert hist.failure_fractions["split"] == rep.failure_fraction


class TestEmission:
    def test_csv_and_json(self, tmp_path):
        pts = synthetic_points(np.array([[1.0, 2.0], [3.0, 4.0]]), ["a", "b"], [0.1, 0.2])
        csv_path = tmp_path / "emb.csv"
        json_path = tmp_path / "emb.json"
        embedding_to_csv(pts, csv_path)
        embedding_to_json(pts, json_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "model_id,strategy,gamma1,gamma2,d2_error"
        assert lines[1].startswith("0,a,1,2,")
        import json as json_mod

        data = json_mod.loads(json_path.read_text())
        assert data[1]["strategy"] == "b"
        assert data[1]["gamma2"] == 4.0
