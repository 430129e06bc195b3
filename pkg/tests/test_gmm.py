"""Diagonal-covariance EM and GMM-based class balancing."""

import numpy as np
import pytest

from conlex import balance_gmm, fit_gmm
from conlex.errors import DegenerateComponent, SingleClassNeighborhood
from conlex.surrogate import PROVENANCE_GMM
from conftest import ConstantBlackBox, LinearBlackBox, build_surrogate


def _clustered_set(n0=60, n1=60, gap=20.0, seed=0):
    """Two spherical clusters; black-box probabilities follow the cluster."""
    rng = np.random.default_rng(seed)
    Z = np.vstack(
        [rng.normal(0.0, 1.0, size=(n0, 2)), rng.normal(gap, 1.0, size=(n1, 2))]
    )
    p1 = np.concatenate([np.full(n0, 0.1), np.full(n1, 0.9)])
    return build_surrogate(Z, np.column_stack([1 - p1, p1]))


def _log_gauss(Z, mean, var):
    return -0.5 * np.sum(np.log(2 * np.pi * var) + (Z - mean) ** 2 / var, axis=1)


def responsibilities(model, Z):
    """Independent E-step arithmetic for checking the fitted parameters."""
    log_r = np.stack(
        [
            np.log(model.mixing[k]) + _log_gauss(Z, model.means[k], model.variances[k])
            for k in range(model.n_components)
        ],
        axis=1,
    )
    log_r -= log_r.max(axis=1, keepdims=True)
    r = np.exp(log_r)
    return r / r.sum(axis=1, keepdims=True)


class TestFitGmm:
    def test_single_component_closed_form(self):
        s = _clustered_set(40, 0)
        g = fit_gmm(s, n_components=1, seed=0)
        assert np.allclose(g.means[0], s.Z.mean(axis=0))
        assert np.allclose(g.variances[0], s.Z.var(axis=0))
        assert np.allclose(g.mixing, [1.0])

    def test_well_separated_clusters_recovered(self):
        s = _clustered_set(60, 60, gap=20.0)
        g = fit_gmm(s, n_components=2, seed=0)
        centers = sorted(g.means[:, 0])
        assert abs(centers[0] - 0.0) < 0.5
        assert abs(centers[1] - 20.0) < 0.5
        r = responsibilities(g, s.Z)
        assert np.all(r.max(axis=1) >= 0.99)

    def test_component_labels_take_majority_hard_label(self):
        s = _clustered_set(60, 60, gap=20.0)
        g = fit_gmm(s, n_components=2, seed=0)
        low_first = g.means[0, 0] < g.means[1, 0]
        expected = [0, 1] if low_first else [1, 0]
        assert list(g.labels) == expected

    def test_log_likelihood_trace_non_decreasing(self):
        for seed in range(8):
            s = _clustered_set(50, 30, gap=4.0, seed=seed)
            g = fit_gmm(s, n_components=2, seed=seed)
            t = np.asarray(g.log_likelihood_trace)
            assert np.all(np.diff(t) >= -1e-9)

    def test_mixing_weights_on_simplex_and_variances_floored(self):
        s = _clustered_set(50, 50, gap=6.0)
        g = fit_gmm(s, n_components=3, seed=1)
        assert abs(g.mixing.sum() - 1.0) <= 1e-9
        floor = 1e-6 * s.Z.var(axis=0)
        assert np.all(g.variances >= np.minimum(floor, 1e-12) - 1e-15)
        assert np.all(g.variances > 0)

    def test_deterministic_under_seed(self):
        s = _clustered_set(40, 40, gap=5.0)
        a = fit_gmm(s, n_components=2, seed=9)
        b = fit_gmm(s, n_components=2, seed=9)
        assert np.array_equal(a.means, b.means)
        assert np.array_equal(a.variances, b.variances)

    def test_component_count_bounds(self):
        s = _clustered_set(5, 1)
        with pytest.raises(ValueError):
            fit_gmm(s, n_components=0)
        with pytest.raises(ValueError):
            fit_gmm(s, n_components=7)

    def test_identical_rows_exhaust_reseeding(self):
        Z = np.tile([1.0, 2.0], (6, 1))
        s = build_surrogate(Z, np.tile([0.3, 0.7], (6, 1)))
        with pytest.raises(DegenerateComponent):
            fit_gmm(s, n_components=2, seed=0)

    def test_sample_draws_from_selected_components(self):
        s = _clustered_set(60, 60, gap=20.0)
        g = fit_gmm(s, n_components=2, seed=0)
        lo = int(np.argmin(g.means[:, 0]))
        draws = g.sample(200, np.random.default_rng(0), components=[lo])
        assert draws.shape == (200, 2)
        assert np.all(draws[:, 0] < 10.0)


class TestBalanceGmm:
    def test_final_counts_within_one_of_majority(self):
        s = _clustered_set(80, 20, gap=20.0, seed=2)
        model = LinearBlackBox(w=[0.8, 0.0], b=-8.0)  # class 1 in the far cluster
        g = fit_gmm(s, seed=0)
        out = balance_gmm(s, model, g, seed=0)
        counts = out.class_counts()
        assert max(counts.values()) - min(counts.values()) <= 1
        out.validate()

    def test_planted_mixture_acceptance_rate(self):
        # components align with the classes, so most draws from the minority
        # component should already carry the minority label
        s = _clustered_set(80, 20, gap=20.0, seed=3)
        model = LinearBlackBox(w=[0.8, 0.0], b=-8.0)
        g = fit_gmm(s, seed=0)
        stats = {}
        balance_gmm(s, model, g, seed=1, stats_out=stats)
        assert stats["gmm_candidates_drawn"] > 0
        rate = stats["gmm_candidates_accepted"] / stats["gmm_candidates_drawn"]
        assert rate >= 0.8

    def test_new_rows_freshly_queried_and_tagged(self):
        s = _clustered_set(50, 10, gap=20.0, seed=4)
        model = LinearBlackBox(w=[0.8, 0.0], b=-8.0)
        g = fit_gmm(s, seed=0)
        out = balance_gmm(s, model, g, seed=0)
        new = range(s.n, out.n)
        gmm_rows = [i for i in new if out.provenance[i] == PROVENANCE_GMM]
        assert gmm_rows, "expected at least one accepted mixture draw"
        probs = model.predict_proba(out.Z[gmm_rows])
        assert np.allclose(out.probs[gmm_rows], probs)
        assert np.all(out.hard_labels[list(gmm_rows)] == probs.argmax(axis=1))

    def test_ros_fallback_when_no_minority_component(self):
        # every component majority-labeled class 0: deficit must still be
        # filled, via plain duplication
        rng = np.random.default_rng(5)
        Z = rng.normal(size=(50, 2))
        p1 = np.where(np.arange(50) < 46, 0.2, 0.8)
        s = build_surrogate(Z, np.column_stack([1 - p1, p1]))
        model = ConstantBlackBox([0.8, 0.2])
        g = fit_gmm(s, n_components=2, seed=0)
        assert 1 not in set(int(v) for v in g.labels)
        out = balance_gmm(s, model, g, seed=0)
        counts = out.class_counts()
        assert max(counts.values()) - min(counts.values()) <= 1

    def test_single_class_neighborhood_rejected(self):
        rng = np.random.default_rng(6)
        Z = rng.normal(size=(30, 2))
        s = build_surrogate(Z, np.tile([0.7, 0.3], (30, 1)))
        g = fit_gmm(s, n_components=1, seed=0)
        with pytest.raises(SingleClassNeighborhood):
            balance_gmm(s, ConstantBlackBox([0.7, 0.3]), g, seed=0)

    def test_input_not_mutated_and_deterministic(self):
        s = _clustered_set(40, 10, gap=20.0, seed=7)
        model = LinearBlackBox(w=[0.8, 0.0], b=-8.0)
        g = fit_gmm(s, seed=0)
        n_before = s.n
        a = balance_gmm(s, model, g, seed=3)
        b = balance_gmm(s, model, g, seed=3)
        assert s.n == n_before
        assert np.array_equal(a.Z, b.Z)
        assert a.provenance == b.provenance
