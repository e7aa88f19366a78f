"""Monte Carlo harness: trial metrics, rate curves, concentration checks."""

import math

import numpy as np
import pytest

from entot.experiments import (
    METRICS,
    ExperimentSpec,
    concentration_check,
    default_class1_probs,
    default_label_means,
    default_scenario_measures,
    default_truth,
    p_star_variance,
    run_curve,
    run_curves,
    run_trial,
    trial_rng,
)
from entot.measures import DiscreteMeasure, validate_support
from entot.oracle import compute_truth


@pytest.fixture(scope="module")
def truth10():
    return default_truth(eta=1.0)


def single_atom_truth():
    m = DiscreteMeasure(points=np.array([[0.1, 0.0]]), weights=np.array([1.0]))
    return compute_truth(m, m, eta=1.0)


class TestExperimentSpec:
    def test_valid(self):
        ExperimentSpec(metric="cost_mse", sample_sizes=(10, 20), trials=5, seed=0, eta=1.0)

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            ExperimentSpec(metric="nope", sample_sizes=(10, 20), trials=5, seed=0, eta=1.0)

    def test_sizes_must_increase(self):
        with pytest.raises(ValueError):
            ExperimentSpec(metric="cost_mse", sample_sizes=(20, 10), trials=5, seed=0, eta=1.0)


class TestDefaultScenario:
    def test_measures_normalized_and_sized(self):
        mu, nu = default_scenario_measures()
        assert mu.size == nu.size == 10
        assert mu.dim == nu.dim == 3
        assert validate_support(mu) and validate_support(nu)
        assert abs(mu.weights.sum() - 1.0) <= 1e-12
        # weights proportional to 1..10 and 10..1
        assert mu.weights[9] == pytest.approx(10 * mu.weights[0], rel=1e-12)
        assert nu.weights[0] == pytest.approx(10 * nu.weights[9], rel=1e-12)

    def test_label_defaults_well_formed(self, truth10):
        means = default_label_means(truth10.nu)
        assert means.shape == (10,)
        assert np.abs(means).max() <= 0.5 + 1e-12
        probs = default_class1_probs(truth10)
        assert probs.shape == (10,)
        assert probs.min() >= 0.0 and probs.max() <= 1.0
        # realized margins stay off the 1/2 threshold for a clean Bayes rule
        h_star = truth10.p_star @ (truth10.nu.weights * probs)
        assert np.abs(h_star - 0.5).min() > 1e-3


class TestRunTrial:
    def test_single_atom_truth_all_zero_errors(self):
        truth = single_atom_truth()
        for metric in ("cost_mse", "cost_bias", "map_mse", "density_mse"):
            val = run_trial(truth, 5, metric, trial_rng(0, 5, 0))
            assert val == pytest.approx(0.0, abs=1e-12)

    def test_unknown_metric(self, truth10):
        with pytest.raises(ValueError):
            run_trial(truth10, 10, "nope", trial_rng(0, 10, 0))

    def test_deterministic_given_stream(self, truth10):
        v1 = run_trial(truth10, 50, "cost_mse", trial_rng(11, 50, 3))
        v2 = run_trial(truth10, 50, "cost_mse", trial_rng(11, 50, 3))
        assert v1 == v2

    def test_snapshot_10_atom_n100(self, truth10):
        # regression snapshot recorded from the first verified run; loose
        # relative tolerance admits both compiled and pure-python kernels
        val = run_trial(truth10, 100, "cost_mse", trial_rng(123, 100, 0))
        assert val == pytest.approx(SNAPSHOT_COST_MSE_N100, rel=1e-6)

    def test_metrics_nonnegative(self, truth10):
        for metric in METRICS:
            if metric == "cost_bias":
                continue
            val = run_trial(truth10, 40, metric, trial_rng(5, 40, 1))
            assert val >= 0.0


SNAPSHOT_COST_MSE_N100 = 0.0001579603851061323


class TestRunCurves:
    def test_reproducible_regardless_of_threads(self, truth10):
        kw = dict(sample_sizes=(20, 40), trials=6, seed=3)
        c1 = run_curves(truth10, ("cost_mse",), threads=1, **kw)["cost_mse"]
        c2 = run_curves(truth10, ("cost_mse",), threads=4, **kw)["cost_mse"]
        for s1, s2 in zip(c1.stats, c2.stats):
            assert s1 == s2
        assert c1.fitted_slope == c2.fitted_slope

    def test_multi_metric_matches_single_metric(self, truth10):
        kw = dict(sample_sizes=(20, 40), trials=5, seed=9)
        multi = run_curves(truth10, ("cost_mse", "map_mse"), **kw)
        solo = run_curves(truth10, ("map_mse",), **kw)["map_mse"]
        for s1, s2 in zip(multi["map_mse"].stats, solo.stats):
            assert s1 == s2

    def test_degenerate_truth_flagged(self):
        truth = single_atom_truth()
        curve = run_curves(truth, ("cost_mse",), (5, 10), 10, seed=0)["cost_mse"]
        assert curve.degenerate
        assert curve.fitted_slope is None

    def test_run_curve_spec_roundtrip(self, truth10):
        spec = ExperimentSpec(
            metric="cost_mse", sample_sizes=(20, 40), trials=5, seed=7, eta=1.0
        )
        curve = run_curve(spec, truth10)
        assert curve.sample_sizes == (20, 40)
        assert all(s.trials_ok == 5 for s in curve.stats)
        assert not curve.invalid

    def test_failed_trials_counted(self, truth10):
        # an absurdly tight tolerance with 1 iteration fails every trial
        spec = ExperimentSpec(
            metric="cost_mse",
            sample_sizes=(10, 20),
            trials=3,
            seed=0,
            eta=1.0,
            tolerance=1e-15,
            max_iterations=1,
        )
        from entot.experiments import AllTrialsFailed

        with pytest.raises(AllTrialsFailed):
            run_curve(spec, truth10)


class TestConcentration:
    def test_single_atom_gradient_exactly_zero(self):
        truth = single_atom_truth()
        rep = concentration_check(truth, 10, 20, np.random.default_rng(0))
        assert np.all(rep.grad_sq == 0.0)

    def test_one_over_n_scaling_within_factor_two(self, truth10):
        rng = np.random.default_rng(1)
        r100 = concentration_check(truth10, 100, 400, rng)
        r400 = concentration_check(truth10, 400, 400, rng)
        m100 = 100 * r100.grad_sq.mean()
        m400 = 400 * r400.grad_sq.mean()
        assert 0.5 <= m100 / m400 <= 2.0

    def test_gradient_mean_identity_and_bound(self, truth10):
        rng = np.random.default_rng(2)
        n, trials = 200, 1000
        rep = concentration_check(truth10, n, trials, rng)
        exact = 2.0 * p_star_variance(truth10) / n
        se = rep.grad_sq.std(ddof=1) / math.sqrt(trials)
        assert abs(rep.grad_sq.mean() - exact) <= 3 * se
        assert rep.grad_sq.mean() <= 2.0 * math.exp(10.0 * truth10.eta) / n

    def test_ustat_bound_t2_over_500_trials(self, truth10):
        rng = np.random.default_rng(3)
        rep = concentration_check(truth10, 200, 500, rng)
        rows = {t: (level, emp, bound) for t, level, emp, bound in rep.ustat_rows}
        level, emp, bound = rows[2.0]
        assert level == pytest.approx(1.0 - 2.0 * math.exp(-2.0))
        assert emp <= bound

    def test_ustat_bound_all_levels(self, truth10):
        rng = np.random.default_rng(4)
        rep = concentration_check(truth10, 100, 500, rng)
        for t, level, emp, bound in rep.ustat_rows:
            assert emp <= bound


class TestTrialRng:
    def test_streams_differ_across_indices(self):
        a = trial_rng(0, 10, 0).random(4)
        b = trial_rng(0, 10, 1).random(4)
        c = trial_rng(0, 20, 0).random(4)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_streams_reproducible(self):
        assert np.array_equal(trial_rng(5, 50, 7).random(8), trial_rng(5, 50, 7).random(8))
