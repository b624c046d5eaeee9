import math

import numpy as np
import pytest

from coevo.core import correctness_vector
from coevo.theory import (
    GenerativeProcess,
    coevolve_sim,
    estimator_check,
    expected_margin,
    hoeffding_lower_bound,
    least_squares_slope,
    precision_mc,
    sample_execution_matrix,
    sample_pair_rewards,
)

POSITIVE_MARGIN = GenerativeProcess(
    solution_accuracy=0.4,
    test_accuracy=0.8,
    wrong_pass_wrong_test=0.5,
    wrong_pass_correct_test=0.25,
)
ZERO_MARGIN = GenerativeProcess(
    solution_accuracy=0.4,
    test_accuracy=1 / 3,
    wrong_pass_wrong_test=0.375,
    wrong_pass_correct_test=0.25,
)
NEGATIVE_MARGIN = GenerativeProcess(
    solution_accuracy=0.4,
    test_accuracy=0.2,
    wrong_pass_wrong_test=0.8,
    wrong_pass_correct_test=0.5,
)


class TestExpectedMargin:
    def test_positive_case(self):
        assert expected_margin(POSITIVE_MARGIN) == pytest.approx(0.5, abs=1e-12)

    def test_constructed_zero_case(self):
        assert expected_margin(ZERO_MARGIN) == pytest.approx(0.0, abs=1e-12)

    def test_negative_case(self):
        assert expected_margin(NEGATIVE_MARGIN) == pytest.approx(-0.54, abs=1e-12)

    def test_probability_validation(self):
        with pytest.raises(ValueError):
            GenerativeProcess(0.5, 1.5, 0.5, 0.5)


class TestHoeffdingLowerBound:
    def test_closed_form_at_m64(self):
        assert hoeffding_lower_bound(0.5, 64) == pytest.approx(1 - math.exp(-2.0), abs=1e-12)

    def test_zero_margin_gives_zero(self):
        assert hoeffding_lower_bound(0.0, 10) == 0.0
        assert hoeffding_lower_bound(0.0, 100000) == 0.0

    def test_closed_form_at_m100(self):
        assert hoeffding_lower_bound(0.5, 100) == pytest.approx(1 - math.exp(-3.125), abs=1e-12)

    def test_rejects_bad_m(self):
        with pytest.raises(ValueError):
            hoeffding_lower_bound(0.5, 0)


class TestSamplePairRewards:
    def test_deterministic_corner_perfect_tests(self):
        process = GenerativeProcess(0.5, 1.0, 0.0, 0.0)
        rng = np.random.default_rng(0)
        for _ in range(20):
            correct, wrong = sample_pair_rewards(process, 12, rng)
            assert correct == 12
            assert wrong == 0

    def test_deterministic_corner_all_tests_wrong(self):
        process = GenerativeProcess(0.5, 0.0, 0.3, 0.0)
        rng = np.random.default_rng(1)
        for _ in range(20):
            correct, _ = sample_pair_rewards(process, 12, rng)
            assert correct == 0

    def test_marginals_match_model(self):
        m, trials = 8, 5000
        rng = np.random.default_rng(42)
        rewards_correct, rewards_wrong = [], []
        for _ in range(trials):
            c, w = sample_pair_rewards(POSITIVE_MARGIN, m, rng)
            rewards_correct.append(c)
            rewards_wrong.append(w)
        expected_correct = m * POSITIVE_MARGIN.test_accuracy
        se_correct = math.sqrt(m * 0.8 * 0.2 / trials)
        assert abs(np.mean(rewards_correct) - expected_correct) <= 3 * se_correct
        p_wrong = 0.8 * 0.25 + 0.2 * 0.5  # pass rate of a wrong solution per test
        se_wrong = math.sqrt(m * p_wrong * (1 - p_wrong) / trials)
        assert abs(np.mean(rewards_wrong) - m * p_wrong) <= 3 * se_wrong


class TestPrecisionMc:
    def test_positive_margin_beats_bound(self):
        estimate = precision_mc(POSITIVE_MARGIN, 64, trials=5000, seed=7)
        assert estimate.precision_hat >= estimate.hoeffding_lower - 3 * estimate.std_error
        assert estimate.hoeffding_lower == pytest.approx(1 - math.exp(-2.0), abs=1e-12)

    def test_zero_margin_hovers_at_half(self):
        estimate = precision_mc(ZERO_MARGIN, 512, trials=5000, seed=11)
        assert abs(estimate.precision_hat - 0.5) <= max(0.03, 3 * estimate.std_error)

    def test_negative_margin_collapses(self):
        estimate = precision_mc(NEGATIVE_MARGIN, 256, trials=3000, seed=13)
        assert estimate.precision_hat <= 0.05
        assert estimate.hoeffding_lower == 0.0

    def test_std_error_formula(self):
        estimate = precision_mc(POSITIVE_MARGIN, 16, trials=2000, seed=3)
        p = estimate.precision_hat
        assert estimate.std_error == pytest.approx(math.sqrt(p * (1 - p) / 2000), abs=1e-15)

    def test_seeded_repeatability(self):
        a = precision_mc(POSITIVE_MARGIN, 32, trials=1000, seed=5)
        b = precision_mc(POSITIVE_MARGIN, 32, trials=1000, seed=5)
        assert a == b

    def test_monotone_in_test_count_for_positive_margin(self):
        estimates = [
            precision_mc(POSITIVE_MARGIN, m, trials=4000, seed=29) for m in (4, 16, 64, 256)
        ]
        for small, large in zip(estimates, estimates[1:]):
            slack = 3 * (small.std_error + large.std_error)
            assert large.precision_hat >= small.precision_hat - slack

    def test_bound_validity_across_margin_grid(self):
        # Margins built from test accuracy with small fixed error rates.
        for margin in (0.1, 0.3, 0.5, 0.7, 0.9):
            accuracy = (margin + 0.1) / 1.05
            process = GenerativeProcess(0.5, accuracy, 0.1, 0.05)
            assert expected_margin(process) == pytest.approx(margin, abs=1e-12)
            for m in (8, 32, 128, 256):
                estimate = precision_mc(process, m, trials=3000, seed=int(m + margin * 100))
                assert estimate.hoeffding_lower <= estimate.precision_hat + 3 * estimate.std_error


class TestSampleExecutionMatrix:
    def test_latents_double_as_ground_truth_column(self):
        rng = np.random.default_rng(2)
        matrix, latent_solutions, _ = sample_execution_matrix(POSITIVE_MARGIN, 12, 6, rng)
        flags = correctness_vector(matrix).as_array()
        assert np.array_equal(flags.astype(bool), latent_solutions)

    def test_correct_solutions_mirror_test_correctness(self):
        rng = np.random.default_rng(8)
        matrix, latent_solutions, latent_tests = sample_execution_matrix(
            POSITIVE_MARGIN, 10, 8, rng
        )
        for row in np.flatnonzero(latent_solutions):
            assert np.array_equal(matrix.generated_bits[row].astype(bool), latent_tests)


class TestEstimatorCheck:
    def test_plugin_mean_tracks_true_margin(self):
        report = estimator_check(
            GenerativeProcess(0.5, 0.8, 0.5, 0.25), n=512, m=8, trials=100, seed=0
        )
        assert abs(report.margin_hat_mean - 0.5) <= 0.05
        assert report.ratio_identity_max_err <= 1e-12

    def test_degenerate_trials_skipped_and_counted(self):
        report = estimator_check(
            GenerativeProcess(1.0, 0.8, 0.5, 0.25), n=4, m=2, trials=10, seed=1
        )
        assert report.skipped_trials == 10
        assert report.used_trials == 0
        assert math.isnan(report.margin_hat_mean)

    def test_exact_corner_perfect_tests(self):
        report = estimator_check(
            GenerativeProcess(0.5, 1.0, 0.3, 0.0), n=8, m=4, trials=50, seed=2
        )
        assert report.margin_hat_mean == 1.0
        assert report.mean_abs_error == 0.0

    def test_seeded_repeatability(self):
        a = estimator_check(POSITIVE_MARGIN, n=16, m=4, trials=20, seed=9)
        b = estimator_check(POSITIVE_MARGIN, n=16, m=4, trials=20, seed=9)
        assert a == b


class TestCoevolveSim:
    START = GenerativeProcess(0.4, 0.4, 0.5, 0.3)

    def test_zero_learning_rate_keeps_trace_constant(self):
        trace = coevolve_sim(self.START, steps=40, n=8, m=8, learning_rate=0.0, seed=3)
        accuracies = {(r.test_accuracy, r.solution_accuracy) for r in trace.records}
        assert len(accuracies) == 1

    def test_seeded_repeatability(self):
        a = coevolve_sim(self.START, steps=30, n=8, m=8, learning_rate=0.05, seed=4)
        b = coevolve_sim(self.START, steps=30, n=8, m=8, learning_rate=0.05, seed=4)
        assert a == b

    def test_steps_strictly_increasing(self):
        trace = coevolve_sim(self.START, steps=10, n=4, m=4, learning_rate=0.05, seed=5)
        steps = [r.step for r in trace.records]
        assert steps == list(range(10))

    def test_accuracies_respect_bounds(self):
        trace = coevolve_sim(
            self.START, steps=150, n=16, m=16, learning_rate=0.5, seed=6, accuracy_bounds=(0.2, 0.8)
        )
        for record in trace.records:
            assert 0.2 - 1e-9 <= record.test_accuracy <= 0.8 + 1e-9
            assert 0.2 - 1e-9 <= record.solution_accuracy <= 0.8 + 1e-9

    def test_informative_rewards_push_test_accuracy_up(self):
        trace = coevolve_sim(self.START, steps=120, n=16, m=16, learning_rate=0.05, seed=7)
        series = trace.series("test_accuracy")
        assert least_squares_slope(series) > 0
        assert series[-1] > series[0]


class TestLeastSquaresSlope:
    def test_known_line(self):
        assert least_squares_slope([1.0, 3.0, 5.0]) == pytest.approx(2.0)

    def test_flat(self):
        assert least_squares_slope([2.0, 2.0, 2.0]) == 0.0

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            least_squares_slope([1.0])
