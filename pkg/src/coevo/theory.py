"""Monte Carlo lab for the Bernoulli model behind test-based solution ranking.

Solutions and tests are drawn with latent correctness; execution outcomes
follow conditional pass probabilities (a correct solution always passes a
correct test and never passes a wrong one).  The lab measures how often a
correct solution outscores a wrong one, checks the Hoeffding-style bound on
that probability, validates the plug-in reward estimators, and runs a toy
co-evolution loop where reward advantages nudge the generator accuracies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import ExecutionMatrix
from .rewards import assign_group_rewards, unit_test_reward

PROB_EPS = 1e-9


@dataclass(frozen=True)
class GenerativeProcess:
    """Bernoulli model of candidate generation and execution.

    ``solution_accuracy`` and ``test_accuracy`` are the chances a sampled
    solution / test is correct.  A wrong solution passes a correct test with
    probability ``wrong_pass_correct_test`` and a wrong test with probability
    ``wrong_pass_wrong_test``.  Correct solutions are deterministic: they pass
    correct tests and fail wrong ones — those two rates are not configurable.
    """

    solution_accuracy: float
    test_accuracy: float
    wrong_pass_wrong_test: float
    wrong_pass_correct_test: float

    def __post_init__(self):
        for name in (
            "solution_accuracy",
            "test_accuracy",
            "wrong_pass_wrong_test",
            "wrong_pass_correct_test",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class PrecisionEstimate:
    """Monte Carlo estimate of P(correct solution outscores a wrong one)."""

    m: int
    trials: int
    precision_hat: float
    std_error: float
    hoeffding_lower: float


@dataclass(frozen=True)
class CoevolutionStep:
    step: int
    test_accuracy: float
    solution_accuracy: float
    mean_test_reward: float
    mean_code_reward: float


@dataclass(frozen=True)
class CoevolutionTrace:
    records: tuple[CoevolutionStep, ...]

    def __post_init__(self):
        steps = [r.step for r in self.records]
        if steps != sorted(set(steps)):
            raise ValueError("trace steps must be strictly increasing")

    def series(self, field: str) -> np.ndarray:
        return np.array([getattr(r, field) for r in self.records], dtype=float)


@dataclass(frozen=True)
class EstimatorReport:
    """Accuracy of the plug-in margin estimators over sampled matrices."""

    n: int
    m: int
    trials: int
    used_trials: int
    skipped_trials: int
    margin_true: float
    margin_hat_mean: float
    mean_abs_error: float
    ratio_identity_max_err: float


def expected_margin(process: GenerativeProcess) -> float:
    """Expected per-test score gap between a correct and a wrong solution.

    Positive margin means aggregating more tests drives the ranking toward
    the correct solution; zero or negative means it never will.
    """
    return process.test_accuracy * (1.0 - process.wrong_pass_correct_test) - (
        1.0 - process.test_accuracy
    ) * process.wrong_pass_wrong_test


def hoeffding_lower_bound(margin: float, num_tests: int) -> float:
    """Concentration lower bound 1 - exp(-margin^2 * m / 8), clamped at 0.

    Valid as a bound on ranking precision only for a positive margin.
    """
    if num_tests < 1:
        raise ValueError("num_tests must be >= 1")
    return max(0.0, 1.0 - math.exp(-margin * margin * num_tests / 8.0))


def sample_pair_rewards(
    process: GenerativeProcess, num_tests: int, rng: np.random.Generator
) -> tuple[int, int]:
    """Draw one correct and one wrong solution's scores over ``num_tests`` tests."""
    if num_tests < 1:
        raise ValueError("num_tests must be >= 1")
    tests_correct = rng.random(num_tests) < process.test_accuracy
    reward_correct = int(tests_correct.sum())
    pass_prob = np.where(
        tests_correct, process.wrong_pass_correct_test, process.wrong_pass_wrong_test
    )
    reward_wrong = int((rng.random(num_tests) < pass_prob).sum())
    return reward_correct, reward_wrong


def precision_mc(
    process: GenerativeProcess, num_tests: int, trials: int, seed: int
) -> PrecisionEstimate:
    """Estimate P(correct solution strictly outscores a wrong one) by simulation."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    tests_correct = rng.random((trials, num_tests)) < process.test_accuracy
    reward_correct = tests_correct.sum(axis=1)
    pass_prob = np.where(
        tests_correct, process.wrong_pass_correct_test, process.wrong_pass_wrong_test
    )
    reward_wrong = (rng.random((trials, num_tests)) < pass_prob).sum(axis=1)
    precision_hat = float(np.mean(reward_correct > reward_wrong))
    std_error = math.sqrt(precision_hat * (1.0 - precision_hat) / trials)
    margin = expected_margin(process)
    lower = hoeffding_lower_bound(margin, num_tests) if margin > 0 else 0.0
    return PrecisionEstimate(
        m=num_tests,
        trials=trials,
        precision_hat=precision_hat,
        std_error=std_error,
        hoeffding_lower=lower,
    )


def sample_execution_matrix(
    process: GenerativeProcess,
    n: int,
    m: int,
    rng: np.random.Generator,
    task_id: str = "sim",
) -> tuple[ExecutionMatrix, np.ndarray, np.ndarray]:
    """Draw a full matrix with known latent correctness.

    The latent solution labels double as a single ground-truth column, so the
    matrix-facing correctness vector reproduces the latents exactly.
    Returns (matrix, latent_solutions, latent_tests).
    """
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    latent_solutions = rng.random(n) < process.solution_accuracy
    latent_tests = rng.random(m) < process.test_accuracy
    bits = np.zeros((n, m), dtype=np.int8)
    if m:
        # Correct solutions mirror test correctness; wrong ones pass by chance.
        bits[latent_solutions] = latent_tests.astype(np.int8)
        wrong = ~latent_solutions
        if wrong.any():
            pass_prob = np.where(
                latent_tests, process.wrong_pass_correct_test, process.wrong_pass_wrong_test
            )
            draws = rng.random((int(wrong.sum()), m))
            bits[wrong] = (draws < pass_prob).astype(np.int8)
    full = np.concatenate([bits, latent_solutions.astype(np.int8)[:, None]], axis=1)
    matrix = ExecutionMatrix(task_id=task_id, bits=full, m=m, t_q=1)
    return matrix, latent_solutions, latent_tests


def estimator_check(
    process: GenerativeProcess,
    n: int,
    m: int,
    trials: int,
    seed: int,
) -> EstimatorReport:
    """Compare plug-in margin estimates against the true margin.

    Per column: the pass-all-correct indicator estimates test correctness and
    the wrong-solution pass rate estimates both conditional pass rates; their
    combination must also equal reward / #incorrect (checked per column).
    Trials without any incorrect solution carry no signal and are skipped.
    """
    if n < 2:
        raise ValueError("need n >= 2 so both labels can appear")
    if m < 1 or trials < 1:
        raise ValueError("need m >= 1 and trials >= 1")
    margin_true = expected_margin(process)
    per_trial: list[float] = []
    skipped = 0
    ratio_err = 0.0
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        matrix, latent_solutions, _ = sample_execution_matrix(process, n, m, rng)
        wrong = ~latent_solutions
        num_incorrect = int(wrong.sum())
        if num_incorrect == 0:
            skipped += 1
            continue
        correct = latent_solutions
        column_estimates = []
        for k in range(m):
            col = matrix.generated_bits[:, k]
            test_correct_hat = float(col[correct].all()) if correct.any() else 1.0
            wrong_pass_rate = float(col[wrong].sum()) / num_incorrect
            margin_hat = test_correct_hat * (1.0 - wrong_pass_rate) - (
                1.0 - test_correct_hat
            ) * wrong_pass_rate
            column_estimates.append(margin_hat)
            ratio = unit_test_reward(matrix, k) / num_incorrect
            ratio_err = max(ratio_err, abs(ratio - margin_hat))
        per_trial.append(float(np.mean(column_estimates)))
    used = len(per_trial)
    margin_hat_mean = float(np.mean(per_trial)) if used else math.nan
    mae = float(np.mean([abs(v - margin_true) for v in per_trial])) if used else math.nan
    return EstimatorReport(
        n=n,
        m=m,
        trials=trials,
        used_trials=used,
        skipped_trials=skipped,
        margin_true=margin_true,
        margin_hat_mean=margin_hat_mean,
        mean_abs_error=mae,
        ratio_identity_max_err=ratio_err,
    )


def _logit(p: float) -> float:
    p = min(max(p, PROB_EPS), 1.0 - PROB_EPS)
    return math.log(p / (1.0 - p))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _advantage_gap(advantages, latent_correct: np.ndarray) -> float:
    adv = np.asarray(advantages, dtype=float)
    if latent_correct.all() or not latent_correct.any():
        return 0.0
    return float(adv[latent_correct].mean() - adv[~latent_correct].mean())


def coevolve_sim(
    initial: GenerativeProcess,
    steps: int,
    n: int,
    m: int,
    learning_rate: float,
    seed: int,
    accuracy_bounds: tuple[float, float] = (0.1, 0.9),
    gap_clip: float = 1.0,
) -> CoevolutionTrace:
    """Toy co-evolution loop driven by the execution-matrix rewards.

    Each step samples a matrix from the current process, computes grouped
    rewards and advantages, and nudges the logits of test and solution
    accuracy by learning_rate times the advantage gap between correct-latent
    and incorrect-latent candidates.  The gap is clipped to ``gap_clip``
    normalized-advantage units so near-degenerate groups cannot blow up a
    step.  Accuracies are clamped to ``accuracy_bounds``: at the corners
    every group is uniform and carries no advantage signal, so the loop
    keeps both behaviors strictly inside them.  This update rule is a
    stand-in for an actual policy optimizer — it only exposes whether the
    rewards point the right way.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if gap_clip <= 0:
        raise ValueError("gap_clip must be > 0")
    lo, hi = accuracy_bounds
    if not 0.0 < lo < hi < 1.0:
        raise ValueError("accuracy_bounds must satisfy 0 < lo < hi < 1")

    def clamp(x: float) -> float:
        return min(max(x, _logit(lo)), _logit(hi))

    def clip_gap(gap: float) -> float:
        return max(-gap_clip, min(gap_clip, gap))

    process = initial
    logit_test = clamp(_logit(initial.test_accuracy))
    logit_solution = clamp(_logit(initial.solution_accuracy))
    records = []
    for step in range(steps):
        process = replace(
            process,
            test_accuracy=_sigmoid(logit_test),
            solution_accuracy=_sigmoid(logit_solution),
        )
        rng = np.random.default_rng([seed, step])
        matrix, latent_solutions, latent_tests = sample_execution_matrix(process, n, m, rng)
        code_set, test_set = assign_group_rewards(matrix)
        # Test rewards scale with the count of incorrect solutions in the
        # group; dividing by it puts steps with different group compositions
        # on one margin-like scale (advantages are unaffected by group scale).
        num_incorrect = int((~latent_solutions).sum())
        mean_test = float(np.mean(test_set.rewards)) / max(num_incorrect, 1) if m else 0.0
        records.append(
            CoevolutionStep(
                step=step,
                test_accuracy=process.test_accuracy,
                solution_accuracy=process.solution_accuracy,
                mean_test_reward=mean_test,
                mean_code_reward=float(np.mean(code_set.rewards)),
            )
        )
        logit_test = clamp(
            logit_test + learning_rate * clip_gap(_advantage_gap(test_set.advantages, latent_tests))
        )
        logit_solution = clamp(
            logit_solution
            + learning_rate * clip_gap(_advantage_gap(code_set.advantages, latent_solutions))
        )
    return CoevolutionTrace(records=tuple(records))


def least_squares_slope(values) -> float:
    """Slope of the ordinary least-squares line through (index, value)."""
    y = np.asarray(values, dtype=float)
    x = np.arange(len(y), dtype=float)
    if len(y) < 2:
        raise ValueError("need at least two points for a slope")
    x_centered = x - x.mean()
    return float((x_centered * (y - y.mean())).sum() / (x_centered**2).sum())
