"""Training-time rewards, advantages, the length-guided transform, and the
clipped surrogate objective value.

Code rewards count ground-truth passes.  A generated test earns credit for
failing wrong solutions while passing every correct one; a test that lets
everything through nets zero, so trivially permissive tests are not rewarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import CorrectnessVector, ExecutionMatrix, KIND_CODE, KIND_TEST, correctness_vector
from .errors import EmptyGroup, GroundTruthMissing, ShapeError

REWARD_MODES = ("theoretical", "simple")
INVALID_CODE_REWARD = 0.0
DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class RewardSet:
    """Per-candidate rewards and normalized advantages for one task group."""

    task_id: str
    kind: str
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]
    transform_applied: bool

    def __post_init__(self):
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        object.__setattr__(self, "advantages", tuple(float(a) for a in self.advantages))
        if len(self.rewards) != len(self.advantages):
            raise ShapeError("rewards and advantages must align")


@dataclass(frozen=True)
class ObjectiveSample:
    """One response's new/old policy probability ratio and its advantage."""

    ratio: float
    advantage: float

    def __post_init__(self):
        if not (math.isfinite(self.ratio) and self.ratio > 0):
            raise ValueError("ratio must be finite and positive")


def code_reward(matrix: ExecutionMatrix, row: int) -> int:
    """Number of ground-truth tests the solution in ``row`` passes."""
    if matrix.t_q == 0:
        raise GroundTruthMissing(f"task {matrix.task_id}: code reward needs ground-truth columns")
    if not 0 <= row < matrix.n:
        raise IndexError(f"row {row} out of range for n={matrix.n}")
    return int(matrix.gt_bits[row].sum())


def _column_stats(matrix: ExecutionMatrix, column: int, flags: CorrectnessVector):
    if not 0 <= column < matrix.m:
        raise IndexError(f"generated column {column} out of range for m={matrix.m}")
    col = matrix.generated_bits[:, column]
    correct = flags.as_array() == 1
    passes_all_correct = int(col[correct].all()) if correct.any() else 1
    incorrect_passes = int(col[~correct].sum())
    return passes_all_correct, incorrect_passes, int((~correct).sum())


def unit_test_reward(
    matrix: ExecutionMatrix,
    column: int,
    literal_product: bool = False,
) -> int:
    """Score one generated test: +1 per failed wrong solution if it passes
    every correct solution, else -1 per wrong solution it lets pass.

    The pass-all-correct factor is a product over correct solutions only
    (empty product = 1).  ``literal_product`` instead multiplies correctness
    and pass bits over every row, which zeroes the bonus whenever any
    incorrect solution exists; it is kept for comparison.
    """
    flags = correctness_vector(matrix)
    passes_all_correct, incorrect_passes, num_incorrect = _column_stats(matrix, column, flags)
    if literal_product:
        col = matrix.generated_bits[:, column]
        passes_all_correct = int(np.prod(flags.as_array() * col)) if matrix.n else 1
    return -incorrect_passes + passes_all_correct * num_incorrect


def unit_test_reward_simple(matrix: ExecutionMatrix, column: int) -> int:
    """Ablation reward: 1 iff the test passes every correct solution."""
    flags = correctness_vector(matrix)
    passes_all_correct, _, _ = _column_stats(matrix, column, flags)
    return passes_all_correct


def normalize_advantages(rewards: Sequence[float]) -> list[float]:
    """Z-score a reward group with population std; a flat group maps to zeros."""
    if len(rewards) == 0:
        raise EmptyGroup("cannot normalize an empty reward group")
    arr = np.asarray(rewards, dtype=float)
    std = float(arr.std())
    if std < DEGENERATE_STD:
        return [0.0] * len(rewards)
    mean = float(arr.mean())
    return [float((r - mean) / std) for r in arr]


@dataclass(frozen=True)
class LengthTransformSteps:
    """Intermediate values of the length-guided transform, for diagnostics."""

    standardized: tuple[float, ...]
    shifted: tuple[float, ...]
    alpha: Optional[float]
    sigma: Optional[float]
    result: tuple[float, ...]
    branch: str


def _length_transform_steps(
    rewards: Sequence[float], lengths: Sequence[int]
) -> LengthTransformSteps:
    r = np.asarray(rewards, dtype=float)
    lens = np.asarray(lengths, dtype=float)
    if r.shape != lens.shape:
        raise ShapeError(f"{len(rewards)} rewards vs {len(lengths)} lengths")
    if (lens < 0).any():
        raise ValueError("lengths must be >= 0")

    standardized = r - r.mean()
    positive = standardized > 0
    if not positive.any() or positive.all():
        return LengthTransformSteps(
            standardized=tuple(standardized),
            shifted=tuple(standardized),
            alpha=None,
            sigma=None,
            result=tuple(standardized),
            branch="degenerate",
        )

    threshold = float(np.median(lens[positive]))
    longest_positive = float(lens[positive].max())
    shifted = np.where(positive, threshold - lens, threshold - longest_positive)

    shifted_positive = shifted > 0
    if not shifted_positive.any():
        sigma = float(shifted.std())
        result = shifted if sigma < DEGENERATE_STD else shifted / sigma
        return LengthTransformSteps(
            standardized=tuple(standardized),
            shifted=tuple(shifted),
            alpha=None,
            sigma=sigma,
            result=tuple(result),
            branch="no_positive_shift",
        )

    alpha = float(-shifted[shifted < 0].sum() / shifted[shifted_positive].sum())
    scaled = np.where(shifted_positive, alpha * shifted, shifted)
    sigma = float(scaled.std())
    result = scaled if sigma < DEGENERATE_STD else scaled / sigma
    return LengthTransformSteps(
        standardized=tuple(standardized),
        shifted=tuple(shifted),
        alpha=alpha,
        sigma=sigma,
        result=tuple(result),
        branch="balanced",
    )


def length_transform(rewards: Sequence[float], lengths: Sequence[int]) -> list[float]:
    """Rework a reward group so shorter positively-rewarded responses win.

    After mean-centering, positively-rewarded responses are re-scored by how
    far their length sits below the median length of the positive group;
    everything else lands at the bottom of that scale.  Positive mass is then
    rebalanced against negative mass and the whole group is std-normalized.
    """
    return [float(x) for x in _length_transform_steps(rewards, lengths).result]


def _clip(x: float, epsilon: float) -> float:
    return min(max(x, 1.0 - epsilon), 1.0 + epsilon)


def grpo_objective(
    samples: Sequence[ObjectiveSample],
    epsilon: float,
    kl_estimate: float = 0.0,
    beta: float = 0.0,
) -> float:
    """Group-mean clipped surrogate objective value minus the KL penalty.

    Each sample contributes min(ratio * A, clip(ratio, 1-eps, 1+eps) * A);
    no gradients are computed here, only the scalar value.
    """
    if len(samples) == 0:
        raise EmptyGroup("objective needs at least one sample")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if kl_estimate < 0 or beta < 0:
        raise ValueError("kl_estimate and beta must be >= 0")
    total = 0.0
    for sample in samples:
        unclipped = sample.ratio * sample.advantage
        clipped = _clip(sample.ratio, epsilon) * sample.advantage
        total += min(unclipped, clipped)
    return total / len(samples) - beta * kl_estimate


def invalid_test_reward(n: int) -> float:
    """Sentinel reward for a formatting-failed test: below any achievable value."""
    return float(-(n + 1))


def _place_rewards(
    valid_values: Sequence[float],
    index_map: Sequence[int],
    total: int,
    sentinel: float,
) -> list[float]:
    if total < len(index_map):
        raise ShapeError("group size smaller than number of valid candidates")
    rewards = [sentinel] * total
    for value, idx in zip(valid_values, index_map):
        if idx >= total:
            raise ShapeError(f"candidate index {idx} outside group of size {total}")
        rewards[idx] = float(value)
    return rewards


def assign_group_rewards(
    matrix: ExecutionMatrix,
    invalid_code_count: int = 0,
    invalid_test_count: int = 0,
    mode: str = "theoretical",
    long_cot: bool = False,
    lengths: Optional[Sequence[int]] = None,
) -> tuple[RewardSet, RewardSet]:
    """Produce the (code, test) reward sets for one task group.

    Formatting-failed candidates stay out of the matrix but keep their slot in
    the reward group: codes get 0, tests get -(n+1), both at or below any
    achievable valid value so the policy is penalized for them.  With
    ``long_cot`` the length transform reshapes test rewards (``lengths`` must
    align to test candidate indices) before advantages are normalized.
    """
    if mode not in REWARD_MODES:
        raise ValueError(f"mode must be one of {REWARD_MODES}")
    if invalid_code_count < 0 or invalid_test_count < 0:
        raise ValueError("invalid candidate counts must be >= 0")

    total_codes = matrix.n + invalid_code_count
    code_values = [code_reward(matrix, row) for row in range(matrix.n)]
    code_rewards = _place_rewards(
        code_values, matrix.code_index_map, total_codes, INVALID_CODE_REWARD
    )
    code_set = RewardSet(
        task_id=matrix.task_id,
        kind=KIND_CODE,
        rewards=tuple(code_rewards),
        advantages=tuple(normalize_advantages(code_rewards)),
        transform_applied=False,
    )

    total_tests = matrix.m + invalid_test_count
    score = unit_test_reward if mode == "theoretical" else unit_test_reward_simple
    test_values = [score(matrix, col) for col in range(matrix.m)]
    test_rewards = _place_rewards(
        test_values, matrix.test_index_map, total_tests, invalid_test_reward(matrix.n)
    )
    if long_cot and total_tests > 0:
        if lengths is None:
            raise ShapeError("long_cot transform needs response lengths")
        test_rewards = length_transform(test_rewards, lengths)
    if total_tests == 0:
        test_advantages: list[float] = []
    else:
        test_advantages = normalize_advantages(test_rewards)
    test_set = RewardSet(
        task_id=matrix.task_id,
        kind=KIND_TEST,
        rewards=tuple(test_rewards),
        advantages=tuple(test_advantages),
        transform_applied=bool(long_cot),
    )
    return code_set, test_set
