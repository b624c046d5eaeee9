"""Inference-time selection: pick the solution that passes the most generated
tests, plus the accuracy metrics and the (n, m) subsampling grid behind
test-time scaling curves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import CandidateRecord, ExecutionMatrix, correctness_vector, submatrix
from .errors import GroundTruthMissing, NoGeneratedTests, SubsampleTooLarge
from .harness import RunSpec, judge, run_one


@dataclass(frozen=True)
class BonResult:
    """Outcome of best-of-N selection over one execution matrix."""

    task_id: str
    selected_row: int
    scores: tuple[int, ...]
    selected_is_correct: Optional[bool]

    def __post_init__(self):
        if not 0 <= self.selected_row < len(self.scores):
            raise ValueError("selected_row out of range")
        if self.scores[self.selected_row] != max(self.scores):
            raise ValueError("selected_row must carry the maximum score")


def bon_reward(matrix: ExecutionMatrix, row: int) -> int:
    """Number of generated tests the solution in ``row`` passes."""
    if matrix.m == 0:
        raise NoGeneratedTests(f"task {matrix.task_id}: selection needs generated tests")
    if not 0 <= row < matrix.n:
        raise IndexError(f"row {row} out of range for n={matrix.n}")
    return int(matrix.generated_bits[row].sum())


def select_best(matrix: ExecutionMatrix) -> BonResult:
    """Pick the row passing the most generated tests; ties go to the lowest row.

    ``selected_is_correct`` is filled from the ground-truth columns when the
    matrix has any, else left None (pure inference mode).
    """
    if matrix.m == 0:
        raise NoGeneratedTests(f"task {matrix.task_id}: selection needs generated tests")
    scores = matrix.generated_bits.sum(axis=1)
    selected = int(np.argmax(scores))
    correct: Optional[bool] = None
    if matrix.t_q > 0:
        correct = bool(correctness_vector(matrix).flags[selected])
    return BonResult(
        task_id=matrix.task_id,
        selected_row=selected,
        scores=tuple(int(s) for s in scores),
        selected_is_correct=correct,
    )


def grid_eval(
    matrix: ExecutionMatrix,
    n_list: Sequence[int],
    m_list: Sequence[int],
    trials: int,
    seed: int,
) -> dict[tuple[int, int], float]:
    """Mean selection correctness for each (rows, generated-columns) subsample size.

    Rows and columns are drawn without replacement with a generator derived
    from (seed, trial, n_sub, m_sub), so results are reproducible regardless
    of evaluation order or parallelism.  Sampled indices keep their original
    order, preserving the earliest-candidate tie-break.
    """
    if matrix.t_q == 0:
        raise GroundTruthMissing(f"task {matrix.task_id}: grid needs correctness labels")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    for n_sub in n_list:
        if not 1 <= n_sub <= matrix.n:
            raise SubsampleTooLarge(f"n_sub={n_sub} outside [1, {matrix.n}]")
    for m_sub in m_list:
        if not 1 <= m_sub <= matrix.m:
            raise SubsampleTooLarge(f"m_sub={m_sub} outside [1, {matrix.m}]")

    flags = correctness_vector(matrix).as_array()
    generated = matrix.generated_bits
    table: dict[tuple[int, int], float] = {}
    for n_sub in n_list:
        for m_sub in m_list:
            hits = 0
            for trial in range(trials):
                rng = np.random.default_rng([seed, trial, n_sub, m_sub])
                rows = np.sort(rng.choice(matrix.n, size=n_sub, replace=False))
                cols = np.sort(rng.choice(matrix.m, size=m_sub, replace=False))
                scores = generated[np.ix_(rows, cols)].sum(axis=1)
                hits += int(flags[rows[int(np.argmax(scores))]])
            table[(int(n_sub), int(m_sub))] = hits / trials
    return table


def grid_eval_cell_via_submatrix(
    matrix: ExecutionMatrix, rows: Sequence[int], cols: Sequence[int]
) -> bool:
    """One grid draw evaluated through an explicit submatrix (cross-check path)."""
    sub = submatrix(matrix, sorted(rows), sorted(cols))
    result = select_best(sub)
    return bool(result.selected_is_correct)


def ut_accuracy(
    tests: Sequence[CandidateRecord],
    gt_code: Optional[str],
    spec: RunSpec,
) -> float:
    """Fraction of generated tests whose expected output the reference code
    reproduces; formatting-failed tests count against the denominator."""
    if not gt_code:
        raise GroundTruthMissing("unit-test accuracy needs a reference solution")
    if not tests:
        return 0.0
    hits = 0
    for record in tests:
        if not record.valid:
            continue
        outcome = run_one(gt_code, record.parsed.input, spec)
        hits += judge(outcome, record.parsed.expected_output)
    return hits / len(tests)


def code_accuracy(matrix: ExecutionMatrix) -> float:
    """Fraction of solution rows passing all ground-truth columns."""
    flags = correctness_vector(matrix)
    return sum(flags.flags) / len(flags.flags)


def estimated_test_validity(matrix: ExecutionMatrix) -> float:
    """Fraction of generated tests that pass every correct solution.

    A matrix-only stand-in for unit-test accuracy when no reference code is
    available to execute.
    """
    from .rewards import unit_test_reward_simple

    if matrix.m == 0:
        raise NoGeneratedTests(f"task {matrix.task_id}: no generated-test columns")
    return sum(unit_test_reward_simple(matrix, k) for k in range(matrix.m)) / matrix.m
