import numpy as np
import pytest

from coevo.core import (
    CandidateRecord,
    ExecutionMatrix,
    Task,
    TestCase,
    correctness_vector,
    submatrix,
)
from coevo.errors import GroundTruthMissing, ShapeError


def matrix_of(rows, m, t_q, **kwargs):
    return ExecutionMatrix(task_id="t", bits=rows, m=m, t_q=t_q, **kwargs)


class TestCorrectnessVector:
    def test_all_ground_truth_pass(self):
        m = matrix_of([[0, 1, 1]], m=1, t_q=2)
        assert correctness_vector(m).flags == (1,)

    def test_any_ground_truth_failure_kills_flag(self):
        m = matrix_of([[1, 1, 0]], m=1, t_q=2)
        assert correctness_vector(m).flags == (0,)

    def test_three_rows_hand_evaluated(self):
        # Product over ground-truth cells per row: [1,1] -> 1, [0,1] -> 0, [1,1] -> 1.
        m = matrix_of([[0, 1, 1], [1, 0, 1], [0, 1, 1]], m=1, t_q=2)
        assert correctness_vector(m).flags == (1, 0, 1)

    def test_requires_ground_truth_columns(self):
        m = matrix_of([[1, 0]], m=2, t_q=0)
        with pytest.raises(GroundTruthMissing):
            correctness_vector(m)

    def test_counts(self):
        vec = correctness_vector(matrix_of([[1], [0], [1]], m=0, t_q=1))
        assert vec.num_correct == 2
        assert vec.num_incorrect == 1

    def test_invariant_under_generated_column_permutation(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            bits = rng.integers(0, 2, size=(5, 7))
            m = matrix_of(bits, m=4, t_q=3)
            base = correctness_vector(m).flags
            perm = rng.permutation(4)
            shuffled = np.concatenate([bits[:, perm], bits[:, 4:]], axis=1)
            assert correctness_vector(matrix_of(shuffled, m=4, t_q=3)).flags == base


class TestExecutionMatrix:
    def test_rejects_non_binary_entries(self):
        with pytest.raises(ValueError):
            matrix_of([[0, 2]], m=1, t_q=1)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ShapeError):
            matrix_of([[1, 0]], m=2, t_q=1)

    def test_rejects_empty(self):
        with pytest.raises(ShapeError):
            ExecutionMatrix(task_id="t", bits=np.zeros((0, 2)), m=1, t_q=1)

    def test_rejects_bad_maps(self):
        with pytest.raises(ShapeError):
            matrix_of([[1, 1]], m=1, t_q=1, code_index_map=(0, 1))
        with pytest.raises(ShapeError):
            matrix_of([[1, 1], [0, 1]], m=1, t_q=1, code_index_map=(2, 2))

    def test_identity_maps_by_default(self):
        m = matrix_of([[1, 0, 1], [0, 0, 1]], m=2, t_q=1)
        assert m.code_index_map == (0, 1)
        assert m.test_index_map == (0, 1)

    def test_bits_are_read_only(self):
        m = matrix_of([[1, 0]], m=1, t_q=1)
        with pytest.raises(ValueError):
            m.bits[0, 0] = 0

    def test_generated_and_gt_views(self):
        m = matrix_of([[1, 0, 1]], m=2, t_q=1)
        assert m.generated_bits.tolist() == [[1, 0]]
        assert m.gt_bits.tolist() == [[1]]

    def test_zero_column_matrix_allowed(self):
        m = matrix_of(np.zeros((2, 0), dtype=int), m=0, t_q=0)
        assert m.n == 2


class TestSubmatrix:
    def test_picks_rows_and_columns_keeping_gt(self):
        bits = [[1, 0, 1, 1], [0, 1, 1, 0], [1, 1, 0, 1]]
        m = matrix_of(bits, m=3, t_q=1)
        sub = submatrix(m, rows=[0, 2], generated_columns=[1, 2])
        assert sub.bits.tolist() == [[0, 1, 1], [1, 0, 1]]
        assert sub.code_index_map == (0, 2)
        assert sub.test_index_map == (1, 2)
        assert sub.t_q == 1


class TestCandidateRecord:
    def test_valid_must_mirror_parsed(self):
        with pytest.raises(ValueError):
            CandidateRecord("t", "code", 0, "raw", None, 1, True)
        with pytest.raises(ValueError):
            CandidateRecord("t", "code", 0, "raw", "print(1)", 1, False)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            CandidateRecord("t", "spec", 0, "raw", None, 1, False)

    def test_test_kind_payload(self):
        rec = CandidateRecord("t", "test", 0, "raw", TestCase("1", "2"), 1, True)
        assert rec.parsed.expected_output == "2"


class TestTask:
    def test_t_q_counts_ground_truth(self):
        task = Task(id="x", description="d", gt_tests=(TestCase("a", "b"),))
        assert task.t_q == 1

    def test_gt_tests_coerced_to_tuple(self):
        task = Task(id="x", description="d", gt_tests=[TestCase("a", "b")])
        assert isinstance(task.gt_tests, tuple)
