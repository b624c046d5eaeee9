"""Core domain types: tasks, candidates, and the binary execution matrix.

The execution matrix records which candidate solutions pass which tests.
Generated-test columns come first, ground-truth columns last; every other
module consumes this layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import GroundTruthMissing, ShapeError

KIND_CODE = "code"
KIND_TEST = "test"
CANDIDATE_KINDS = (KIND_CODE, KIND_TEST)


@dataclass(frozen=True)
class TestCase:
    """One stdin payload and the stdout it should produce, stored byte-exact."""

    __test__ = False  # domain type, not a pytest class

    input: str
    expected_output: str

    def __post_init__(self):
        if not isinstance(self.input, str) or not isinstance(self.expected_output, str):
            raise TypeError("TestCase fields must be str")


@dataclass(frozen=True)
class Task:
    """A coding problem with its ground-truth tests and optional reference code."""

    id: str
    description: str
    gt_tests: tuple[TestCase, ...] = ()
    gt_code: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "gt_tests", tuple(self.gt_tests))

    @property
    def t_q(self) -> int:
        return len(self.gt_tests)


@dataclass(frozen=True)
class CandidateRecord:
    """One raw model response plus its parse outcome.

    ``valid`` is true exactly when ``parsed`` is present.  Indices within one
    (task_id, kind) group are expected to be distinct and contiguous from 0.
    """

    task_id: str
    kind: str
    index: int
    raw: str
    parsed: Union[str, TestCase, None]
    length_units: int
    valid: bool

    def __post_init__(self):
        if self.kind not in CANDIDATE_KINDS:
            raise ValueError(f"unknown candidate kind {self.kind!r}")
        if self.index < 0:
            raise ValueError("candidate index must be >= 0")
        if self.length_units < 0:
            raise ValueError("length_units must be >= 0")
        if self.valid != (self.parsed is not None):
            raise ValueError("valid flag must mirror presence of parsed payload")


@dataclass(frozen=True, eq=False)
class ExecutionMatrix:
    """Binary pass/fail grid of n solutions against (m generated + t_q ground-truth) tests.

    Rows follow code-candidate index order, generated-test columns follow
    test-candidate index order, ground-truth columns sit last.  The index maps
    translate row / generated-column positions back to candidate indices.
    Instances are immutable; the bit grid is marked read-only.
    """

    task_id: str
    bits: np.ndarray
    m: int
    t_q: int
    code_index_map: tuple[int, ...] = field(default=None)  # type: ignore[assignment]
    test_index_map: tuple[int, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ShapeError("bits must be a 2-D array")
        if bits.shape[0] < 1:
            raise ShapeError("matrix needs at least one solution row")
        if self.m < 0 or self.t_q < 0:
            raise ShapeError("column counts must be >= 0")
        if bits.shape[1] != self.m + self.t_q:
            raise ShapeError(
                f"bits has {bits.shape[1]} columns, expected m + t_q = {self.m + self.t_q}"
            )
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise ValueError("bits entries must be 0 or 1")
        bits = bits.astype(np.int8, copy=True)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

        code_map = self.code_index_map
        if code_map is None:
            code_map = tuple(range(bits.shape[0]))
        code_map = tuple(int(i) for i in code_map)
        test_map = self.test_index_map
        if test_map is None:
            test_map = tuple(range(self.m))
        test_map = tuple(int(i) for i in test_map)
        for name, mapping, expected in (
            ("code_index_map", code_map, bits.shape[0]),
            ("test_index_map", test_map, self.m),
        ):
            if len(mapping) != expected:
                raise ShapeError(f"{name} must have {expected} entries")
            if len(set(mapping)) != len(mapping) or any(i < 0 for i in mapping):
                raise ShapeError(f"{name} entries must be distinct and >= 0")
        object.__setattr__(self, "code_index_map", code_map)
        object.__setattr__(self, "test_index_map", test_map)

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def generated_bits(self) -> np.ndarray:
        """Columns for generated tests only (read-only view)."""
        return self.bits[:, : self.m]

    @property
    def gt_bits(self) -> np.ndarray:
        """Columns for ground-truth tests only (read-only view)."""
        return self.bits[:, self.m :]


@dataclass(frozen=True)
class CorrectnessVector:
    """Per-solution correctness: 1 iff the row passes every ground-truth column."""

    flags: tuple[int, ...]

    @property
    def num_correct(self) -> int:
        return sum(self.flags)

    @property
    def num_incorrect(self) -> int:
        return len(self.flags) - sum(self.flags)

    def as_array(self) -> np.ndarray:
        return np.array(self.flags, dtype=np.int8)


def correctness_vector(matrix: ExecutionMatrix) -> CorrectnessVector:
    """Label each solution row by whether it passes all ground-truth columns."""
    if matrix.t_q == 0:
        raise GroundTruthMissing(
            f"task {matrix.task_id}: correctness needs at least one ground-truth column"
        )
    flags = matrix.gt_bits.all(axis=1).astype(int)
    return CorrectnessVector(flags=tuple(int(f) for f in flags))


def submatrix(
    matrix: ExecutionMatrix,
    rows: Sequence[int],
    generated_columns: Sequence[int],
) -> ExecutionMatrix:
    """Restrict to the given rows and generated columns, keeping all ground-truth columns."""
    rows = list(rows)
    cols = list(generated_columns)
    picked = np.concatenate(
        [
            matrix.generated_bits[np.ix_(rows, cols)] if cols else np.zeros((len(rows), 0), np.int8),
            matrix.gt_bits[rows, :],
        ],
        axis=1,
    )
    return ExecutionMatrix(
        task_id=matrix.task_id,
        bits=picked,
        m=len(cols),
        t_q=matrix.t_q,
        code_index_map=tuple(matrix.code_index_map[r] for r in rows),
        test_index_map=tuple(matrix.test_index_map[c] for c in cols),
    )
