"""Line-delimited JSON artifact formats: tasks, candidates, matrices, rewards.

Every record carries a "schema" field.  Serialization is deterministic
(fixed key order, compact separators) so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence, Union

from .core import CandidateRecord, ExecutionMatrix, KIND_TEST, Task, TestCase
from .errors import ShapeError
from .parsing import stdio_encode
from .rewards import RewardSet

SCHEMA_TASKS = "coevo/tasks/v1"
SCHEMA_CANDIDATES = "coevo/candidates/v1"
SCHEMA_MATRIX = "coevo/matrix/v1"
SCHEMA_REWARDS = "coevo/rewards/v1"


def write_jsonl(path: Union[str, Path], records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path: Union[str, Path]) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: bad JSON line: {exc}") from exc
    return records


def _test_case_from_record(record: dict) -> TestCase:
    if "input_values" in record or "output_values" in record:
        # Functional-form fixture: encode arguments and outputs to stdio text.
        return TestCase(
            input=stdio_encode(record.get("input_values", [])),
            expected_output=stdio_encode(record.get("output_values", [])),
        )
    return TestCase(input=record["input"], expected_output=record["expected_output"])


def task_to_record(task: Task) -> dict:
    record = {
        "schema": SCHEMA_TASKS,
        "id": task.id,
        "description": task.description,
        "gt_tests": [
            {"input": t.input, "expected_output": t.expected_output} for t in task.gt_tests
        ],
    }
    if task.gt_code is not None:
        record["gt_code"] = task.gt_code
    return record


def task_from_record(record: dict) -> Task:
    return Task(
        id=str(record["id"]),
        description=record.get("description", ""),
        gt_tests=tuple(_test_case_from_record(t) for t in record.get("gt_tests", [])),
        gt_code=record.get("gt_code"),
    )


def read_tasks(path: Union[str, Path]) -> list[Task]:
    return [task_from_record(r) for r in read_jsonl(path)]


def write_tasks(path: Union[str, Path], tasks: Iterable[Task]) -> None:
    write_jsonl(path, (task_to_record(t) for t in tasks))


def candidate_to_record(candidate: CandidateRecord) -> dict:
    record = {
        "schema": SCHEMA_CANDIDATES,
        "task_id": candidate.task_id,
        "kind": candidate.kind,
        "index": candidate.index,
        "raw": candidate.raw,
        "valid": candidate.valid,
        "length_units": candidate.length_units,
    }
    if candidate.valid:
        payload = candidate.parsed
        if isinstance(payload, TestCase):
            record["parsed"] = {"input": payload.input, "expected_output": payload.expected_output}
        else:
            record["parsed"] = payload
    return record


def candidate_from_record(record: dict) -> CandidateRecord:
    parsed = record.get("parsed")
    if record.get("kind") == KIND_TEST and isinstance(parsed, dict):
        parsed = TestCase(input=parsed["input"], expected_output=parsed["expected_output"])
    return CandidateRecord(
        task_id=str(record["task_id"]),
        kind=record["kind"],
        index=int(record["index"]),
        raw=record.get("raw", ""),
        parsed=parsed,
        length_units=int(record.get("length_units", 0)),
        valid=bool(record.get("valid", parsed is not None)),
    )


def read_candidates(path: Union[str, Path]) -> list[CandidateRecord]:
    return [candidate_from_record(r) for r in read_jsonl(path)]


def write_candidates(path: Union[str, Path], candidates: Iterable[CandidateRecord]) -> None:
    write_jsonl(path, (candidate_to_record(c) for c in candidates))


def group_candidates(
    candidates: Iterable[CandidateRecord],
) -> dict[tuple[str, str], list[CandidateRecord]]:
    """Bucket candidates by (task_id, kind), each bucket sorted by index."""
    groups: dict[tuple[str, str], list[CandidateRecord]] = {}
    for candidate in candidates:
        groups.setdefault((candidate.task_id, candidate.kind), []).append(candidate)
    for bucket in groups.values():
        bucket.sort(key=lambda c: c.index)
    return groups


def matrix_to_record(matrix: ExecutionMatrix) -> dict:
    return {
        "schema": SCHEMA_MATRIX,
        "task_id": matrix.task_id,
        "n": matrix.n,
        "m": matrix.m,
        "t_q": matrix.t_q,
        "rows": ["".join(str(int(b)) for b in row) for row in matrix.bits],
    }


def matrix_from_record(record: dict) -> ExecutionMatrix:
    """Rebuild a matrix from its file record.

    The file format does not carry candidate index maps; rows and generated
    columns get identity maps.  Rebind maps from a candidates file (see
    ``candidate_maps``) when reward alignment matters.
    """
    n, m, t_q = int(record["n"]), int(record["m"]), int(record["t_q"])
    rows = record["rows"]
    if len(rows) != n:
        raise ShapeError(f"matrix record for {record.get('task_id')}: {len(rows)} rows vs n={n}")
    bits = [[int(ch) for ch in row] for row in rows]
    for row in bits:
        if len(row) != m + t_q:
            raise ShapeError("matrix record row length disagrees with m + t_q")
    return ExecutionMatrix(task_id=str(record["task_id"]), bits=bits, m=m, t_q=t_q)


def read_matrices(path: Union[str, Path]) -> list[ExecutionMatrix]:
    return [matrix_from_record(r) for r in read_jsonl(path)]


def write_matrices(path: Union[str, Path], matrices: Iterable[ExecutionMatrix]) -> None:
    write_jsonl(path, (matrix_to_record(m) for m in matrices))


def candidate_maps(
    candidates: Sequence[CandidateRecord],
) -> tuple[tuple[int, ...], int]:
    """(valid candidate indices in order, total group size) for one bucket.

    Indices are normally contiguous from 0; a sparse file still yields a
    group large enough to place every index.
    """
    ordered = sorted(candidates, key=lambda c: c.index)
    valid = tuple(c.index for c in ordered if c.valid)
    total = max(len(ordered), ordered[-1].index + 1) if ordered else 0
    return valid, total


def rewardset_to_record(rewards: RewardSet) -> dict:
    return {
        "schema": SCHEMA_REWARDS,
        "task_id": rewards.task_id,
        "kind": rewards.kind,
        "rewards": [float(r) for r in rewards.rewards],
        "advantages": [float(a) for a in rewards.advantages],
        "transform_applied": rewards.transform_applied,
    }


def rewardset_from_record(record: dict) -> RewardSet:
    return RewardSet(
        task_id=str(record["task_id"]),
        kind=record["kind"],
        rewards=tuple(record["rewards"]),
        advantages=tuple(record["advantages"]),
        transform_applied=bool(record.get("transform_applied", False)),
    )


def read_rewardsets(path: Union[str, Path]) -> list[RewardSet]:
    return [rewardset_from_record(r) for r in read_jsonl(path)]


def write_rewardsets(path: Union[str, Path], rewardsets: Iterable[RewardSet]) -> None:
    write_jsonl(path, (rewardset_to_record(r) for r in rewardsets))
