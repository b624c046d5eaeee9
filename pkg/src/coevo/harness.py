"""Run candidate programs against test inputs and fill the execution matrix.

Candidates are opaque scripts handed to an external interpreter.  Each run
gets a fresh temp directory, capped output capture, and a process-tree kill
on timeout.  There is no hardened sandbox; inputs are desk-scale and trusted.
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import CandidateRecord, ExecutionMatrix, KIND_CODE, KIND_TEST, Task, TestCase
from .errors import InterpreterMissing, NoValidCandidates, SpawnError

PROGRAM_PLACEHOLDER = "{program}"
DEFAULT_TIMEOUT_MS = 5000
DEFAULT_MAX_OUTPUT_BYTES = 1 << 20

_READ_CHUNK = 1 << 16


@dataclass(frozen=True)
class RunSpec:
    """How to launch one candidate program."""

    command_template: tuple[str, ...] = ("python3", PROGRAM_PLACEHOLDER)
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_output_bytes: int = DEFAULT_MAX_OUTPUT_BYTES
    working_dir_policy: str = "fresh_temp_per_run"
    program_filename: str = "prog.py"

    def __post_init__(self):
        object.__setattr__(self, "command_template", tuple(self.command_template))
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.max_output_bytes <= 0:
            raise ValueError("max_output_bytes must be > 0")
        if self.working_dir_policy != "fresh_temp_per_run":
            raise ValueError(f"unsupported working_dir_policy {self.working_dir_policy!r}")
        if PROGRAM_PLACEHOLDER not in self.command_template:
            raise ValueError(f"command_template must contain {PROGRAM_PLACEHOLDER!r}")

    def command_for(self, program_path: str) -> list[str]:
        return [
            program_path if part == PROGRAM_PLACEHOLDER else part
            for part in self.command_template
        ]


@dataclass(frozen=True)
class RunOutcome:
    """Captured streams and exit state of one run."""

    stdout: bytes
    stderr: bytes
    exit_status: Optional[int]
    duration_ms: int
    timed_out: bool
    stdout_truncated: bool = False
    stderr_truncated: bool = False


def _drain(stream, cap: int, sink: bytearray, truncated: threading.Event) -> None:
    # Keep reading past the cap so the child never blocks on a full pipe.
    while True:
        chunk = stream.read(_READ_CHUNK)
        if not chunk:
            return
        if len(sink) < cap:
            sink.extend(chunk[: cap - len(sink)])
            if len(sink) >= cap:
                truncated.set()
        else:
            truncated.set()


def _feed_stdin(proc: subprocess.Popen, payload: bytes) -> None:
    try:
        proc.stdin.write(payload)
        proc.stdin.close()
    except (BrokenPipeError, OSError):
        pass


def _kill_tree(proc: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError, OSError):
        proc.kill()


def run_one(code: str, input_text: str, spec: RunSpec) -> RunOutcome:
    """Execute one program against one stdin payload under the given limits."""
    if not code:
        raise ValueError("code must be non-empty")
    with tempfile.TemporaryDirectory(prefix="coevo-run-") as workdir:
        program_path = os.path.join(workdir, spec.program_filename)
        with open(program_path, "w", encoding="utf-8") as fh:
            fh.write(code)
        command = spec.command_for(program_path)
        start = time.monotonic()
        try:
            proc = subprocess.Popen(
                command,
                cwd=workdir,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                start_new_session=True,
            )
        except FileNotFoundError as exc:
            if shutil.which(command[0]) is None:
                raise InterpreterMissing(f"interpreter not found: {command[0]!r}") from exc
            raise SpawnError(f"failed to spawn {command!r}: {exc}") from exc
        except OSError as exc:
            raise SpawnError(f"failed to spawn {command!r}: {exc}") from exc

        out_buf, err_buf = bytearray(), bytearray()
        out_trunc, err_trunc = threading.Event(), threading.Event()
        threads = [
            threading.Thread(target=_feed_stdin, args=(proc, input_text.encode("utf-8"))),
            threading.Thread(target=_drain, args=(proc.stdout, spec.max_output_bytes, out_buf, out_trunc)),
            threading.Thread(target=_drain, args=(proc.stderr, spec.max_output_bytes, err_buf, err_trunc)),
        ]
        for t in threads:
            t.daemon = True
            t.start()

        timed_out = False
        try:
            proc.wait(timeout=spec.timeout_ms / 1000.0)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_tree(proc)
            proc.wait()
        for t in threads:
            t.join()
        duration_ms = int((time.monotonic() - start) * 1000)
        return RunOutcome(
            stdout=bytes(out_buf),
            stderr=bytes(err_buf),
            exit_status=proc.returncode,
            duration_ms=duration_ms,
            timed_out=timed_out,
            stdout_truncated=out_trunc.is_set(),
            stderr_truncated=err_trunc.is_set(),
        )


def _normalize_output(text: str) -> str:
    lines = [line.rstrip() for line in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def judge(outcome: RunOutcome, expected: str) -> int:
    """1 iff the run finished cleanly and its stdout matches ``expected``.

    Matching is normalized-exact: lossy UTF-8 decode, trailing whitespace
    stripped per line, trailing empty lines dropped.  A timeout or nonzero
    exit is a fail regardless of output.
    """
    if outcome.timed_out or outcome.exit_status != 0:
        return 0
    produced = outcome.stdout.decode("utf-8", errors="replace")
    return int(_normalize_output(produced) == _normalize_output(expected))


def _sorted_valid(records: Sequence[CandidateRecord], kind: str) -> list[CandidateRecord]:
    return sorted((r for r in records if r.kind == kind and r.valid), key=lambda r: r.index)


def build_matrix(
    task: Task,
    codes: Sequence[CandidateRecord],
    tests: Sequence[CandidateRecord],
    spec: RunSpec,
    workers: Optional[int] = None,
) -> ExecutionMatrix:
    """Run every valid code against every column and collect the bit grid.

    Rows are valid codes in index order; columns are valid generated tests in
    index order followed by the task's ground-truth tests.  Cells may execute
    in any order or parallelism; the result is joined by (row, column) so the
    matrix is deterministic for deterministic programs.
    """
    valid_codes = _sorted_valid(codes, KIND_CODE)
    if not valid_codes:
        raise NoValidCandidates(f"task {task.id}: no valid code candidates")
    valid_tests = _sorted_valid(tests, KIND_TEST)
    columns: list[TestCase] = [t.parsed for t in valid_tests] + list(task.gt_tests)

    n = len(valid_codes)
    total_cols = len(columns)
    bits = np.zeros((n, total_cols), dtype=np.int8)

    def run_cell(cell: tuple[int, int]) -> tuple[int, int, int]:
        row, col = cell
        outcome = run_one(valid_codes[row].parsed, columns[col].input, spec)
        return row, col, judge(outcome, columns[col].expected_output)

    cells = [(r, c) for r in range(n) for c in range(total_cols)]
    if cells:
        max_workers = workers or os.cpu_count() or 1
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for row, col, bit in pool.map(run_cell, cells):
                bits[row, col] = bit

    return ExecutionMatrix(
        task_id=task.id,
        bits=bits,
        m=len(valid_tests),
        t_q=len(task.gt_tests),
        code_index_map=tuple(c.index for c in valid_codes),
        test_index_map=tuple(t.index for t in valid_tests),
    )


def default_python_spec(**overrides) -> RunSpec:
    """RunSpec pointed at the interpreter running this process."""
    overrides.setdefault("command_template", (sys.executable, PROGRAM_PLACEHOLDER))
    return RunSpec(**overrides)
