import sys

import pytest

from coevo.core import Task, TestCase
from coevo.harness import PROGRAM_PLACEHOLDER, RunSpec
from coevo.parsing import parse_candidate


@pytest.fixture(scope="session")
def py_spec():
    """RunSpec pointing at the interpreter running the tests."""
    return RunSpec(command_template=(sys.executable, PROGRAM_PLACEHOLDER), timeout_ms=10000)


def code_response(source: str, prose: str = "Let me solve this step by step.") -> str:
    """Wrap program source the way a model response would."""
    return f"{prose}\n```python\n{source}\n```\n"


def test_response(test_input: str, test_output: str, think: str = "") -> str:
    """Wrap a test example in the expected output format."""
    prefix = f"<think>\n{think}\n</think>\n\n" if think else ""
    return (
        f"{prefix}**Test Input:**\n```\n{test_input}\n```\n\n"
        f"**Test Output:**\n```\n{test_output}\n```\n\n"
        "**Explanation:**\nworked out by hand.\n"
    )


def make_code(task_id: str, index: int, source: str):
    return parse_candidate(task_id, "code", index, code_response(source))


def make_test(task_id: str, index: int, test_input: str, test_output: str):
    return parse_candidate(task_id, "test", index, test_response(test_input, test_output))


def make_invalid(task_id: str, kind: str, index: int):
    return parse_candidate(task_id, kind, index, "no structured payload here")


ADD_SOURCE = "a, b = map(int, input().split())\nprint(a + b)"
SUB_SOURCE = "a, b = map(int, input().split())\nprint(a - b)"
ECHO_SOURCE = "print(input())"
DOUBLE_SOURCE = "print(int(input()) * 2)"
CONST_ZERO_SOURCE = "input()\nprint(0)"


def three_task_fixture():
    """Three small tasks plus code/test candidates, some deliberately broken."""
    tasks = [
        Task(
            id="add",
            description="Read two integers from one line and print their sum.",
            gt_tests=(TestCase("1 2", "3"), TestCase("10 5", "15")),
            gt_code=ADD_SOURCE,
        ),
        Task(
            id="echo",
            description="Read one line and print it back.",
            gt_tests=(TestCase("hi", "hi"),),
            gt_code=ECHO_SOURCE,
        ),
        Task(
            id="double",
            description="Read an integer and print twice its value.",
            gt_tests=(TestCase("4", "8"),),
            gt_code=DOUBLE_SOURCE,
        ),
    ]
    codes = [
        make_code("add", 0, ADD_SOURCE),
        make_code("add", 1, SUB_SOURCE),
        make_invalid("add", "code", 2),
        make_code("echo", 0, ECHO_SOURCE),
        make_code("double", 0, DOUBLE_SOURCE),
        make_code("double", 1, CONST_ZERO_SOURCE),
    ]
    tests = [
        make_test("add", 0, "2 3", "5"),
        make_test("add", 1, "2 2", "0"),  # wrong: favors the subtractor
        make_invalid("add", "test", 2),
        make_test("echo", 0, "yo", "yo"),
        make_test("double", 0, "3", "6"),
    ]
    return tasks, codes, tests
