"""Extract code and test payloads from raw model responses.

Both extractors take the LAST well-formed occurrence in a response: prompts
ask for the final answer at the end, so earlier blocks are scratch work.
Block contents are kept byte-exact except for the single trailing newline
added by the closing fence line.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .core import CandidateRecord, KIND_CODE, KIND_TEST, TestCase
from .errors import UnsupportedShape

TEST_INPUT_MARKER = "**Test Input:**"
TEST_OUTPUT_MARKER = "**Test Output:**"
DEFAULT_THINK_DELIMITERS = ("<think>", "</think>")

_FENCE_RE = re.compile(r"```(.*?)```", re.DOTALL)


class ParseFailure(enum.Enum):
    NO_CODE_BLOCK = "no_code_block"
    MISSING_TEST_INPUT_MARKER = "missing_test_input_marker"
    MISSING_TEST_OUTPUT_MARKER = "missing_test_output_marker"
    EMPTY_BLOCK = "empty_block"


@dataclass(frozen=True)
class ParseOutcome:
    """Either a payload (code text or TestCase) or a failure reason, never both."""

    payload: Union[str, TestCase, None] = None
    failure: Optional[ParseFailure] = None

    def __post_init__(self):
        if (self.payload is None) == (self.failure is None):
            raise ValueError("exactly one of payload/failure must be set")

    @property
    def ok(self) -> bool:
        return self.failure is None


def _block_content(inner: str) -> str:
    """Normalize the text between a pair of fences.

    With a newline present, everything before the first newline is the
    opening-fence info string (language tag) and is dropped; inline blocks
    (no newline) are taken whole.  Exactly one trailing newline is stripped.
    """
    if "\n" in inner:
        _, inner = inner.split("\n", 1)
    if inner.endswith("\n"):
        inner = inner[:-1]
    return inner


def _fenced_blocks(text: str) -> list[tuple[int, int, str]]:
    """All fenced blocks as (start, end, content), in order of appearance."""
    return [(m.start(), m.end(), _block_content(m.group(1))) for m in _FENCE_RE.finditer(text)]


def extract_code(raw: str) -> ParseOutcome:
    """Pull the program out of the last fenced code block of a response."""
    blocks = _fenced_blocks(raw)
    if not blocks:
        return ParseOutcome(failure=ParseFailure.NO_CODE_BLOCK)
    content = blocks[-1][2]
    if content == "":
        return ParseOutcome(failure=ParseFailure.EMPTY_BLOCK)
    return ParseOutcome(payload=content)


def _first_block_after(blocks: list[tuple[int, int, str]], position: int):
    for block in blocks:
        if block[0] >= position:
            return block
    return None


def extract_test(
    raw: str,
    think_delimiters: tuple[str, str] = DEFAULT_THINK_DELIMITERS,
) -> ParseOutcome:
    """Pull the final input/output test example out of a response.

    If the response carries a think section (both delimiters present), only
    the text after the final closing delimiter is searched.  The last
    "**Test Input:**" marker followed by a fenced block wins; the matching
    "**Test Output:**" block must come after it.
    """
    open_tag, close_tag = think_delimiters
    region = raw
    if open_tag in raw and close_tag in raw:
        region = raw[raw.rindex(close_tag) + len(close_tag) :]

    blocks = _fenced_blocks(region)
    input_positions = [m.start() for m in re.finditer(re.escape(TEST_INPUT_MARKER), region)]
    if not input_positions:
        return ParseOutcome(failure=ParseFailure.MISSING_TEST_INPUT_MARKER)

    saw_input_block = False
    saw_output_marker = False
    empty_seen = False
    for pos in reversed(input_positions):
        input_block = _first_block_after(blocks, pos + len(TEST_INPUT_MARKER))
        if input_block is None:
            continue
        saw_input_block = True
        output_marker = region.find(TEST_OUTPUT_MARKER, input_block[1])
        if output_marker < 0:
            continue
        saw_output_marker = True
        output_block = _first_block_after(blocks, output_marker + len(TEST_OUTPUT_MARKER))
        if output_block is None:
            continue
        if input_block[2] == "" or output_block[2] == "":
            empty_seen = True
            continue
        return ParseOutcome(payload=TestCase(input=input_block[2], expected_output=output_block[2]))

    if empty_seen:
        return ParseOutcome(failure=ParseFailure.EMPTY_BLOCK)
    if saw_input_block:
        return ParseOutcome(failure=ParseFailure.MISSING_TEST_OUTPUT_MARKER)
    return ParseOutcome(failure=ParseFailure.MISSING_TEST_INPUT_MARKER)


def _render_scalar(value) -> str:
    if isinstance(value, (list, tuple)):
        raise UnsupportedShape("lists nested deeper than one level are not encodable")
    if isinstance(value, str):
        return value
    return str(value)


def stdio_encode(values: Sequence) -> str:
    """Flatten functional-call arguments into stdin text.

    Each value becomes one line; list values are joined by single spaces;
    scalars render verbatim.  No trailing newline is added.
    """
    lines = []
    for value in values:
        if isinstance(value, (list, tuple)):
            lines.append(" ".join(_render_scalar(item) for item in value))
        else:
            lines.append(_render_scalar(value))
    return "\n".join(lines)


def parse_candidate(
    task_id: str,
    kind: str,
    index: int,
    raw: str,
    length_units: Optional[int] = None,
    think_delimiters: tuple[str, str] = DEFAULT_THINK_DELIMITERS,
) -> CandidateRecord:
    """Build a CandidateRecord by running the extractor for ``kind`` over ``raw``.

    ``length_units`` defaults to the whitespace-token count of the raw
    response when the provider did not report a token count.
    """
    if kind == KIND_CODE:
        outcome = extract_code(raw)
    elif kind == KIND_TEST:
        outcome = extract_test(raw, think_delimiters=think_delimiters)
    else:
        raise ValueError(f"unknown candidate kind {kind!r}")
    if length_units is None:
        length_units = len(raw.split())
    return CandidateRecord(
        task_id=task_id,
        kind=kind,
        index=index,
        raw=raw,
        parsed=outcome.payload,
        length_units=length_units,
        valid=outcome.ok,
    )
