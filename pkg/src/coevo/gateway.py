"""Optional client for chat-completions endpoints.

Produces candidate records from a live model using the stock prompt
templates.  Everything downstream works from candidate files, so this module
is never required for offline pipelines.
"""

from __future__ import annotations

import logging
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import httpx

from .core import CandidateRecord, KIND_CODE, KIND_TEST, Task
from .errors import AuthError, GatewayError, PromptError
from .parsing import parse_candidate

logger = logging.getLogger(__name__)

PROBLEM_PLACEHOLDER = "{{problem}}"
_RETRYABLE_STATUS = (408, 409, 429, 500, 502, 503, 504)


@dataclass(frozen=True)
class SamplingConfig:
    """Decoding settings for one generation batch."""

    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: Optional[int] = None
    num_samples: int = 16

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must lie in (0, 1]")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")

    @classmethod
    def for_long_cot(cls, **overrides) -> "SamplingConfig":
        overrides.setdefault("temperature", 0.8)
        return cls(**overrides)


@dataclass(frozen=True)
class ProviderConfig:
    """Where and how to reach the completion endpoint.

    The API key is read from the environment variable named by
    ``api_key_env`` at request time and never persisted.
    """

    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    request_timeout_ms: int = 60000
    max_retries: int = 3
    concurrent_request_limit: int = 4
    use_n_parameter: bool = True

    def __post_init__(self):
        if self.request_timeout_ms <= 0:
            raise ValueError("request_timeout_ms must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.concurrent_request_limit < 1:
            raise ValueError("concurrent_request_limit must be >= 1")


def _load_template(name: str) -> str:
    return resources.files("coevo").joinpath("templates", name).read_text(encoding="utf-8")


def _render(template_name: str, task: Task) -> str:
    if not task.description or not task.description.strip():
        raise PromptError(f"task {task.id}: empty problem description")
    return _load_template(template_name).replace(PROBLEM_PLACEHOLDER, task.description)


def render_code_prompt(task: Task) -> str:
    """Fill the code-generation template with the task's problem text."""
    return _render("code_prompt.txt", task)


def render_test_prompt(task: Task) -> str:
    """Fill the test-generation template with the task's problem text."""
    return _render("test_prompt.txt", task)


def _auth_headers(provider: ProviderConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(provider.api_key_env, "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    return headers


def _post_with_retries(
    client: httpx.Client,
    payload: dict,
    provider: ProviderConfig,
    rng: random.Random,
) -> dict:
    last_error: Exception = GatewayError("no attempt made")
    for attempt in range(provider.max_retries + 1):
        try:
            response = client.post("/chat/completions", json=payload)
        except httpx.HTTPError as exc:
            last_error = exc
        else:
            if response.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials ({response.status_code})")
            if response.status_code == 200:
                return response.json()
            last_error = GatewayError(f"endpoint returned {response.status_code}")
            if response.status_code not in _RETRYABLE_STATUS:
                raise last_error
        if attempt < provider.max_retries:
            backoff = min(2.0**attempt, 30.0) * (0.5 + rng.random())
            logger.warning("request failed (%s); retrying in %.1fs", last_error, backoff)
            time.sleep(backoff)
    raise GatewayError(f"gave up after {provider.max_retries + 1} attempts: {last_error}")


def _completion_texts(body: dict) -> list[tuple[str, Optional[int]]]:
    """(content, completion_tokens) per choice; tokens only when unambiguous."""
    choices = body.get("choices", [])
    texts = [str(choice.get("message", {}).get("content", "")) for choice in choices]
    usage = body.get("usage") or {}
    tokens = usage.get("completion_tokens")
    if tokens is not None and len(texts) == 1:
        return [(texts[0], int(tokens))]
    return [(text, None) for text in texts]


def generate(
    task: Task,
    kind: str,
    sampling: SamplingConfig,
    provider: ProviderConfig,
    transport: Optional[httpx.BaseTransport] = None,
    seed: int = 0,
) -> list[CandidateRecord]:
    """Request ``num_samples`` completions and parse them into candidates.

    Slots whose requests fail even after retries are returned as invalid
    records with empty raw text so candidate indices stay contiguous; the
    failure is logged.  If no request succeeds at all, GatewayError is raised.
    """
    if kind == KIND_CODE:
        prompt = render_code_prompt(task)
    elif kind == KIND_TEST:
        prompt = render_test_prompt(task)
    else:
        raise ValueError(f"unknown candidate kind {kind!r}")

    payload = {
        "model": provider.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": sampling.temperature,
        "top_p": sampling.top_p,
    }
    if sampling.max_tokens is not None:
        payload["max_tokens"] = sampling.max_tokens

    rng = random.Random(seed)
    results: list[Optional[tuple[str, Optional[int]]]] = [None] * sampling.num_samples
    with httpx.Client(
        base_url=provider.base_url.rstrip("/"),
        headers=_auth_headers(provider),
        timeout=provider.request_timeout_ms / 1000.0,
        transport=transport,
    ) as client:
        if provider.use_n_parameter:
            body = _post_with_retries(
                client, {**payload, "n": sampling.num_samples}, provider, rng
            )
            for i, item in enumerate(_completion_texts(body)[: sampling.num_samples]):
                results[i] = item
        else:

            def fetch(i: int) -> None:
                try:
                    body = _post_with_retries(client, {**payload, "n": 1}, provider, rng)
                except AuthError:
                    raise
                except GatewayError as exc:
                    logger.warning("sample %d for task %s failed: %s", i, task.id, exc)
                    return
                texts = _completion_texts(body)
                if texts:
                    results[i] = texts[0]

            with ThreadPoolExecutor(max_workers=provider.concurrent_request_limit) as pool:
                list(pool.map(fetch, range(sampling.num_samples)))

    if all(item is None for item in results):
        raise GatewayError(f"task {task.id}: no completions retrieved")

    records = []
    for index, item in enumerate(results):
        raw, tokens = item if item is not None else ("", None)
        if item is None:
            logger.warning("task %s %s sample %d missing; recording invalid", task.id, kind, index)
        records.append(parse_candidate(task.id, kind, index, raw, length_units=tokens))
    return records
