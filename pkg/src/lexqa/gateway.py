"""Uniform access to text-generation endpoints.

Two provider kinds behind one interface: deterministic mocks (scripted
reply per prompt hash, for offline operation and reproducible tests) and
remote endpoints speaking the chat-completions wire protocol
(POST {endpoint}/chat/completions). Failures are carried inside
GenerationResult rather than raised, so a fan-out can aggregate them.
"""

from __future__ import annotations

import hashlib
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx

from lexqa.errors import AllProvidersFailed
from lexqa.templates import Prompt

logger = logging.getLogger(__name__)

MOCK_FALLBACK = "MOCK-DEFAULT"
DEFAULT_TIMEOUT_S = 30.0
DEFAULT_TEMPERATURE = 0.2


def prompt_key(prompt: Prompt) -> str:
    """Stable hash of a rendered prompt; the lookup key for mock scripts."""
    payload = prompt.system + "\x1e" + prompt.user
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ModelRef:
    id: str
    kind: str  # "mock" | "remote"
    script: dict[str, str] = field(default_factory=dict, hash=False)
    endpoint: str = ""
    model_name: str = ""
    timeout_s: float = DEFAULT_TIMEOUT_S
    temperature: float = DEFAULT_TEMPERATURE
    api_key_env: str = ""

    @staticmethod
    def mock(id: str, script: dict[str, str] | None = None) -> "ModelRef":
        return ModelRef(id=id, kind="mock", script=script or {})

    @staticmethod
    def remote(
        id: str,
        endpoint: str,
        model_name: str,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        temperature: float = DEFAULT_TEMPERATURE,
        api_key_env: str = "",
    ) -> "ModelRef":
        return ModelRef(
            id=id,
            kind="remote",
            endpoint=endpoint,
            model_name=model_name,
            timeout_s=timeout_s,
            temperature=temperature,
            api_key_env=api_key_env,
        )


@dataclass(frozen=True)
class GenerationError:
    kind: str  # "timeout" | "http_error" | "malformed_response"
    message: str


@dataclass(frozen=True)
class GenerationResult:
    """Outcome of one generation call; exactly one of text/error is set."""

    model_id: str
    text: str | None
    latency_s: float
    error: GenerationError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def script_entry(prompt: Prompt, reply: str) -> tuple[str, str]:
    """Convenience for building mock scripts: (hash-of-prompt, reply)."""
    return prompt_key(prompt), reply


class Gateway:
    """Generation entry point; holds nothing but fan-out plumbing."""

    def generate(self, prompt: Prompt, model: ModelRef) -> GenerationResult:
        start = time.monotonic()
        if model.kind == "mock":
            reply = model.script.get(prompt_key(prompt), MOCK_FALLBACK)
            return GenerationResult(model.id, reply, time.monotonic() - start)
        return self._generate_remote(prompt, model, start)

    def _generate_remote(self, prompt: Prompt, model: ModelRef, start: float) -> GenerationResult:
        headers = {}
        key = os.environ.get(model.api_key_env) if model.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": model.model_name,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": model.temperature,
        }
        url = model.endpoint.rstrip("/") + "/chat/completions"
        try:
            resp = httpx.post(url, json=body, headers=headers, timeout=model.timeout_s)
            resp.raise_for_status()
            text = resp.json()["choices"][0]["message"]["content"]
            if not isinstance(text, str):
                raise KeyError("content is not a string")
            return GenerationResult(model.id, text, time.monotonic() - start)
        except httpx.TimeoutException as exc:
            err = GenerationError("timeout", f"{url}: {exc}")
        except httpx.HTTPError as exc:
            err = GenerationError("http_error", f"{url}: {exc}")
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            err = GenerationError("malformed_response", f"{url}: {exc}")
        logger.warning("generation via %s failed: %s", model.id, err.message)
        return GenerationResult(model.id, None, time.monotonic() - start, error=err)

    def generate_parallel(self, prompt: Prompt, models: list[ModelRef]) -> list[GenerationResult]:
        """Concurrent fan-out; results in input order, failures isolated per model."""
        if not models:
            raise ValueError("models must be non-empty")
        with ThreadPoolExecutor(max_workers=len(models)) as pool:
            results = list(pool.map(lambda m: self.generate(prompt, m), models))
        if all(r.error is not None for r in results):
            details = "; ".join(f"{r.model_id}: {r.error.kind}" for r in results if r.error)
            raise AllProvidersFailed(details)
        return results
