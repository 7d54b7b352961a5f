"""Completion client with k-sample generation and a deterministic stub.

Two backends share one interface: a remote OpenAI-compatible chat endpoint
and an offline stub that serves checked-in fixture files.  Stub fixtures
are keyed by a content hash of the (system, user) prompt pair plus the
sample index, so any change to prompt rendering invalidates fixtures
loudly instead of silently serving stale completions.
"""

from __future__ import annotations

import hashlib
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenerationConfig:
    """Sampling parameters: k completions per module at one temperature."""

    k: int = 10
    temperature: float = 0.6
    max_output_tokens: int = 4096
    request_timeout: float = 60.0
    retries: int = 3

    def validate(self) -> None:
        if self.k < 1:
            raise GatewayError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.temperature <= 1.0:
            raise GatewayError(f"temperature must be within [0, 1], got {self.temperature}")


@dataclass(frozen=True)
class PromptPair:
    """One rendered prompt: fixed system text plus per-module user text."""

    system: str
    user: str
    target_module: str


class GatewayError(RuntimeError):
    pass


class MissingFixtureError(GatewayError):
    """Stub fixture lookup failed; carries the expected key and index."""

    def __init__(self, key: str, index: int, path: Path):
        super().__init__(f"no stub fixture for key {key} index {index} (expected {path})")
        self.key = key
        self.index = index


def prompt_key(system: str, user: str) -> str:
    """Stable 16-hex-digit fixture key for a prompt pair."""
    digest = hashlib.sha256(system.encode() + b"\0" + user.encode()).hexdigest()
    return digest[:16]


def fixture_filename(system: str, user: str, index: int) -> str:
    return f"{prompt_key(system, user)}-{index}.txt"


class StubBackend:
    """Offline backend reading completions from a fixture directory."""

    def __init__(self, fixture_dir: Path):
        self.fixture_dir = Path(fixture_dir)

    def complete(self, prompt: PromptPair, temperature: float, sample_index: int) -> str:
        path = self.fixture_dir / fixture_filename(prompt.system, prompt.user, sample_index)
        if not path.is_file():
            raise MissingFixtureError(prompt_key(prompt.system, prompt.user), sample_index, path)
        return path.read_text()


class RemoteChatBackend:
    """OpenAI-compatible chat-completions client.

    Credentials come from the environment variable named by
    `credential_env`; transport failures and 429/5xx responses are retried
    with exponential backoff.
    """

    RETRYABLE_STATUS = (429, 500, 502, 503, 504)

    def __init__(
        self,
        endpoint: str,
        model: str,
        credential_env: str = "PROTOMODEL_API_KEY",
        max_output_tokens: int = 4096,
        request_timeout: float = 60.0,
        retries: int = 3,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.credential_env = credential_env
        self.max_output_tokens = max_output_tokens
        self.request_timeout = request_timeout
        self.retries = retries

    def _headers(self) -> Dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.credential_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, prompt: PromptPair, temperature: float, sample_index: int) -> str:
        import requests

        payload = {
            "model": self.model,
            "temperature": temperature,
            "max_tokens": self.max_output_tokens,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        }
        url = f"{self.endpoint}/chat/completions"
        last_error: Optional[Exception] = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(2 ** (attempt - 1))
            try:
                resp = requests.post(
                    url, json=payload, headers=self._headers(), timeout=self.request_timeout
                )
            except requests.RequestException as e:
                last_error = e
                log.warning("completion request failed (attempt %d): %s", attempt + 1, e)
                continue
            if resp.status_code in (401, 403):
                raise GatewayError(f"authentication failed against {url} ({resp.status_code})")
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = GatewayError(f"{url} returned {resp.status_code}")
                log.warning("retryable status %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code != 200:
                raise GatewayError(f"{url} returned {resp.status_code}: {resp.text[:500]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as e:
                raise GatewayError(f"malformed completion response: {e}") from e
        raise GatewayError(f"transport failure after {self.retries} attempts: {last_error}")


def complete(backend, prompt: PromptPair, temperature: float, sample_index: int) -> str:
    return backend.complete(prompt, temperature, sample_index)


@dataclass
class SampleSet:
    """Result of sample_k: texts by index for successes, messages for failures."""

    texts: Dict[int, str] = field(default_factory=dict)
    errors: Dict[int, str] = field(default_factory=dict)

    def ordered(self) -> Tuple[Tuple[int, str], ...]:
        return tuple(sorted(self.texts.items()))


def sample_k(backend, prompt: PromptPair, cfg: GenerationConfig, parallel: bool = True) -> SampleSet:
    """Request k independent completions; partial failures do not abort.

    Output index i always holds the text of request i; failed indices are
    reported in `errors` so the pipeline can skip them the same way it
    skips uncompilable models.
    """
    cfg.validate()
    result = SampleSet()

    def one(i: int) -> None:
        try:
            result.texts[i] = backend.complete(prompt, cfg.temperature, i)
        except GatewayError as e:
            result.errors[i] = str(e)

    if parallel and cfg.k > 1 and isinstance(backend, RemoteChatBackend):
        with ThreadPoolExecutor(max_workers=min(cfg.k, 8)) as pool:
            list(pool.map(one, range(cfg.k)))
    else:
        for i in range(cfg.k):
            one(i)
    return result
