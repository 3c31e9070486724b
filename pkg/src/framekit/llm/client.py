"""Chat-completion HTTP client: bearer auth from the environment, bounded
timeouts; retries are handled by the batch runner."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List, Protocol, Sequence, Tuple

import httpx

from ..errors import ConfigInvalid


@dataclass(frozen=True)
class LLMClientConfig:
    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model: str = "gpt-4"
    temperature: float = 0.0  # deterministic by default
    max_retries: int = 2
    backoff_seconds: Tuple[float, ...] = (0.5, 1.0, 2.0)
    max_concurrent: int = 4
    timeout_seconds: float = 60.0
    auth_env_var: str = "LLM_API_KEY"

    def __post_init__(self):
        if self.max_retries < 0:
            raise ConfigInvalid("max_retries must be >= 0")
        if self.max_concurrent < 1:
            raise ConfigInvalid("max_concurrent must be >= 1")
        if self.timeout_seconds <= 0:
            raise ConfigInvalid("timeout_seconds must be positive")


class ChatClient(Protocol):
    def complete(self, messages: Sequence[Dict[str, str]]) -> str:
        """Send one chat request and return the assistant text."""
        ...


class HTTPChatClient:
    """Minimal OpenAI-style chat client.

    Request body: {model, messages, temperature}; the assistant text is read
    from choices[0].message.content.
    """

    def __init__(self, config: LLMClientConfig):
        self.config = config
        headers = {}
        token = os.environ.get(config.auth_env_var, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._http = httpx.Client(timeout=config.timeout_seconds, headers=headers)

    def complete(self, messages: Sequence[Dict[str, str]]) -> str:
        response = self._http.post(
            self.config.endpoint,
            json={
                "model": self.config.model,
                "messages": list(messages),
                "temperature": self.config.temperature,
            },
        )
        response.raise_for_status()
        return response.json()["choices"][0]["message"]["content"]

    def close(self) -> None:
        self._http.close()
