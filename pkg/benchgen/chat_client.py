"""
Chat-completion client with record/replay transcripts.

In ``live`` mode requests go to an OpenAI-compatible endpoint. ``record``
does the same and archives every exchange under the fixture directory;
``replay`` answers from that archive and never touches the network.

Transcripts are stored as ``<n>.json`` (1-based call order) holding the
request hash, the request body and the response. Replay first looks a
request up by hash and falls back to the next unused transcript in call
order, so hand-written fixtures need no hash.
"""

import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import openai
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from .config import LLMConfig
from .exceptions import ConfigurationError, LLMError, LLMReplayMissError, LLMResponseError
from .utils import atomic_write_text, read_text, request_hash

logger = logging.getLogger(__name__)

_TRANSCRIPT_RE = re.compile(r"^(\d+)\.json$")


@dataclass
class Exchange:
    """One request/response pair as seen by the client."""

    request: Dict[str, Any]
    response: str
    request_hash: str
    source: str = "live"

    @property
    def user_text(self) -> str:
        """All message contents joined, for assertions on what was sent."""
        return "\n".join(m.get("content", "") for m in self.request.get("messages", []))


@dataclass
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    requests: int = 0


def extract_json_payload(text: str) -> str:
    """
    Strip markdown code fences and surrounding prose from a model reply.

    Returns the substring from the first ``{`` or ``[`` to the matching last
    closing bracket, or the stripped text when no bracket is found.
    """
    cleaned = text.strip()
    if cleaned.startswith("```"):
        cleaned = re.sub(r"^```[a-zA-Z]*\s*", "", cleaned)
        cleaned = re.sub(r"\s*```$", "", cleaned)
    starts = [i for i in (cleaned.find("{"), cleaned.find("[")) if i >= 0]
    if not starts:
        return cleaned
    start = min(starts)
    end = max(cleaned.rfind("}"), cleaned.rfind("]"))
    return cleaned[start:end + 1] if end > start else cleaned[start:]


class ChatClient:
    """
    Thread-safe chat-completion client.

    At most ``max_concurrency`` requests are in flight at once. Rate-limit and
    connection errors are retried with exponential backoff.
    """

    def __init__(self, config: LLMConfig):
        """
        Initialize the client.

        Args:
            config: LLM configuration (mode, endpoint, model, fixture directory)

        Raises:
            ConfigurationError: If the fixture directory is missing in replay mode
        """
        self.config = config
        self.mode = config.mode
        self.history: List[Exchange] = []
        self.usage = Usage()
        self._lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(config.max_concurrency)
        self._counter = 0
        self._by_hash: Dict[str, str] = {}
        self._sequence: List[str] = []
        self._used: set = set()
        self._client = None

        if self.mode == "replay":
            self._load_transcripts()
        else:
            self._client = openai.OpenAI(api_key=config.api_key, base_url=config.endpoint,
                                         timeout=config.timeout)
            if self.mode == "record":
                os.makedirs(config.fixture_dir, exist_ok=True)
                self._counter = len(self._transcript_files(config.fixture_dir))

    @staticmethod
    def _transcript_files(directory: str) -> List[str]:
        found = []
        for name in os.listdir(directory):
            m = _TRANSCRIPT_RE.match(name)
            if m:
                found.append((int(m.group(1)), os.path.join(directory, name)))
        return [path for _, path in sorted(found)]

    def _load_transcripts(self) -> None:
        directory = self.config.fixture_dir
        if not directory or not os.path.isdir(directory):
            raise ConfigurationError(f"Replay fixture directory not found: {directory}")
        for path in self._transcript_files(directory):
            record = json.loads(read_text(path))
            self._sequence.append(path)
            if record.get("request_hash"):
                self._by_hash[record["request_hash"]] = path
        logger.debug("Loaded %d transcript(s) from %s", len(self._sequence), directory)

    def _replay(self, payload: Dict[str, Any], key: str) -> str:
        with self._lock:
            path = self._by_hash.get(key)
            if path is None or path in self._used:
                path = next((p for p in self._sequence if p not in self._used and p not in self._by_hash.values()),
                            None)
            if path is None:
                raise LLMReplayMissError(f"No recorded transcript for request {key[:12]}", key)
            self._used.add(path)
        logger.debug("Replay hit %s for request %s", os.path.basename(path), key[:12])
        record = json.loads(read_text(path))
        response = record.get("response")
        if isinstance(response, dict):
            response = response.get("content")
        if not isinstance(response, str):
            raise LLMResponseError(f"Transcript {path} has no response content")
        return response

    def _send(self, payload: Dict[str, Any]) -> str:
        @retry(retry=retry_if_exception_type((openai.RateLimitError, openai.APIConnectionError)),
               stop=stop_after_attempt(self.config.rate_limit_retries + 1),
               wait=wait_exponential(multiplier=1, min=1, max=30),
               reraise=True)
        def call():
            return self._client.chat.completions.create(**payload)

        try:
            response = call()
        except openai.OpenAIError as e:
            raise LLMError(f"Chat completion failed: {e}") from e
        text = response.choices[0].message.content or ""
        if getattr(response, "usage", None):
            with self._lock:
                self.usage.prompt_tokens += response.usage.prompt_tokens or 0
                self.usage.completion_tokens += response.usage.completion_tokens or 0
        return text

    def _archive(self, payload: Dict[str, Any], key: str, text: str) -> None:
        with self._lock:
            self._counter += 1
            n = self._counter
        path = os.path.join(self.config.fixture_dir, f"{n}.json")
        record = {"request_hash": key, "request": payload, "response": {"content": text}}
        atomic_write_text(path, json.dumps(record, indent=2, ensure_ascii=False) + "\n")

    def complete(self, messages: List[Dict[str, str]], temperature: Optional[float] = None) -> str:
        """
        Send a chat-completion request and return the reply text.

        Args:
            messages: Chat messages (``role`` and ``content``)
            temperature: Sampling temperature; the configured default when omitted

        Returns:
            str: The assistant reply

        Raises:
            LLMReplayMissError: In replay mode when no transcript matches
            LLMError: If the live request fails after retries
        """
        payload = {
            "model": self.config.model_name,
            "messages": list(messages),
            "temperature": self.config.temperature if temperature is None else temperature,
        }
        key = request_hash(payload)
        with self._slots:
            if self.mode == "replay":
                text = self._replay(payload, key)
            else:
                text = self._send(payload)
                if self.mode == "record":
                    self._archive(payload, key, text)
        with self._lock:
            self.usage.requests += 1
            self.history.append(Exchange(payload, text, key, self.mode))
        return text

    def complete_json(self, messages: List[Dict[str, str]], temperature: Optional[float] = None) -> Any:
        """
        Like complete, but parse the reply as JSON.

        Raises:
            LLMResponseError: If the reply is not valid JSON
        """
        text = self.complete(messages, temperature)
        try:
            return json.loads(extract_json_payload(text))
        except json.JSONDecodeError as e:
            raise LLMResponseError(f"Model reply is not valid JSON: {e}") from e
