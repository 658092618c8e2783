"""
Tests for the record/replay chat client.
"""

import json
from unittest.mock import MagicMock, patch

import openai
import pytest

from benchgen.chat_client import ChatClient, extract_json_payload
from benchgen.config import LLMConfig
from benchgen.exceptions import ConfigurationError, LLMError, LLMReplayMissError, LLMResponseError
from benchgen.utils import request_hash

from tests.conftest import write_transcripts

MESSAGES = [{"role": "user", "content": "Describe a kitchen table."}]


def _reply(content, prompt_tokens=3, completion_tokens=2):
    response = MagicMock()
    response.choices = [MagicMock()]
    response.choices[0].message.content = content
    response.usage.prompt_tokens = prompt_tokens
    response.usage.completion_tokens = completion_tokens
    return response


class TestExtractJsonPayload:
    """Test reply cleanup."""

    def test_fenced_block(self):
        assert extract_json_payload('```json\n{"a": 1}\n```') == '{"a": 1}'

    def test_surrounding_prose(self):
        assert extract_json_payload('Here you go: [1, 2] hope it helps') == "[1, 2]"

    def test_no_brackets(self):
        assert extract_json_payload("  plain  ") == "plain"


class TestReplay:
    """Test replay-mode lookup."""

    def test_sequential_fallback(self, replay_client):
        client = replay_client(["first", "second"])
        assert client.complete(MESSAGES) == "first"
        assert client.complete(MESSAGES) == "second"
        assert client.usage.requests == 2
        assert client.history[0].source == "replay"
        assert "kitchen table" in client.history[0].user_text

    def test_lookup_by_hash(self, tmp_path):
        payload = {"model": "gpt-4o", "messages": MESSAGES, "temperature": 0.0}
        write_transcripts(tmp_path, ["unrelated"])
        record = {"request_hash": request_hash(payload), "request": payload, "response": {"content": "hashed"}}
        (tmp_path / "2.json").write_text(json.dumps(record), encoding="utf-8")
        client = ChatClient(LLMConfig(mode="replay", fixture_dir=str(tmp_path)))
        assert client.complete(MESSAGES) == "hashed"
        assert client.complete([{"role": "user", "content": "other"}]) == "unrelated"

    def test_miss_raises(self, replay_client):
        client = replay_client(["only"])
        client.complete(MESSAGES)
        with pytest.raises(LLMReplayMissError) as exc:
            client.complete(MESSAGES)
        assert len(exc.value.request_hash) == 64

    def test_missing_directory(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            ChatClient(LLMConfig(mode="replay", fixture_dir=str(tmp_path / "absent")))

    def test_transcripts_in_numeric_order(self, tmp_path):
        write_transcripts(tmp_path, [f"reply {i}" for i in range(1, 12)])
        client = ChatClient(LLMConfig(mode="replay", fixture_dir=str(tmp_path)))
        replies = [client.complete(MESSAGES) for _ in range(11)]
        assert replies[1] == "reply 2"
        assert replies[9] == "reply 10"

    def test_complete_json(self, replay_client):
        client = replay_client(['```json\n{"objects": []}\n```', "not json"])
        assert client.complete_json(MESSAGES) == {"objects": []}
        with pytest.raises(LLMResponseError):
            client.complete_json(MESSAGES)

    def test_transcript_without_content(self, tmp_path):
        (tmp_path / "1.json").write_text(json.dumps({"request": {}, "response": {}}), encoding="utf-8")
        client = ChatClient(LLMConfig(mode="replay", fixture_dir=str(tmp_path)))
        with pytest.raises(LLMResponseError, match="no response content"):
            client.complete(MESSAGES)


class TestRecord:
    """Test record and live modes against a mocked endpoint."""

    @patch("benchgen.chat_client.openai.OpenAI")
    def test_record_writes_transcripts(self, mock_openai, tmp_path):
        mock_openai.return_value.chat.completions.create.return_value = _reply("recorded reply")
        client = ChatClient(LLMConfig(api_key="test-key", mode="record", fixture_dir=str(tmp_path)))

        assert client.complete(MESSAGES) == "recorded reply"
        record = json.loads((tmp_path / "1.json").read_text(encoding="utf-8"))
        assert record["response"] == {"content": "recorded reply"}
        assert record["request"]["model"] == "gpt-4o"
        assert client.usage.prompt_tokens == 3

        replay = ChatClient(LLMConfig(mode="replay", fixture_dir=str(tmp_path)))
        assert replay.complete(MESSAGES) == "recorded reply"

    @patch("benchgen.chat_client.openai.OpenAI")
    def test_record_appends_after_existing(self, mock_openai, tmp_path):
        write_transcripts(tmp_path, ["old"])
        mock_openai.return_value.chat.completions.create.return_value = _reply("new")
        client = ChatClient(LLMConfig(api_key="test-key", mode="record", fixture_dir=str(tmp_path)))
        client.complete(MESSAGES)
        assert (tmp_path / "2.json").exists()

    @patch("benchgen.chat_client.openai.OpenAI")
    def test_temperature_override(self, mock_openai):
        create = mock_openai.return_value.chat.completions.create
        create.return_value = _reply("ok")
        client = ChatClient(LLMConfig(api_key="test-key", mode="live"))
        client.complete(MESSAGES, temperature=0.7)
        assert create.call_args.kwargs["temperature"] == 0.7

    @patch("benchgen.chat_client.openai.OpenAI")
    def test_api_error_wrapped(self, mock_openai):
        mock_openai.return_value.chat.completions.create.side_effect = openai.OpenAIError("boom")
        client = ChatClient(LLMConfig(api_key="test-key", mode="live"))
        with pytest.raises(LLMError, match="boom"):
            client.complete(MESSAGES)

    def test_live_requires_key(self, monkeypatch):
        monkeypatch.delenv("LLM_API_KEY", raising=False)
        with pytest.raises(ValueError, match="api_key"):
            LLMConfig(mode="live")
