"""
Shared fixtures: hand-written replay transcripts for the chat client.
"""

import json

import pytest

from benchgen.chat_client import ChatClient
from benchgen.config import LLMConfig


def write_transcripts(directory, replies):
    """Write ``replies`` as hash-less transcripts ``1.json``, ``2.json``, ... in call order."""
    directory.mkdir(parents=True, exist_ok=True)
    for n, reply in enumerate(replies, start=1):
        content = reply if isinstance(reply, str) else json.dumps(reply)
        record = {"request": {}, "response": {"content": content}}
        (directory / f"{n}.json").write_text(json.dumps(record), encoding="utf-8")
    return directory


@pytest.fixture
def replay_client(tmp_path):
    """Factory building a replay-mode client over the given replies."""

    def make(replies):
        fixture_dir = write_transcripts(tmp_path / "transcripts", replies)
        return ChatClient(LLMConfig(mode="replay", fixture_dir=str(fixture_dir)))

    return make
