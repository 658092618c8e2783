"""
Tests for the scene generate -> solve -> settle -> refine loop.
"""

import json
from unittest.mock import patch

import numpy as np
import pytest

from benchgen.exceptions import GenerationError, InvalidInputError
from benchgen.placement_solver import StabilityReport, UnstableObject, settle_and_check
from benchgen.prompts import FEEDBACK_HEADER
from benchgen.scene_generation import GenReport, build_scene_prompt, generate_scene, plan_json
from benchgen.scene_model import Catalog, default_catalog, parse_scene_plan

FRUIT_PLAN = {
    "objects": [{"name": "bowl"}, {"name": "apple"}, {"name": "plate"}, {"name": "banana"}],
    "predicates": [
        {"type": "place-on-base", "object": "bowl", "x": 0.4, "y": 0.2, "yaw": 30},
        {"type": "place-in", "objects": ["apple"], "container": "bowl"},
        {"type": "place-on-base", "object": "plate", "x": 0.7, "y": -0.2},
        {"type": "place-on", "object": "banana", "support": "plate", "position": "center"},
    ],
}

KETCHUP_IN_MUG = {
    "objects": [{"name": "mug"}, {"name": "ketchup"}],
    "predicates": [
        {"type": "place-on-base", "object": "mug", "x": 0.5, "y": 0.0},
        {"type": "place-in", "objects": ["ketchup"], "container": "mug"},
    ],
}


@pytest.fixture
def catalog():
    return default_catalog()


def _generate(client, catalog, **kwargs):
    return generate_scene("fruit on the counter", catalog, None, client, rng=np.random.default_rng(0), **kwargs)


class TestBuildScenePrompt:
    """Test planner prompt assembly."""

    def test_contents(self, catalog):
        system, user = build_scene_prompt("breakfast table", catalog, 12, np.random.default_rng(1))
        assert "X=[0.25 to 0.85]" in system
        assert "SCENE REQUEST: breakfast table" in user
        assert "MEDIUM SCENE STRATEGY" in user
        assert "grey_bin" in user
        assert "[" + "THEME]" not in user

    def test_suggestions_are_seeded(self, catalog):
        first = build_scene_prompt("x", catalog, 5, np.random.default_rng(3))
        second = build_scene_prompt("x", catalog, 5, np.random.default_rng(3))
        assert first == second

    def test_empty_catalog(self):
        with pytest.raises(InvalidInputError, match="empty catalog"):
            build_scene_prompt("x", Catalog([]), 5)

    def test_target_count(self, catalog):
        with pytest.raises(InvalidInputError, match="target_count"):
            build_scene_prompt("x", catalog, 0)


class TestGenerateScene:
    """Test the refinement loop against replayed planner replies."""

    def test_first_attempt_succeeds(self, replay_client, catalog):
        client = replay_client([FRUIT_PLAN])
        scene, report = _generate(client, catalog)
        assert report.success
        assert report.attempts == 1
        assert report.feedback == []
        assert scene.names == ["bowl", "apple", "plate", "banana"]
        assert scene.containing(scene.get("apple")).name == "bowl"
        assert settle_and_check(scene).stable

    def test_invalid_json_is_fed_back(self, replay_client, catalog):
        client = replay_client(["Sure! Here is a lovely scene.", FRUIT_PLAN])
        scene, report = _generate(client, catalog)
        assert report.attempts == 2
        assert report.feedback[0].startswith("Invalid plan JSON")
        second_request = client.history[1].user_text
        assert FEEDBACK_HEADER in second_request
        assert "Invalid plan JSON" in second_request
        assert FEEDBACK_HEADER not in client.history[0].user_text

    def test_container_failure_is_fed_back(self, replay_client, catalog):
        client = replay_client([KETCHUP_IN_MUG, FRUIT_PLAN])
        _, report = _generate(client, catalog)
        assert report.feedback == ["Container 'mug' is too small for its contents"]

    def test_instability_is_fed_back(self, replay_client, catalog):
        fell = StabilityReport({"apple": 0.2}, [UnstableObject("apple", 0.2, "fell_off", "table")], False)
        client = replay_client([FRUIT_PLAN, FRUIT_PLAN])
        with patch("benchgen.scene_generation.settle_and_check", side_effect=[fell, StabilityReport()]):
            _, report = _generate(client, catalog)
        assert report.attempts == 2
        assert report.feedback == ["Object 'apple' fell off 'table' with displacement 0.20m"]
        assert "Object 'apple' fell off 'table' with displacement 0.20m" in client.history[1].user_text

    def test_empty_error_message_is_fed_back(self, replay_client, catalog):
        client = replay_client([FRUIT_PLAN, FRUIT_PLAN])
        sentinel = object()
        with patch("benchgen.scene_generation._attempt", side_effect=[InvalidInputError(), sentinel]):
            scene, report = _generate(client, catalog)
        assert scene is sentinel
        assert report.attempts == 2
        assert report.feedback == [""]
        assert report.success

    def test_exhausted_budget(self, replay_client, catalog):
        client = replay_client(["nope", KETCHUP_IN_MUG, {"objects": [{"name": "unicorn"}], "predicates": []}])
        with pytest.raises(GenerationError) as exc:
            _generate(client, catalog)
        report = exc.value.report
        assert isinstance(report, GenReport)
        assert not report.success
        assert report.attempts == 3
        assert len(report.feedback) == 3
        assert "no objects" in report.feedback[2]
        assert report.to_dict()["max_attempts"] == 3

    def test_attempt_budget_override(self, replay_client, catalog):
        client = replay_client(["nope"])
        with pytest.raises(GenerationError):
            _generate(client, catalog, max_attempts=1)
        assert len(client.history) == 1

    def test_status_callback(self, replay_client, catalog):
        messages, progress = [], []
        _generate(replay_client([FRUIT_PLAN]), catalog, status_callback=messages.append,
                  progress_callback=progress.append)
        assert messages[0].startswith("Planning scene")
        assert progress[-1] == 100

    def test_plan_json_roundtrip(self, replay_client, catalog):
        _, report = _generate(replay_client([json.dumps(FRUIT_PLAN)]), catalog)
        assert parse_scene_plan(plan_json(report)) == report.plan
