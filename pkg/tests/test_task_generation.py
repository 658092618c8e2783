"""
Tests for task validation and the task generation loop.
"""

import pytest

from benchgen.exceptions import GenerationError, InvalidInputError
from benchgen.geometry import Pose
from benchgen.prompts import FEEDBACK_HEADER
from benchgen.scene_model import Placement, Scene, default_catalog
from benchgen.task_generation import build_task_prompt, generate_task, validate_task
from benchgen.task_model import load_sample_tasks

LAYOUT = {
    "bowl": (0.4, 0.25),
    "plate": (0.7, 0.25),
    "mug": (0.4, -0.25),
    "banana": (0.55, 0.0),
    "lemon": (0.7, -0.1),
    "lime": (0.7, -0.25),
    "ketchup": (0.3, 0.0),
}


@pytest.fixture
def scene():
    catalog = default_catalog()
    placements = []
    for name, (x, y) in LAYOUT.items():
        entry = catalog[name]
        placements.append(Placement(name, Pose((x, y, 0.5 * entry.dims[2])), entry.dims, entry.category))
    return Scene(tuple(placements))


def _task(instruction="Put the lemon in the bowl.", subject="lemon", container="bowl", **tags):
    return {
        "task_id": "LemonInBowlTask",
        "instruction": instruction,
        "subtasks": [{"label": f"{subject} in {container}", "steps": [
            {"predicate": "grasped", "subjects": [subject]},
            {"predicate": "inside", "subjects": [subject], "reference": container},
        ]}],
        **tags,
    }


class TestValidateTask:
    """Test task checks against a scene."""

    def test_valid_task(self, scene):
        assert validate_task(_task(), scene) == []

    def test_too_wide_for_container(self, scene):
        violations = validate_task(_task(subject="banana"), scene)
        assert len(violations) == 1
        assert violations[0].path == "subtasks[0].steps[1]"
        assert "does not fit inside 'bowl'" in violations[0].message

    def test_too_tall_for_container(self, scene):
        violations = validate_task(_task(subject="ketchup", container="mug"), scene)
        assert len(violations) == 1
        assert "'ketchup'" in violations[0].message

    def test_clearance_is_configurable(self, scene):
        assert validate_task(_task(), scene, clearance=0.2)

    def test_missing_object(self, scene):
        violations = validate_task(_task(container="grey_bin"), scene)
        assert [str(v) for v in violations] == ["objects: 'grey_bin' is not in the scene"]

    def test_forbidden_object(self, scene):
        violations = validate_task(_task(), scene, forbidden=["lemon"])
        assert "may not be referenced" in violations[0].message

    def test_schema_error(self, scene):
        raw = _task()
        raw["subtasks"][0]["steps"][1]["predicate"] = "teleport"
        violations = validate_task(raw, scene)
        assert violations[0].path.startswith("subtasks[0].steps[1]")

    def test_sample_conjunction_task(self, scene):
        task = load_sample_tasks()[2]
        assert validate_task(task, scene) == []


class TestBuildTaskPrompt:
    """Test task prompt assembly."""

    def test_contents(self, scene):
        examples = load_sample_tasks()[:1]
        _, user = build_task_prompt(scene, "relational", "counting", "moderate",
                                    prior_tasks=["Put two fruits in the bowl."], examples=examples,
                                    scene_name="fruit_counter")
        assert "SCENE: fruit_counter" in user
        assert "- lemon (food): 0.065 x 0.050 x 0.050" in user
        assert "COMPETENCY: relational / counting" in user
        assert "BananaInBowlTask" in user
        assert "- Put two fruits in the bowl." in user

    @pytest.mark.parametrize("axis,subcategory,difficulty,match", [
        ("tactile", "color", "simple", "Unknown axis"),
        ("visual", "counting", "simple", "does not belong"),
        ("visual", "color", "impossible", "Unknown difficulty"),
    ])
    def test_invalid_tags(self, scene, axis, subcategory, difficulty, match):
        with pytest.raises(InvalidInputError, match=match):
            build_task_prompt(scene, axis, subcategory, difficulty)

    def test_empty_scene(self):
        with pytest.raises(InvalidInputError, match="empty scene"):
            build_task_prompt(Scene(()), "visual", "color", "simple")


class TestGenerateTask:
    """Test the generate -> validate -> fix loop."""

    def test_accepts_valid_reply(self, scene, replay_client):
        client = replay_client([_task()])
        task, report = generate_task(scene, "visual", "semantics", "simple", client, scene_name="fruit_counter")
        assert report.success and report.attempts == 1
        assert (task.axis, task.subcategory, task.difficulty) == ("visual", "semantics", "simple")
        assert task.scene == "fruit_counter"
        assert report.plan["task_id"] == "LemonInBowlTask"

    def test_fix_prompt_carries_errors(self, scene, replay_client):
        client = replay_client([_task(subject="banana"), _task()])
        task, report = generate_task(scene, "visual", "semantics", "simple", client)
        assert report.attempts == 2
        assert "does not fit" in report.feedback[0]
        fix_request = client.history[1].user_text
        assert FEEDBACK_HEADER in fix_request
        assert "Your previous output was" in fix_request
        assert '"banana"' in fix_request
        assert task.objects == ["lemon", "bowl"]

    def test_duplicate_instruction_rejected(self, scene, replay_client):
        client = replay_client([_task("put the LEMON in the bowl."), _task("Drop the lemon into the bowl.")])
        task, report = generate_task(scene, "visual", "semantics", "simple", client,
                                     prior_tasks=["Put the lemon in the bowl."])
        assert "duplicates a previous task" in report.feedback[0]
        assert task.instruction == "Drop the lemon into the bowl."

    def test_wrong_tags_rejected(self, scene, replay_client):
        client = replay_client([_task(axis="visual", subcategory="color"), _task()])
        task, report = generate_task(scene, "visual", "semantics", "simple", client)
        assert "must be tagged visual/semantics/simple" in report.feedback[0]
        assert task.subcategory == "semantics"

    def test_unparseable_reply(self, scene, replay_client):
        client = replay_client(["I would rather not.", _task()])
        _, report = generate_task(scene, "visual", "semantics", "simple", client)
        assert report.attempts == 2
        assert report.feedback[0]

    def test_exhausted_budget(self, scene, replay_client):
        client = replay_client([_task(subject="banana")] * 2)
        with pytest.raises(GenerationError) as exc:
            generate_task(scene, "visual", "semantics", "simple", client, max_attempts=2)
        assert exc.value.report.attempts == 2
        assert not exc.value.report.success

    def test_forbidden_objects(self, scene, replay_client):
        client = replay_client([_task(), _task("Put the lime in the bowl.", subject="lime")])
        task, report = generate_task(scene, "visual", "semantics", "simple", client, forbidden=["lemon"])
        assert task.objects == ["lime", "bowl"]
        assert "may not be referenced" in report.feedback[0]
