"""
Tests for task parsing, predicate evaluation and graded scoring.
"""

import math

import numpy as np
import pytest

from benchgen.exceptions import EvaluationError, PlanParseError
from benchgen.geometry import Pose
from benchgen.task_model import (SceneState, Subtask, TaskSpec, TerminationCondition, eval_condition,
                                 graded_score, load_sample_tasks, parse_task, serialize_task, success)

DIMS = {
    "banana": (0.19, 0.05, 0.04),
    "bowl": (0.16, 0.16, 0.08),
    "plate": (0.22, 0.22, 0.02),
    "lemon": (0.065, 0.05, 0.05),
    "lime": (0.05, 0.045, 0.045),
}


def _state(held=None, **overrides):
    poses = {
        "bowl": Pose((0.5, 0.0, 0.04)),
        "plate": Pose((0.7, -0.2, 0.01)),
        "banana": Pose((0.4, 0.25, 0.02)),
        "lemon": Pose((0.3, -0.3, 0.025)),
        "lime": Pose((0.35, -0.3, 0.0225)),
    }
    rest = {name: pose.position[2] for name, pose in poses.items()}
    for name, position in overrides.items():
        poses[name] = Pose(position)
    return SceneState(poses, 0.0, held, rest)


def _cond(predicate, subjects, reference=None, threshold=None):
    return TerminationCondition(predicate=predicate, subjects=subjects, reference=reference, threshold=threshold)


class TestTerminationCondition:
    """Test predicate arity validation."""

    def test_binary_requires_reference(self):
        with pytest.raises(ValueError, match="requires a reference"):
            _cond("inside", ["banana"])

    def test_subject_and_reference_differ(self):
        with pytest.raises(ValueError, match="must differ"):
            _cond("near", ["banana"], "banana", 0.1)

    def test_unary_rejects_reference(self):
        with pytest.raises(ValueError, match="takes no reference"):
            _cond("lifted", ["banana"], "bowl")

    def test_near_requires_threshold(self):
        with pytest.raises(ValueError, match="near requires"):
            _cond("near", ["banana"], "bowl")

    def test_count_in_threshold_bounds(self):
        with pytest.raises(ValueError, match="exceeds"):
            _cond("count_in", ["lemon", "lime"], "bowl", 3)
        with pytest.raises(ValueError, match="integer"):
            _cond("count_in", ["lemon", "lime"], "bowl", 1.5)

    def test_single_subject_for_non_count(self):
        with pytest.raises(ValueError, match="exactly one subject"):
            _cond("inside", ["lemon", "lime"], "bowl")

    def test_describe(self):
        assert _cond("inside", ["banana"], "bowl").describe() == "inside(banana, bowl)"
        assert _cond("count_in", ["lemon", "lime"], "bowl", 2).describe() == "count_in([lemon, lime], bowl, 2)"


class TestTaskSpec:
    """Test task documents."""

    def test_sample_tasks_load(self):
        tasks = load_sample_tasks()
        assert len(tasks) == 6
        assert tasks[0].task_id == "BananaInBowlTask"
        assert tasks[0].objects == ["banana", "bowl"]

    def test_roundtrip(self):
        task = load_sample_tasks()[4]
        assert parse_task(serialize_task(task)) == task

    def test_schema_error_path(self):
        raw = {"task_id": "t", "instruction": "x", "subtasks": [
            {"label": "a", "steps": [{"predicate": "levitate", "subjects": ["banana"]}]}]}
        with pytest.raises(PlanParseError) as exc:
            parse_task(raw)
        assert exc.value.path.startswith("subtasks[0].steps[0]")

    def test_subcategory_must_match_axis(self):
        with pytest.raises(ValueError, match="does not belong"):
            TaskSpec(task_id="t", instruction="x", axis="visual", subcategory="counting",
                     subtasks=[Subtask(label="a", steps=[_cond("grasped", ["banana"])])])


class TestEvalCondition:
    """Test predicate evaluation on snapshots."""

    def test_inside(self):
        state = _state(banana=(0.5, 0.0, 0.025))
        assert eval_condition(_cond("inside", ["banana"], "bowl"), state, DIMS)
        assert not eval_condition(_cond("inside", ["banana"], "bowl"), _state(), DIMS)

    def test_on_top_of(self):
        state = _state(banana=(0.7, -0.2, 0.04))
        assert eval_condition(_cond("on_top_of", ["banana"], "plate"), state, DIMS)
        hovering = _state(banana=(0.7, -0.2, 0.1))
        assert not eval_condition(_cond("on_top_of", ["banana"], "plate"), hovering, DIMS)

    def test_near(self):
        assert eval_condition(_cond("near", ["lime"], "lemon", 0.1), _state(), DIMS)
        assert not eval_condition(_cond("near", ["lime"], "lemon", 0.01), _state(), DIMS)

    def test_lifted(self):
        assert not eval_condition(_cond("lifted", ["lemon"]), _state(), DIMS)
        assert eval_condition(_cond("lifted", ["lemon"]), _state(lemon=(0.3, -0.3, 0.1)), DIMS)

    def test_upright(self):
        state = _state()
        assert eval_condition(_cond("upright", ["banana"]), state, DIMS)
        s = math.sin(math.pi / 4)
        tipped = SceneState(dict(state.poses), 0.0, None, state.rest_heights)
        tipped.poses["banana"] = Pose((0.4, 0.25, 0.02), (s, s, 0.0, 0.0))
        assert not eval_condition(_cond("upright", ["banana"]), tipped, DIMS)

    def test_directions_use_table_frame(self):
        state = _state()
        assert eval_condition(_cond("left_of", ["banana"], "bowl"), state, DIMS)
        assert eval_condition(_cond("right_of", ["lemon"], "bowl"), state, DIMS)
        assert eval_condition(_cond("in_front_of", ["plate"], "bowl"), state, DIMS)
        assert eval_condition(_cond("behind", ["lemon"], "bowl"), state, DIMS)

    def test_grasped(self):
        assert eval_condition(_cond("grasped", ["banana"]), _state(held="banana"), DIMS)
        assert not eval_condition(_cond("grasped", ["banana"]), _state(held="lemon"), DIMS)

    def test_count_in(self):
        state = _state(lemon=(0.48, 0.0, 0.025), lime=(0.52, 0.0, 0.0225))
        assert eval_condition(_cond("count_in", ["lemon", "lime", "banana"], "bowl", 2), state, DIMS)
        assert not eval_condition(_cond("count_in", ["lemon", "lime", "banana"], "bowl", 3), state, DIMS)

    def test_missing_object(self):
        with pytest.raises(EvaluationError, match="ghost"):
            eval_condition(_cond("lifted", ["ghost"]), _state(), DIMS)

    def test_check_objects(self):
        with pytest.raises(EvaluationError, match="missing"):
            _state().check_objects(list(DIMS) + ["ghost"])


class TestGradedScore:
    """Test prefix-credit scoring."""

    @pytest.fixture
    def banana_task(self):
        return load_sample_tasks()[0]

    def test_nothing_done(self, banana_task):
        assert graded_score(banana_task, _state(), DIMS) == 0.0
        assert not success(banana_task, _state(), DIMS)

    def test_first_step_only(self, banana_task):
        assert graded_score(banana_task, _state(held="banana"), DIMS) == pytest.approx(0.5)

    def test_later_step_without_earlier_gets_no_credit(self, banana_task):
        final = _state(banana=(0.5, 0.0, 0.025))
        assert graded_score(banana_task, final, DIMS) == 0.0

    def test_ordered_steps_across_snapshots(self, banana_task):
        grasp = _state(held="banana", banana=(0.45, 0.1, 0.15))
        final = _state(banana=(0.5, 0.0, 0.025))
        assert graded_score(banana_task, final, DIMS, event_log=[grasp]) == pytest.approx(1.0)
        assert success(banana_task, final, DIMS, event_log=[grasp])

    def test_out_of_order_snapshots_do_not_count(self, banana_task):
        dropped_first = _state(banana=(0.5, 0.0, 0.025))
        final = _state(held="banana", banana=(0.45, 0.1, 0.15))
        assert graded_score(banana_task, final, DIMS, event_log=[dropped_first]) == pytest.approx(0.5)

    def test_mean_over_subtasks(self):
        task = load_sample_tasks()[2]
        grasp = _state(held="lemon", lemon=(0.45, 0.0, 0.15))
        final = _state(lemon=(0.5, 0.0, 0.025))
        assert graded_score(task, final, DIMS, event_log=[grasp]) == pytest.approx(0.5)


def _random_state(rng, held=None):
    poses = {}
    for name in DIMS:
        if name != "bowl" and rng.uniform() < 0.3:
            position = (0.5 + rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0.0, 0.1))
        else:
            position = (rng.uniform(0.25, 0.85), rng.uniform(-0.4, 0.4), rng.uniform(0.0, 0.2))
        poses[name] = Pose(position)
    poses["bowl"] = Pose((0.5, 0.0, 0.04))
    rest = {name: 0.5 * dims[2] for name, dims in DIMS.items()}
    return SceneState(poses, 0.0, held, rest)


def _random_condition(rng):
    names = list(DIMS)
    subject = str(rng.choice(names))
    other = str(rng.choice([n for n in names if n != subject]))
    kind = int(rng.integers(7))
    if kind == 0:
        return _cond("grasped", [subject])
    if kind == 1:
        return _cond("lifted", [subject])
    if kind == 2:
        return _cond("inside", [subject if subject != "bowl" else "lime"], "bowl")
    if kind == 3:
        return _cond("near", [subject], other, 0.2)
    if kind == 4:
        return _cond("left_of", [subject], other)
    if kind == 5:
        return _cond("in_front_of", [subject], other)
    return _cond("right_of", [subject], other)


def _random_task(rng):
    subtasks = [Subtask(label=f"part {i}", steps=[_random_condition(rng) for _ in range(int(rng.integers(1, 4)))])
                for i in range(int(rng.integers(1, 4)))]
    return TaskSpec(task_id="RandomTask", instruction="Do the random thing.", subtasks=subtasks)


def _random_held(rng):
    return str(rng.choice(list(DIMS))) if rng.uniform() < 0.5 else None


def _random_episode(rng):
    log = [_random_state(rng, _random_held(rng)) for _ in range(int(rng.integers(0, 3)))]
    return log, _random_state(rng, _random_held(rng))


class TestScoringProperties:
    """Seeded random tasks and episodes."""

    def test_success_iff_full_score(self):
        rng = np.random.default_rng(12)
        successes = 0
        for _ in range(1000):
            task = _random_task(rng)
            log, final = _random_episode(rng)
            score = graded_score(task, final, DIMS, event_log=log)
            assert 0.0 <= score <= 1.0
            if success(task, final, DIMS, event_log=log):
                successes += 1
                assert score == 1.0
            else:
                assert score < 1.0
        assert successes > 0

    def test_later_snapshot_never_lowers_score(self):
        rng = np.random.default_rng(13)
        for _ in range(500):
            task = _random_task(rng)
            log, final = _random_episode(rng)
            _, later = _random_episode(rng)
            before = graded_score(task, final, DIMS, event_log=log)
            after = graded_score(task, later, DIMS, event_log=log + [final])
            assert after >= before

    def test_extra_step_achieved_never_lowers_score(self):
        task = load_sample_tasks()[0]
        nothing = graded_score(task, _state(), DIMS)
        grasped = graded_score(task, _state(held="banana"), DIMS)
        placed = graded_score(task, _state(banana=(0.5, 0.0, 0.025)), DIMS,
                              event_log=[_state(held="banana")])
        assert nothing <= grasped <= placed == 1.0

    def test_one_and_a_half_of_two_subtasks(self):
        task = load_sample_tasks()[2]
        lime_grasped = _state(held="lime")
        final = _state(held="lemon", lime=(0.52, 0.0, 0.0225))
        assert graded_score(task, final, DIMS, event_log=[lime_grasped]) == pytest.approx(0.75)
        assert not success(task, final, DIMS, event_log=[lime_grasped])


class TestRelationProperties:
    """Seeded checks of spatial predicates against direct geometry."""

    def test_inside_matches_geometry(self):
        rng = np.random.default_rng(14)
        hits = 0
        for _ in range(1000):
            yaw = rng.uniform(-math.pi, math.pi)
            state = _random_state(rng)
            state.poses["bowl"] = Pose.from_xyz_yaw(0.5, 0.0, 0.04, yaw)
            x, y, z = state.poses["lime"].position
            c, s = math.cos(yaw), math.sin(yaw)
            lx = c * (x - 0.5) + s * y
            ly = -s * (x - 0.5) + c * y
            expected = abs(lx) < 0.08 and abs(ly) < 0.08 and 0.0 < z < 0.08 and z + 0.0225 <= 0.08
            got = eval_condition(_cond("inside", ["lime"], "bowl"), state, DIMS)
            assert got == expected
            hits += got
        assert hits > 0

    def test_opposite_directions_are_exclusive(self):
        rng = np.random.default_rng(15)
        pairs = [("left_of", "right_of"), ("in_front_of", "behind")]
        for _ in range(1000):
            state = _random_state(rng)
            a, b = (str(n) for n in rng.choice(list(DIMS), size=2, replace=False))
            for first, second in pairs:
                one = eval_condition(_cond(first, [a], b), state, DIMS)
                other = eval_condition(_cond(second, [a], b), state, DIMS)
                assert not (one and other)
                assert one or other
