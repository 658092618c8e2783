"""
Tasks, termination predicates and their evaluation.

A task pairs a natural-language instruction with subtasks, each an ordered
list of termination conditions drawn from a fixed predicate library. Scores
give prefix credit inside a subtask: a step only counts once every earlier
step of that subtask has been achieved. When an episode's intermediate
snapshots are available, steps may be achieved at different times (grasp,
then drop) as long as they are achieved in order.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import EvaluationError, PlanParseError
from .geometry import Obb, Pose, rotate_vector
from .scene_model import Scene, load_json_text, schema_error_path

logger = logging.getLogger(__name__)

PREDICATE_LIBRARY: Tuple[str, ...] = (
    "inside",
    "on_top_of",
    "near",
    "lifted",
    "upright",
    "left_of",
    "right_of",
    "in_front_of",
    "behind",
    "count_in",
    "grasped",
)

PredicateName = Literal[
    "inside", "on_top_of", "near", "lifted", "upright",
    "left_of", "right_of", "in_front_of", "behind", "count_in", "grasped",
]

COMPETENCY_AXES: Dict[str, Tuple[str, ...]] = {
    "visual": ("color", "semantics", "size"),
    "procedural": ("affordance", "reorientation", "stacking"),
    "relational": ("conjunction", "counting", "spatial"),
}
DIFFICULTIES: Tuple[str, ...] = ("simple", "moderate", "complex")

CONTACT_TOLERANCE = 0.01
LIFT_HEIGHT = 0.05
UPRIGHT_TOLERANCE = math.radians(15.0)

_BINARY = {"inside", "on_top_of", "near", "left_of", "right_of", "in_front_of", "behind"}
_UNARY = {"lifted", "upright", "grasped"}
TASK_SCHEMA_VERSION = 1


class TerminationCondition(BaseModel):
    """
    One predicate application.

    ``subjects`` holds a single object except for ``count_in``, which counts
    how many of its subjects are inside ``reference``. ``threshold`` is a
    distance for ``near`` and a minimum count for ``count_in``.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    predicate: PredicateName
    subjects: List[str] = Field(min_length=1)
    reference: Optional[str] = None
    threshold: Optional[float] = None

    @model_validator(mode="after")
    def _check_arity(self):
        p = self.predicate
        if p != "count_in" and len(self.subjects) != 1:
            raise ValueError(f"{p} takes exactly one subject")
        if p in _BINARY or p == "count_in":
            if not self.reference:
                raise ValueError(f"{p} requires a reference")
            if self.reference in self.subjects:
                raise ValueError(f"{p} subject and reference must differ")
        if p in _UNARY and self.reference is not None:
            raise ValueError(f"{p} takes no reference")
        if p == "near":
            if self.threshold is None or not self.threshold > 0:
                raise ValueError("near requires a distance threshold > 0")
        elif p == "count_in":
            t = self.threshold
            if t is None or t < 1 or t != int(t):
                raise ValueError("count_in requires an integer threshold >= 1")
            if t > len(self.subjects):
                raise ValueError("count_in threshold exceeds the number of subjects")
        elif self.threshold is not None:
            raise ValueError(f"{p} takes no threshold")
        return self

    @property
    def objects(self) -> List[str]:
        names = list(self.subjects)
        if self.reference:
            names.append(self.reference)
        return names

    def describe(self) -> str:
        """Compact human-readable form used in prompts, e.g. ``inside(banana, bowl)``."""
        if self.predicate == "count_in":
            args = ["[" + ", ".join(self.subjects) + "]"]
        else:
            args = list(self.subjects)
        if self.reference:
            args.append(self.reference)
        if self.threshold is not None:
            args.append(f"{self.threshold:g}")
        return f"{self.predicate}({', '.join(args)})"


class Subtask(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    label: str = Field(min_length=1)
    steps: List[TerminationCondition] = Field(min_length=1)


class TaskSpec(BaseModel):
    """A task: instruction, scene reference, ordered subtasks and competency tags."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    schema_version: int = TASK_SCHEMA_VERSION
    task_id: str = Field(min_length=1)
    instruction: str = Field(min_length=1)
    scene: str = ""
    subtasks: List[Subtask] = Field(min_length=1)
    axis: Optional[Literal["visual", "procedural", "relational"]] = None
    subcategory: Optional[str] = None
    difficulty: Optional[Literal["simple", "moderate", "complex"]] = None
    metadata: Optional[Dict[str, Any]] = None

    @model_validator(mode="after")
    def _check_tags(self):
        if self.schema_version != TASK_SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        if self.subcategory is not None:
            if self.axis is None:
                raise ValueError("subcategory requires an axis")
            if self.subcategory not in COMPETENCY_AXES[self.axis]:
                raise ValueError(f"subcategory '{self.subcategory}' does not belong to axis '{self.axis}'")
        return self

    @property
    def conditions(self) -> List[TerminationCondition]:
        return [step for sub in self.subtasks for step in sub.steps]

    @property
    def objects(self) -> List[str]:
        """Every object the task references, in first-mention order."""
        seen: Dict[str, None] = {}
        for c in self.conditions:
            for name in c.objects:
                seen.setdefault(name, None)
        return list(seen)


def parse_task(text: Union[str, bytes, dict]) -> TaskSpec:
    """
    Parse a TaskSpec JSON document.

    Raises:
        PlanParseError: With ``offset`` for malformed JSON or ``path`` for schema violations
    """
    data = text if isinstance(text, dict) else load_json_text(text)
    if not isinstance(data, dict):
        raise PlanParseError("Task must be a JSON object", path="$")
    try:
        return TaskSpec.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = schema_error_path(first)
        raise PlanParseError(f"Task schema violation at {path}: {first['msg']}", path=path) from e


def parse_tasks(text: Union[str, bytes]) -> List[TaskSpec]:
    """Parse a JSON array of tasks."""
    data = load_json_text(text)
    if not isinstance(data, list):
        raise PlanParseError("Task list must be a JSON array", path="$")
    tasks = []
    for i, raw in enumerate(data):
        try:
            tasks.append(parse_task(raw))
        except PlanParseError as e:
            raise PlanParseError(f"[{i}] {e}", path=f"[{i}].{e.path}") from e
    return tasks


def serialize_task(task: TaskSpec) -> str:
    return json.dumps(task.model_dump(mode="json", exclude_none=True), indent=2, ensure_ascii=False) + "\n"


def load_sample_tasks() -> List[TaskSpec]:
    """The shipped hand-authored sample tasks."""
    text = resources.files("benchgen.data").joinpath("sample_tasks.json").read_text(encoding="utf-8")
    return parse_tasks(text)


@dataclass
class SceneState:
    """
    Snapshot of object poses during or after an episode.

    Attributes:
        poses: Object name to pose (box center)
        gripper_aperture: Gripper opening in meters
        held: Name of the grasped object, if any
        rest_heights: Settled center height of each object, for ``lifted``
    """

    poses: Dict[str, Pose] = field(default_factory=dict)
    gripper_aperture: float = 0.0
    held: Optional[str] = None
    rest_heights: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_scene(cls, scene: Scene, held: Optional[str] = None,
                   gripper_aperture: float = 0.0) -> "SceneState":
        """State whose rest heights are the scene's own heights."""
        poses = {p.name: p.pose for p in scene.placements}
        rest = {p.name: p.pose.position[2] for p in scene.placements}
        return cls(poses, gripper_aperture, held, rest)

    def moved(self, name: str, position: Sequence[float],
              orientation: Optional[Sequence[float]] = None) -> "SceneState":
        """Copy of this state with one object moved."""
        if name not in self.poses:
            raise EvaluationError(f"Object '{name}' is not in the scene state")
        poses = dict(self.poses)
        poses[name] = Pose(tuple(position), tuple(orientation) if orientation else poses[name].orientation)
        return SceneState(poses, self.gripper_aperture, self.held, dict(self.rest_heights))

    def check_objects(self, names: Iterable[str]) -> None:
        """Raise EvaluationError unless the state's object set equals ``names``."""
        expected = set(names)
        actual = set(self.poses)
        if expected != actual:
            raise EvaluationError(f"Scene state objects differ: missing {sorted(expected - actual)}, "
                                  f"unexpected {sorted(actual - expected)}")


def _box(state: SceneState, dims: Mapping[str, Sequence[float]], name: str) -> Obb:
    if name not in state.poses:
        raise EvaluationError(f"Object '{name}' is not in the scene state")
    if name not in dims:
        raise EvaluationError(f"No dimensions for object '{name}'")
    return Obb.from_pose(state.poses[name], dims[name])


def _inside(subject: Obb, reference: Obb) -> bool:
    return reference.contains_point(subject.center) and subject.top <= reference.top


def _on_top_of(subject: Obb, reference: Obb) -> bool:
    if abs(subject.bottom - reference.top) > CONTACT_TOLERANCE:
        return False
    local = reference.to_local_xy(subject.center[:2])
    return abs(local[0]) <= reference.half_extents[0] and abs(local[1]) <= reference.half_extents[1]


def eval_condition(c: TerminationCondition,
                   state: SceneState,
                   dims: Mapping[str, Sequence[float]]) -> bool:
    """
    Evaluate one termination condition on a scene snapshot.

    Spatial relations use the table frame: front is +x and left is +y.

    Args:
        c: Condition to evaluate
        state: Object poses (and grasp state)
        dims: Object dimensions keyed by name

    Returns:
        bool: Whether the condition holds

    Raises:
        EvaluationError: If a referenced object is missing
    """
    p = c.predicate
    if p == "count_in":
        ref = _box(state, dims, c.reference)
        count = sum(1 for s in c.subjects if _inside(_box(state, dims, s), ref))
        return count >= int(c.threshold)

    subject_name = c.subjects[0]
    subject = _box(state, dims, subject_name)
    if p == "grasped":
        return state.held == subject_name
    if p == "lifted":
        rest = state.rest_heights.get(subject_name, 0.5 * dims[subject_name][2])
        return subject.center[2] - rest >= LIFT_HEIGHT
    if p == "upright":
        up = rotate_vector(state.poses[subject_name].orientation, (0.0, 0.0, 1.0))
        cos_angle = float(np.clip(up[2] / np.linalg.norm(up), -1.0, 1.0))
        return math.acos(cos_angle) <= UPRIGHT_TOLERANCE

    ref = _box(state, dims, c.reference)
    if p == "inside":
        return _inside(subject, ref)
    if p == "on_top_of":
        return _on_top_of(subject, ref)
    if p == "near":
        return float(np.linalg.norm(np.subtract(subject.center, ref.center))) <= c.threshold
    dx = subject.center[0] - ref.center[0]
    dy = subject.center[1] - ref.center[1]
    if p == "left_of":
        return dy > 0
    if p == "right_of":
        return dy < 0
    if p == "in_front_of":
        return dx > 0
    if p == "behind":
        return dx < 0
    raise EvaluationError(f"Unknown predicate '{p}'")


def subtask_progress(subtask: Subtask,
                     states: Sequence[SceneState],
                     dims: Mapping[str, Sequence[float]]) -> int:
    """
    Number of leading steps achieved in order over a sequence of snapshots.

    Step i counts if it holds at some snapshot no earlier than the one where
    step i-1 was achieved.
    """
    cursor = 0
    achieved = 0
    for step in subtask.steps:
        hit = next((t for t in range(cursor, len(states)) if eval_condition(step, states[t], dims)), None)
        if hit is None:
            break
        achieved += 1
        cursor = hit
    return achieved


def graded_score(task: TaskSpec,
                 final_state: SceneState,
                 dims: Mapping[str, Sequence[float]],
                 event_log: Optional[Sequence[SceneState]] = None) -> float:
    """
    Normalized graded score of a task in [0, 1].

    Each subtask scores the fraction of its steps achieved with prefix
    credit; the task score is the unweighted mean over subtasks.

    Args:
        task: Task to score
        final_state: State at the end of the episode
        dims: Object dimensions keyed by name
        event_log: Optional earlier snapshots, oldest first

    Returns:
        float: Score in [0, 1]
    """
    states = list(event_log or []) + [final_state]
    scores = [subtask_progress(sub, states, dims) / len(sub.steps) for sub in task.subtasks]
    return sum(scores) / len(scores)


def success(task: TaskSpec,
            final_state: SceneState,
            dims: Mapping[str, Sequence[float]],
            event_log: Optional[Sequence[SceneState]] = None) -> bool:
    """True iff every step of every subtask is achieved."""
    states = list(event_log or []) + [final_state]
    return all(subtask_progress(sub, states, dims) == len(sub.steps) for sub in task.subtasks)
