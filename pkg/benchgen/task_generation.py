"""
Task generation and validation.

Tasks are requested for a competency axis, subcategory and difficulty over
a solved scene. Each reply is parsed as a TaskSpec and checked against the
scene; invalid replies are sent back with the error text in a fix prompt.
"""

import json
import logging
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

from .chat_client import ChatClient, extract_json_payload
from .config import GenerationConfig
from .exceptions import GenerationError, InvalidInputError, LLMResponseError, PlanParseError
from .prompts import (AXIS_GUIDES, DIFFICULTY_GUIDES, fill_template, get_template,
                      predicate_library_text)
from .scene_model import Scene, Violation, load_json_text
from .scene_generation import GenReport
from .task_model import COMPETENCY_AXES, DIFFICULTIES, TaskSpec, parse_task, serialize_task
from .utils import safe_progress_callback, safe_status_callback

logger = logging.getLogger(__name__)


def _instruction_key(text: str) -> str:
    return " ".join(text.lower().split())


def validate_task(task: Union[TaskSpec, dict, str, bytes],
                  scene: Scene,
                  clearance: float = 0.01,
                  forbidden: Iterable[str] = ()) -> List[Violation]:
    """
    Check a task against a scene.

    Rules: the task must match the task schema and predicate library; every
    referenced object must exist in the scene and not be forbidden; every
    object required inside a container must fit its opening with
    ``clearance`` and be no taller than the container.

    Args:
        task: Parsed task or raw JSON
        scene: Scene the task runs in
        clearance: Horizontal clearance for containment, in meters
        forbidden: Object names tasks may not reference

    Returns:
        List[Violation]: Empty when the task is valid
    """
    if not isinstance(task, TaskSpec):
        try:
            task = parse_task(task)
        except PlanParseError as e:
            return [Violation(e.path or "$", str(e))]

    violations: List[Violation] = []
    present = set(scene.names)
    banned = set(forbidden)
    for name in task.objects:
        if name not in present:
            violations.append(Violation("objects", f"'{name}' is not in the scene"))
        elif name in banned:
            violations.append(Violation("objects", f"'{name}' may not be referenced"))

    dims = scene.dims()
    for s, sub in enumerate(task.subtasks):
        for k, cond in enumerate(sub.steps):
            if cond.predicate not in ("inside", "count_in"):
                continue
            container = cond.reference
            if container not in dims:
                continue
            cx, cy, cz = dims[container]
            for name in cond.subjects:
                if name not in dims:
                    continue
                ox, oy, oz = dims[name]
                if max(ox, oy) + clearance > min(cx, cy) or oz > cz:
                    violations.append(Violation(
                        f"subtasks[{s}].steps[{k}]",
                        f"'{name}' ({ox:.3f} x {oy:.3f} x {oz:.3f} m) does not fit inside "
                        f"'{container}' ({cx:.3f} x {cy:.3f} x {cz:.3f} m) with {clearance:g} m clearance"))
    return violations


def _scene_lines(scene: Scene) -> str:
    return "\n".join(f"- {p.name} ({p.category.value}): {p.dims[0]:.3f} x {p.dims[1]:.3f} x {p.dims[2]:.3f}"
                     for p in scene.placements)


def build_task_prompt(scene: Scene,
                      axis: str,
                      subcategory: str,
                      difficulty: str,
                      prior_tasks: Sequence[Union[TaskSpec, str]] = (),
                      examples: Sequence[TaskSpec] = (),
                      scene_name: str = "") -> Tuple[str, str]:
    """
    Assemble the task designer's system and user prompts.

    Raises:
        InvalidInputError: For an empty scene or an unknown axis, subcategory or difficulty
    """
    if not scene.placements:
        raise InvalidInputError("Cannot generate tasks for an empty scene")
    if axis not in COMPETENCY_AXES:
        raise InvalidInputError(f"Unknown axis '{axis}'. Available axes: {', '.join(COMPETENCY_AXES)}")
    if subcategory not in COMPETENCY_AXES[axis]:
        raise InvalidInputError(f"Subcategory '{subcategory}' does not belong to axis '{axis}'")
    if difficulty not in DIFFICULTIES:
        raise InvalidInputError(f"Unknown difficulty '{difficulty}'")

    system = fill_template(get_template("task_system"), predicates=predicate_library_text())
    prior = [t.instruction if isinstance(t, TaskSpec) else str(t) for t in prior_tasks]
    shown = "\n\n".join(serialize_task(t).strip() for t in examples) or "(none)"
    user = fill_template(get_template("task_user"),
                         scene_name=scene_name or "(unnamed)",
                         scene_objects=_scene_lines(scene),
                         axis=axis,
                         subcategory=subcategory,
                         axis_guide=AXIS_GUIDES[axis][subcategory],
                         difficulty=difficulty,
                         difficulty_guide=DIFFICULTY_GUIDES[difficulty],
                         examples=shown,
                         prior_tasks="\n".join(f"- {p}" for p in prior) or "(none)")
    return system, user.strip() + "\n"


def _fix_prompt(user: str, invalid_output: str, errors: Sequence[str]) -> str:
    block = fill_template(get_template("task_fix"),
                          invalid_output=invalid_output.strip(),
                          errors="\n".join(f"- {e}" for e in errors))
    return user + "\n" + block.strip() + "\n"


def generate_task(scene: Scene,
                  axis: str,
                  subcategory: str,
                  difficulty: str,
                  client: ChatClient,
                  prior_tasks: Sequence[Union[TaskSpec, str]] = (),
                  max_attempts: Optional[int] = None,
                  examples: Sequence[TaskSpec] = (),
                  scene_name: str = "",
                  forbidden: Iterable[str] = (),
                  cfg: Optional[GenerationConfig] = None,
                  status_callback: Optional[Callable[[str], None]] = None,
                  progress_callback: Optional[Callable[[int], None]] = None) -> Tuple[TaskSpec, GenReport]:
    """
    Generate one validated task for a scene.

    Args:
        scene: Solved scene
        axis: Competency axis (visual, procedural, relational)
        subcategory: Subcategory of the axis
        difficulty: simple, moderate or complex
        client: Chat client
        prior_tasks: Earlier tasks (or instructions) that must not be repeated
        max_attempts: Attempt budget (default from GenerationConfig, 3)
        examples: Example tasks shown in the prompt
        scene_name: Scene identifier stored in the task
        forbidden: Objects tasks may not reference
        cfg: Generation settings (clearance, attempts)
        status_callback: Optional callback for status messages
        progress_callback: Optional callback for progress percentage

    Returns:
        Tuple of the task and the GenReport

    Raises:
        GenerationError: If no valid task was produced within the budget
    """
    cfg = cfg or GenerationConfig()
    budget = max_attempts if max_attempts is not None else cfg.max_attempts
    forbidden = tuple(forbidden)
    system, user = build_task_prompt(scene, axis, subcategory, difficulty, prior_tasks, examples, scene_name)
    seen = {_instruction_key(t.instruction if isinstance(t, TaskSpec) else str(t)) for t in prior_tasks}
    report = GenReport(max_attempts=budget)

    content = user
    for attempt in range(1, budget + 1):
        report.attempts = attempt
        safe_status_callback(status_callback, f"Generating {axis}/{subcategory} task, attempt {attempt}/{budget}...")
        reply = client.complete([{"role": "system", "content": system},
                                 {"role": "user", "content": content}])
        errors: List[str] = []
        task: Optional[TaskSpec] = None
        try:
            raw = load_json_text(extract_json_payload(reply))
            if isinstance(raw, dict):
                raw.setdefault("axis", axis)
                raw.setdefault("subcategory", subcategory)
                raw.setdefault("difficulty", difficulty)
                if scene_name:
                    raw.setdefault("scene", scene_name)
            task = parse_task(raw)
        except (PlanParseError, LLMResponseError) as e:
            errors.append(str(e))

        if task is not None:
            if (task.axis, task.subcategory, task.difficulty) != (axis, subcategory, difficulty):
                errors.append(f"task must be tagged {axis}/{subcategory}/{difficulty}, got "
                              f"{task.axis}/{task.subcategory}/{task.difficulty}")
            if _instruction_key(task.instruction) in seen:
                errors.append(f"instruction duplicates a previous task: '{task.instruction}'")
            errors.extend(str(v) for v in validate_task(task, scene, cfg.containment_clearance, forbidden))

        if not errors:
            report.success = True
            report.plan = json.loads(serialize_task(task))
            safe_progress_callback(progress_callback, 100)
            logger.info("Task '%s' accepted on attempt %d", task.task_id, attempt)
            return task, report

        feedback = "\n".join(errors)
        report.feedback.append(feedback)
        logger.info("Task attempt %d/%d failed: %s", attempt, budget, errors[0])
        safe_progress_callback(progress_callback, int(100 * attempt / budget))
        content = _fix_prompt(user, reply, errors)

    raise GenerationError(f"Task generation for {axis}/{subcategory} failed after {budget} attempts", report)
