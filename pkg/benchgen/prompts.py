"""
Prompt templates for scene planning, task generation and judging.

Templates ship as text files under ``benchgen/templates``. Placeholders are
written as ``[NAME]`` and filled with ``fill_template``.
"""

from functools import lru_cache
from importlib import resources
from typing import Dict, List

TEMPLATE_VERSION = 1

_TEMPLATE_FILES = {
    "scene_system": "scene_system.txt",
    "scene_user": "scene_user.txt",
    "strategy_sparse": "strategy_sparse.txt",
    "strategy_medium": "strategy_medium.txt",
    "strategy_dense": "strategy_dense.txt",
    "feedback": "feedback.txt",
    "task_system": "task_system.txt",
    "task_user": "task_user.txt",
    "task_fix": "task_fix.txt",
    "judge": "judge.txt",
}

FEEDBACK_HEADER = "PREVIOUS ATTEMPT FAILED"

PREDICATE_DOCS: Dict[str, str] = {
    "inside": '{"predicate": "inside", "subjects": ["a"], "reference": "c"} - a rests inside container c',
    "on_top_of": '{"predicate": "on_top_of", "subjects": ["a"], "reference": "s"} - a rests on top of s',
    "near": '{"predicate": "near", "subjects": ["a"], "reference": "b", "threshold": 0.1} '
            '- a is within threshold meters of b',
    "lifted": '{"predicate": "lifted", "subjects": ["a"]} - a is held at least 5 cm above where it rested',
    "upright": '{"predicate": "upright", "subjects": ["a"]} - a stands upright (tilt under 15 degrees)',
    "left_of": '{"predicate": "left_of", "subjects": ["a"], "reference": "b"} - a is left of b (+Y)',
    "right_of": '{"predicate": "right_of", "subjects": ["a"], "reference": "b"} - a is right of b (-Y)',
    "in_front_of": '{"predicate": "in_front_of", "subjects": ["a"], "reference": "b"} - a is in front of b (+X)',
    "behind": '{"predicate": "behind", "subjects": ["a"], "reference": "b"} - a is behind b (-X)',
    "count_in": '{"predicate": "count_in", "subjects": ["a", "b", "d"], "reference": "c", "threshold": 2} '
                '- at least threshold of the subjects are inside c',
    "grasped": '{"predicate": "grasped", "subjects": ["a"]} - the gripper holds a',
}

AXIS_GUIDES: Dict[str, Dict[str, str]] = {
    "visual": {
        "color": 'Identify objects by color: "Put the red block in the bin."',
        "semantics": 'Identify objects by what they are or are used for: "Put the fruit in the bowl."',
        "size": 'Identify objects by relative size: "Put the largest bowl on the tray."',
    },
    "procedural": {
        "affordance": 'Use an object for what it affords: "Put the spoon in the mug."',
        "reorientation": 'Change how an object stands: "Stand the ketchup bottle upright."',
        "stacking": 'Build stacks of objects: "Stack the green block on the red block."',
    },
    "relational": {
        "conjunction": 'Handle several objects in one instruction: "Pick the lemon and the lime."',
        "counting": 'Manipulate an exact number of objects: "Put three bananas in the bin."',
        "spatial": 'Place objects relative to others: "Put the apple left of the plate."',
    },
}

DIFFICULTY_GUIDES: Dict[str, str] = {
    "simple": "One object, one placement (a single subtask).",
    "moderate": "Two or three objects or placements (two or three subtasks).",
    "complex": "Four or more placements, or an ordered sequence where later steps depend on earlier ones.",
}


@lru_cache(maxsize=None)
def _read_template(filename: str) -> str:
    return resources.files("benchgen.templates").joinpath(filename).read_text(encoding="utf-8")


def get_available_templates() -> List[str]:
    """Get list of available template names."""
    return list(_TEMPLATE_FILES)


def get_template(name: str) -> str:
    """
    Get the raw text of a prompt template.

    Args:
        name: Template name (see get_available_templates)

    Returns:
        str: The template text

    Raises:
        ValueError: If name is not found
    """
    if name not in _TEMPLATE_FILES:
        available = ", ".join(get_available_templates())
        raise ValueError(f"Unknown template '{name}'. Available templates: {available}")
    return _read_template(_TEMPLATE_FILES[name])


def fill_template(template: str, **values: object) -> str:
    """Replace ``[KEY]`` placeholders with the given values (keys upper-cased)."""
    text = template
    for key, value in values.items():
        text = text.replace(f"[{key.upper()}]", str(value))
    return text


def strategy_block(target_count: int) -> str:
    """Density strategy for a target object count: sparse below 10, medium up to 14, dense above."""
    if target_count < 10:
        return get_template("strategy_sparse").strip()
    if target_count <= 14:
        return get_template("strategy_medium").strip()
    return get_template("strategy_dense").strip()


def feedback_block(feedback: str) -> str:
    return fill_template(get_template("feedback"), feedback=feedback.strip()).strip()


def predicate_library_text() -> str:
    return "\n".join(f"- {name}: {doc}" for name, doc in PREDICATE_DOCS.items())
