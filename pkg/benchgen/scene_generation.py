"""
Scene generation: plan with a language model, solve, settle, refine.

Each attempt asks the planner for a ScenePlan, repairs it against the
catalog, solves base-level positions, stacks and fills containers, and runs
the stability check. Any failure is rendered as feedback and appended to the
next request under the "PREVIOUS ATTEMPT FAILED" header.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .chat_client import ChatClient, extract_json_payload
from .config import GenerationConfig, PlacementConfig, SolverConfig
from .exceptions import (GenerationError, InvalidInputError, LLMResponseError, PlacementFailure,
                         PlanParseError, SolveFailure)
from .geometry import TableBounds
from .placement_solver import feedback_message, settle_and_check, solve_physical
from .prompts import feedback_block, fill_template, get_template, strategy_block
from .scene_model import Catalog, Category, Scene, ScenePlan, parse_scene_plan, serialize_plan, validate_plan
from .spatial_solver import find_collisions, solve_spatial
from .utils import safe_progress_callback, safe_status_callback

logger = logging.getLogger(__name__)

LARGE_FOOTPRINT = 0.08

_BUCKETS = (
    ("containers", Category.CONTAINER),
    ("supports", Category.SUPPORT),
    ("food", Category.FOOD),
    ("tools", Category.TOOL),
    ("other", Category.OTHER),
)


@dataclass
class GenReport:
    """
    Outcome of a generate -> validate -> refine loop.

    Attributes:
        attempts: Attempts used
        max_attempts: Attempt budget
        feedback: Feedback text produced by each failed attempt, in order
        success: Whether the final attempt produced a valid result
        plan: The last parsed plan (scene loop) or raw output (task loop)
        repairs: Plan repairs made by validation on the accepted attempt
    """

    attempts: int = 0
    max_attempts: int = 3
    feedback: List[str] = field(default_factory=list)
    success: bool = False
    plan: Optional[Any] = None
    repairs: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.attempts > self.max_attempts:
            raise InvalidInputError("attempts must not exceed max_attempts")

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "attempts": self.attempts,
            "max_attempts": self.max_attempts,
            "success": self.success,
            "feedback": list(self.feedback),
            "repairs": list(self.repairs),
        }
        if isinstance(self.plan, ScenePlan):
            out["plan"] = self.plan.model_dump(mode="json")
        elif self.plan is not None:
            out["plan"] = self.plan
        return out


def _names(entries) -> str:
    return ", ".join(e.name for e in entries) or "(none)"


def build_scene_prompt(theme: str,
                       catalog: Catalog,
                       target_count: int,
                       rng: Optional[np.random.Generator] = None,
                       bounds: Optional[TableBounds] = None,
                       suggestion_count: int = 5) -> Tuple[str, str]:
    """
    Assemble the planner's system and user prompts.

    Args:
        theme: Scene theme, e.g. "messy kitchen counter"
        catalog: Objects the planner may use
        target_count: Requested number of objects
        rng: Generator for the diversity suggestions
        bounds: Table surface
        suggestion_count: Number of suggested objects

    Returns:
        Tuple of (system_prompt, user_prompt)

    Raises:
        InvalidInputError: If the catalog is empty or target_count < 1
    """
    if len(catalog) == 0:
        raise InvalidInputError("Cannot build a scene prompt from an empty catalog")
    if target_count < 1:
        raise InvalidInputError(f"target_count must be >= 1, got {target_count}")
    bounds = bounds or TableBounds()
    rng = rng if rng is not None else np.random.default_rng(0)

    cx, cy = bounds.center
    system = fill_template(get_template("scene_system"),
                           x_min=f"{bounds.x_min:.2f}", x_max=f"{bounds.x_max:.2f}",
                           y_min=f"{bounds.y_min:.2f}", y_max=f"{bounds.y_max:.2f}",
                           x_center=f"{cx:.2f}", y_center=f"{cy:.1f}")

    large = [e for e in catalog if e.footprint_area > LARGE_FOOTPRINT]
    picks = rng.choice(len(catalog), size=min(suggestion_count, len(catalog)), replace=False)
    suggested = [catalog.names[i] for i in sorted(int(i) for i in picks)]
    buckets = {key: _names(catalog.by_category(cat)) for key, cat in _BUCKETS}
    user = fill_template(get_template("scene_user"),
                         theme=theme,
                         target_count=target_count,
                         table_depth=f"{bounds.depth:.1f}",
                         table_width=f"{bounds.width:.1f}",
                         table_area=f"{bounds.area:.2f}",
                         large_objects=_names(large),
                         strategy=strategy_block(target_count),
                         suggested=", ".join(suggested) or "(none)",
                         **buckets)
    return system, user.strip() + "\n"


def _attempt(plan: ScenePlan,
             catalog: Catalog,
             bounds: TableBounds,
             solver_cfg: SolverConfig,
             placement_cfg: PlacementConfig,
             rng: np.random.Generator) -> Scene:
    """Solve one plan; raises with feedback-ready failures."""
    layout = solve_spatial(plan, catalog, bounds, solver_cfg)
    physical = solve_physical(plan, catalog, layout, bounds, placement_cfg, rng)
    for container, names in physical.dropped.items():
        logger.info("Container '%s' could not hold %s; dropped", container, names)
    report = settle_and_check(physical.scene, placement_cfg.stability_threshold, placement_cfg)
    if not report.stable:
        raise _Unstable(feedback_message(report))
    dims = {n: catalog[n].dims for n in layout.poses}
    residual = find_collisions(layout.poses, dims, 0.0)
    if residual:
        raise _Unstable("\n".join(f"Objects '{a}' and '{b}' collide" for a, b in residual))
    problems = physical.scene.invariant_violations()
    if problems:
        raise _Unstable("\n".join(v.message for v in problems))
    return physical.scene


class _Unstable(Exception):
    pass


def generate_scene(theme: str,
                   catalog: Catalog,
                   bounds: Optional[TableBounds],
                   client: ChatClient,
                   max_attempts: Optional[int] = None,
                   rng: Optional[np.random.Generator] = None,
                   target_count: int = 10,
                   gen_cfg: Optional[GenerationConfig] = None,
                   solver_cfg: Optional[SolverConfig] = None,
                   placement_cfg: Optional[PlacementConfig] = None,
                   status_callback: Optional[Callable[[str], None]] = None,
                   progress_callback: Optional[Callable[[int], None]] = None) -> Tuple[Scene, GenReport]:
    """
    Generate a physically valid scene for a theme.

    Args:
        theme: Scene theme
        catalog: Objects the planner may use
        bounds: Table surface (default table when None)
        client: Chat client (replay mode for tests)
        max_attempts: Attempt budget (default from GenerationConfig, 3)
        rng: Generator for suggestions and physical placement
        target_count: Requested object count
        gen_cfg: Generation settings
        solver_cfg: Spatial solver settings
        placement_cfg: Physical placement settings
        status_callback: Optional callback for status messages
        progress_callback: Optional callback for progress percentage

    Returns:
        Tuple of the scene and the GenReport

    Raises:
        GenerationError: If every attempt failed; carries the GenReport
    """
    gen_cfg = gen_cfg or GenerationConfig()
    solver_cfg = solver_cfg or SolverConfig()
    placement_cfg = placement_cfg or PlacementConfig()
    bounds = bounds or TableBounds()
    rng = rng if rng is not None else np.random.default_rng(solver_cfg.rng_seed)
    budget = max_attempts if max_attempts is not None else gen_cfg.max_attempts
    if budget <= 0:
        raise InvalidInputError("max_attempts must be > 0")

    system, user = build_scene_prompt(theme, catalog, target_count, rng, bounds, gen_cfg.suggestion_count)
    report = GenReport(max_attempts=budget)

    for attempt in range(1, budget + 1):
        report.attempts = attempt
        content = user if not report.feedback else user + "\n" + feedback_block(report.feedback[-1]) + "\n"
        safe_status_callback(status_callback, f"Planning scene '{theme}', attempt {attempt}/{budget}...")
        reply = client.complete([{"role": "system", "content": system},
                                 {"role": "user", "content": content}])
        try:
            plan = parse_scene_plan(extract_json_payload(reply))
            plan, violations = validate_plan(plan, catalog, bounds)
            report.plan = plan
            report.repairs = [str(v) for v in violations]
            if not plan.objects:
                raise _Unstable("The plan contains no objects from the catalog")
            scene = _attempt(plan, catalog, bounds, solver_cfg, placement_cfg, rng)
        except PlanParseError as e:
            feedback = f"Invalid plan JSON: {e}"
        except (SolveFailure, PlacementFailure) as e:
            feedback = feedback_message(e)
        except (_Unstable, InvalidInputError, LLMResponseError) as e:
            feedback = str(e)
        else:
            report.success = True
            safe_progress_callback(progress_callback, 100)
            safe_status_callback(status_callback, f"Scene '{theme}' generated in {attempt} attempt(s).")
            logger.info("Scene '%s' accepted on attempt %d", theme, attempt)
            return scene, report

        report.feedback.append(feedback)
        logger.info("Scene attempt %d/%d failed: %s", attempt, budget, (feedback.splitlines() or [""])[0])
        safe_status_callback(status_callback, f"Attempt {attempt} failed: {feedback}")
        safe_progress_callback(progress_callback, int(100 * attempt / budget))

    raise GenerationError(f"Scene generation for '{theme}' failed after {budget} attempts", report)


def plan_json(report: GenReport) -> Optional[str]:
    """The accepted plan in wire format, if any."""
    return serialize_plan(report.plan) if isinstance(report.plan, ScenePlan) else None
