"""
benchgen - Tabletop manipulation benchmark generation and analysis

This package turns a scene theme into a physically valid tabletop scene,
generates language-conditioned tasks with checkable termination conditions,
scores task alignment with an LLM judge, and analyzes policy rollouts
(success, graded score, motion smoothness, sensitivity to variations).

Main Classes:
- BenchGenAPI: High-level interface over the pipelines
- ChatClient: Chat-completion client with replay/record transcripts

Quick Usage:
    from benchgen import BenchGenAPI

    api = BenchGenAPI(fixture_dir="transcripts")
    scene, report = api.generate_scene("breakfast table", seed=0)
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from .chat_client import ChatClient
from .config import (BenchConfig, GenerationConfig, JudgeConfig, LLMConfig, MetricsConfig, PlacementConfig,
                     SensitivityConfig, SolverConfig, load_config_from_env)
from .exceptions import (BenchGenError, ConfigurationError, EvaluationError, FileOperationError,
                         GenerationError, InvalidInputError, LLMError, LLMReplayMissError, LLMResponseError,
                         MetricsError, PlacementFailure, PlanParseError, SensitivityError, SolveFailure)
from .geometry import Obb, Pose, Rect2D, TableBounds
from .judge import JudgeRecord, JudgeScores, coverage, judge_task, judge_tasks, summarize_judgments
from .placement_solver import StabilityReport, baseline_grid_layout, settle_and_check, solve_physical
from .scene_generation import GenReport, generate_scene
from .scene_model import (Catalog, CatalogEntry, Category, Scene, ScenePlan, default_catalog, load_catalog,
                          parse_scene, parse_scene_plan, serialize_scene, validate_plan)
from .sensitivity import Dataset, PosteriorResult, VariationSpace, analyze, parse_variation_space
from .spatial_solver import solve_spatial
from .task_generation import generate_task, validate_task
from .task_model import SceneState, TaskSpec, eval_condition, graded_score, load_sample_tasks, parse_task, success
from .trajectory_metrics import EpisodeRecord, MetricsSummary, aggregate, load_episodes, sparc

__version__ = "0.1.0"


class BenchGenAPI:
    """
    Main API class bundling configuration, catalog and chat client.

    The chat client is created on first use, so solver-only and analysis-only
    workflows never need LLM settings.
    """

    def __init__(self,
                 config: Optional[BenchConfig] = None,
                 catalog: Optional[Catalog] = None,
                 fixture_dir: Optional[str] = None):
        """
        Initialize the API.

        Args:
            config: Full configuration (defaults everywhere when None)
            catalog: Object catalog (the shipped catalog when None)
            fixture_dir: Replay transcript directory, used when config has no LLM settings
        """
        self.config = config or BenchConfig()
        if self.config.llm is None and fixture_dir:
            self.config.llm = LLMConfig(mode="replay", fixture_dir=fixture_dir)
        self.catalog = catalog or default_catalog()
        self._client: Optional[ChatClient] = None

    @property
    def client(self) -> ChatClient:
        if self._client is None:
            if self.config.llm is None:
                raise ConfigurationError("No LLM configuration; pass fixture_dir or set LLM_* variables")
            self._client = ChatClient(self.config.llm)
        return self._client

    def generate_scene(self, theme: str, seed: int = 0, target_count: int = 10,
                       bounds: Optional[TableBounds] = None) -> Tuple[Scene, GenReport]:
        """
        Generate a scene for a theme.

        Raises:
            GenerationError: If the attempt budget runs out
        """
        return generate_scene(theme, self.catalog, bounds, self.client,
                              rng=np.random.default_rng(seed), target_count=target_count,
                              gen_cfg=self.config.generation, solver_cfg=self.config.solver,
                              placement_cfg=self.config.placement)

    def generate_task(self, scene: Scene, axis: str, subcategory: str, difficulty: str,
                      prior_tasks: Sequence[TaskSpec] = ()) -> Tuple[TaskSpec, GenReport]:
        return generate_task(scene, axis, subcategory, difficulty, self.client, prior_tasks=prior_tasks,
                             cfg=self.config.generation)

    def judge(self, tasks: Sequence[TaskSpec]) -> List[JudgeRecord]:
        return judge_tasks(tasks, self.client, self.config.judge)

    def evaluate(self, episodes: Sequence[EpisodeRecord], tasks: Sequence[TaskSpec]) -> MetricsSummary:
        dims = {e.name: e.dims for e in self.catalog}
        return aggregate(episodes, tasks, dims, self.config.metrics)

    def sensitivity(self, space: VariationSpace, episodes: Sequence[EpisodeRecord],
                    outcome: int = 1, seed: int = 0) -> PosteriorResult:
        return analyze(Dataset.from_episodes(space, episodes), outcome, self.config.sensitivity, seed)


# Convenience Functions

def load_api_from_env(fixture_dir: Optional[str] = None) -> BenchGenAPI:
    """
    Build the API from ``LLM_*`` environment variables (and ``.env``).

    Raises:
        ConfigurationError: If the environment describes an invalid client
    """
    return BenchGenAPI(load_config_from_env(fixture_dir))


__all__ = [
    # Main classes
    "BenchGenAPI",
    "ChatClient",

    # Configuration
    "BenchConfig",
    "GenerationConfig",
    "JudgeConfig",
    "LLMConfig",
    "MetricsConfig",
    "PlacementConfig",
    "SensitivityConfig",
    "SolverConfig",
    "load_config_from_env",
    "load_api_from_env",

    # Data models
    "Catalog",
    "CatalogEntry",
    "Category",
    "Dataset",
    "EpisodeRecord",
    "GenReport",
    "JudgeRecord",
    "JudgeScores",
    "MetricsSummary",
    "Obb",
    "Pose",
    "PosteriorResult",
    "Rect2D",
    "Scene",
    "ScenePlan",
    "SceneState",
    "StabilityReport",
    "TableBounds",
    "TaskSpec",
    "VariationSpace",

    # Operations
    "aggregate",
    "analyze",
    "baseline_grid_layout",
    "coverage",
    "default_catalog",
    "eval_condition",
    "generate_scene",
    "generate_task",
    "graded_score",
    "judge_task",
    "judge_tasks",
    "load_catalog",
    "load_episodes",
    "load_sample_tasks",
    "parse_scene",
    "parse_scene_plan",
    "parse_task",
    "parse_variation_space",
    "serialize_scene",
    "settle_and_check",
    "solve_physical",
    "solve_spatial",
    "sparc",
    "success",
    "summarize_judgments",
    "validate_plan",
    "validate_task",

    # Exceptions
    "BenchGenError",
    "ConfigurationError",
    "EvaluationError",
    "FileOperationError",
    "GenerationError",
    "InvalidInputError",
    "LLMError",
    "LLMReplayMissError",
    "LLMResponseError",
    "MetricsError",
    "PlacementFailure",
    "PlanParseError",
    "SensitivityError",
    "SolveFailure",
]
