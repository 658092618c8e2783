"""
Configuration classes for benchgen.

This module provides dataclass-based configuration objects for the solvers,
the LLM pipelines, the metrics and the sensitivity analysis. Every object
validates itself on construction so that a bad value fails at the call site
rather than deep inside a solve.
"""

from dataclasses import dataclass, field
from typing import List, Optional
import os

from dotenv import load_dotenv

from .exceptions import ConfigurationError


LLM_MODES = ("live", "replay", "record")


@dataclass
class SolverConfig:
    """Configuration for the spatial constraint solver."""

    base_margin: float = 0.01
    margin_ladder: List[float] = field(default_factory=lambda: [1.0, 1.25, 1.5, 2.0])
    k_max: int = 200
    stall_window: int = 10
    perturb_sigma: float = 0.03
    relative_passes: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        """Validate configuration values."""
        if self.base_margin < 0:
            raise ValueError("base_margin must be >= 0")
        if not self.margin_ladder or self.margin_ladder[0] != 1.0:
            raise ValueError("margin_ladder must start at 1.0")
        if any(b <= a for a, b in zip(self.margin_ladder, self.margin_ladder[1:])):
            raise ValueError("margin_ladder must be strictly increasing")
        if self.k_max <= 0:
            raise ValueError("k_max must be > 0")
        if self.stall_window <= 0:
            raise ValueError("stall_window must be > 0")
        if self.perturb_sigma < 0:
            raise ValueError("perturb_sigma must be >= 0")
        if self.relative_passes <= 0:
            raise ValueError("relative_passes must be > 0")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")

    @property
    def margins(self) -> List[float]:
        """Absolute margins in meters, one per ladder rung."""
        return [self.base_margin * m for m in self.margin_ladder]


@dataclass
class PlacementConfig:
    """Configuration for stacking, containment and the stability check."""

    max_attempts: int = 20
    containment_margin: float = 0.005
    containment_scale: float = 0.7
    containment_buffer: float = 0.01
    fill_ratio: float = 0.8
    center_jitter: float = 0.01
    edge_band: float = 0.15
    stability_threshold: float = 0.02
    topple_inset: float = 0.01

    def __post_init__(self):
        """Validate configuration values."""
        if self.max_attempts <= 0:
            raise ValueError("max_attempts must be > 0")
        if self.containment_margin < 0:
            raise ValueError("containment_margin must be >= 0")
        if not 0 < self.containment_scale <= 1:
            raise ValueError("containment_scale must be in (0, 1]")
        if self.containment_buffer < 0:
            raise ValueError("containment_buffer must be >= 0")
        if not 0 < self.fill_ratio <= 1:
            raise ValueError("fill_ratio must be in (0, 1]")
        if not 0 < self.edge_band < 0.5:
            raise ValueError("edge_band must be in (0, 0.5)")
        if self.stability_threshold <= 0:
            raise ValueError("stability_threshold must be > 0")
        if self.topple_inset < 0:
            raise ValueError("topple_inset must be >= 0")


@dataclass
class LLMConfig:
    """Configuration for the chat-completion client."""

    api_key: Optional[str] = None
    endpoint: Optional[str] = None
    model_name: str = "gpt-4o"
    mode: str = "replay"
    fixture_dir: Optional[str] = None
    temperature: float = 0.0
    max_concurrency: int = 4
    rate_limit_retries: int = 5
    timeout: float = 120.0

    def __post_init__(self):
        """Validate the mode and load the API key from the environment if needed."""
        if self.mode not in LLM_MODES:
            raise ValueError(f"mode must be one of {LLM_MODES}, got '{self.mode}'")
        if not self.api_key:
            self.api_key = os.getenv("LLM_API_KEY")
        if not self.endpoint:
            self.endpoint = os.getenv("LLM_ENDPOINT")
        if self.max_concurrency <= 0:
            raise ValueError("max_concurrency must be > 0")
        if self.rate_limit_retries < 0:
            raise ValueError("rate_limit_retries must be >= 0")
        if self.mode != "live" and not self.fixture_dir:
            raise ValueError(f"fixture_dir is required in {self.mode} mode")
        if self.mode != "replay" and not self.api_key:
            raise ValueError("api_key is required in live/record mode (set directly or via LLM_API_KEY)")


@dataclass
class GenerationConfig:
    """Configuration for the scene and task refinement loops."""

    max_attempts: int = 3
    containment_clearance: float = 0.01
    suggestion_count: int = 5

    def __post_init__(self):
        """Validate configuration values."""
        if self.max_attempts <= 0:
            raise ValueError("max_attempts must be > 0")
        if self.containment_clearance < 0:
            raise ValueError("containment_clearance must be >= 0")
        if self.suggestion_count < 0:
            raise ValueError("suggestion_count must be >= 0")


@dataclass
class JudgeConfig:
    """Configuration for the LLM-as-judge alignment scoring."""

    # relation, target, object, quantifier, clarity, feasibility
    weights: List[float] = field(default_factory=lambda: [1 / 6] * 6)
    aligned_threshold: float = 0.9
    partial_threshold: float = 0.5

    def __post_init__(self):
        """Validate configuration values."""
        if len(self.weights) != 6:
            raise ValueError("weights must have exactly six entries")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be >= 0")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")


@dataclass
class MetricsConfig:
    """Configuration for trajectory smoothness metrics."""

    cutoff_max: float = 10.0
    amplitude_threshold: float = 0.05
    pad_factor: int = 4

    def __post_init__(self):
        """Validate configuration values."""
        if self.cutoff_max <= 0:
            raise ValueError("cutoff_max must be > 0")
        if not 0 < self.amplitude_threshold < 1:
            raise ValueError("amplitude_threshold must be in (0, 1)")
        if self.pad_factor < 1:
            raise ValueError("pad_factor must be >= 1")


@dataclass
class SensitivityConfig:
    """Configuration for the posterior estimation."""

    n_samples: int = 5000
    min_records: int = 10
    min_category_records: int = 5
    bandwidth_floor: float = 1e-3
    pose_beta: float = 1.0
    histogram_bins: int = 10

    def __post_init__(self):
        """Validate configuration values."""
        if self.n_samples <= 0:
            raise ValueError("n_samples must be > 0")
        if self.min_records <= 0:
            raise ValueError("min_records must be > 0")
        if self.bandwidth_floor <= 0:
            raise ValueError("bandwidth_floor must be > 0")
        if self.pose_beta < 0:
            raise ValueError("pose_beta must be >= 0")


@dataclass
class BenchConfig:
    """Main configuration object containing all settings."""

    llm: Optional[LLMConfig] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    sensitivity: SensitivityConfig = field(default_factory=SensitivityConfig)


def load_config_from_env(fixture_dir: Optional[str] = None) -> BenchConfig:
    """
    Load configuration from environment variables.

    A ``.env`` file in the working directory is read first when present.

    Expected environment variables:
    - LLM_API_KEY (required in live/record mode)
    - LLM_ENDPOINT (optional, OpenAI-compatible base URL)
    - LLM_MODEL (optional, defaults to "gpt-4o")
    - LLM_MODE (optional, defaults to "replay")

    Args:
        fixture_dir: Transcript directory used by replay/record modes

    Returns:
        BenchConfig: Configured settings

    Raises:
        ConfigurationError: If the environment describes an invalid client
    """
    load_dotenv()
    try:
        llm = LLMConfig(
            api_key=os.getenv("LLM_API_KEY"),
            endpoint=os.getenv("LLM_ENDPOINT"),
            model_name=os.getenv("LLM_MODEL", "gpt-4o"),
            mode=os.getenv("LLM_MODE", "replay"),
            fixture_dir=fixture_dir,
        )
    except ValueError as e:
        raise ConfigurationError(f"Invalid LLM configuration: {e}") from e
    return BenchConfig(llm=llm)
