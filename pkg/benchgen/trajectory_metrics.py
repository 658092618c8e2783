"""
Trajectory quality and episode aggregation.

Smoothness is measured with the spectral arc length (SPARC) of the
end-effector speed profile, with an adaptive cutoff at the highest frequency
whose normalized magnitude still reaches the amplitude threshold. Episode
logs are JSON lines, one EpisodeRecord per line.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.integrate import trapezoid

from .config import MetricsConfig
from .exceptions import EvaluationError, MetricsError, PlanParseError
from .geometry import Pose
from .task_model import COMPETENCY_AXES, DIFFICULTIES, SceneState, TaskSpec, graded_score
from .utils import read_text

logger = logging.getLogger(__name__)

EVENT_KINDS = ("wrong_object_grasped", "object_dropped", "gripper_collision")
EPISODE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Trajectory:
    """
    End-effector samples of one episode.

    Attributes:
        times: Sample timestamps in seconds, strictly increasing
        positions: (n, 3) end-effector positions in meters
        orientations: (n, 4) unit quaternions (w, x, y, z)
        gripper: (n,) gripper opening in [0, 1]
    """

    times: np.ndarray
    positions: np.ndarray
    orientations: Optional[np.ndarray] = None
    gripper: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        positions = np.asarray(self.positions, dtype=float)
        if times.ndim != 1 or len(times) < 2:
            raise MetricsError("A trajectory needs at least 2 samples")
        if positions.shape != (len(times), 3):
            raise MetricsError(f"positions must have shape ({len(times)}, 3), got {positions.shape}")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(positions))):
            raise MetricsError("Trajectory contains non-finite values")
        steps = np.diff(times)
        if np.any(steps == 0):
            raise MetricsError("Trajectory has duplicate timestamps")
        if np.any(steps < 0):
            raise MetricsError("Trajectory timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)
        if self.orientations is not None:
            object.__setattr__(self, "orientations", np.asarray(self.orientations, dtype=float))
        if self.gripper is not None:
            object.__setattr__(self, "gripper", np.asarray(self.gripper, dtype=float))

    @classmethod
    def from_samples(cls, samples: Sequence[Tuple[float, Pose, float]]) -> "Trajectory":
        """Build from (t, end-effector pose, gripper) triples."""
        times = [s[0] for s in samples]
        positions = [s[1].position for s in samples]
        orientations = [s[1].orientation for s in samples]
        gripper = [s[2] for s in samples]
        return cls(np.array(times), np.array(positions), np.array(orientations), np.array(gripper))

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class SpeedProfile:
    """Speed resampled on a uniform grid."""

    times: np.ndarray
    speeds: np.ndarray
    dt: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.speeds))


def speed_profile(traj: Trajectory) -> SpeedProfile:
    """
    End-effector speed on a uniform grid at the median input sampling rate.

    Velocities use second-order central differences on interior samples and
    one-sided differences at the ends (irregular spacing supported), then the
    speed is linearly interpolated onto the uniform grid.

    Args:
        traj: Trajectory to differentiate

    Returns:
        SpeedProfile: Uniform timestamps, speeds in m/s and the grid step
    """
    velocity = np.gradient(traj.positions, traj.times, axis=0)
    speed = np.linalg.norm(velocity, axis=1)
    dt = float(np.median(np.diff(traj.times)))
    n = int(math.floor(traj.duration / dt + 1e-9)) + 1
    grid = traj.times[0] + dt * np.arange(n)
    return SpeedProfile(grid, np.interp(grid, traj.times, speed), dt)


def sparc(v: Sequence[float],
          dt: float,
          cutoff_max: float = 10.0,
          alpha: float = 0.05,
          pad_factor: int = 4) -> float:
    """
    Spectral arc length of a uniformly sampled speed profile.

    The magnitude spectrum is computed with zero padding to the next power of
    two at or above ``pad_factor`` times the input length and normalized by its
    DC value. The arc length of the normalized spectrum is integrated with the
    trapezoidal rule from 0 Hz up to ``min(cutoff_max, f_alpha)``, where
    ``f_alpha`` is the highest frequency whose normalized magnitude is at
    least ``alpha``.

    Args:
        v: Non-negative speed samples
        dt: Sample spacing in seconds
        cutoff_max: Upper cutoff in Hz
        alpha: Amplitude threshold for the adaptive cutoff
        pad_factor: Minimum zero-padding factor

    Returns:
        float: Negated arc length (always < 0; closer to 0 is smoother)

    Raises:
        MetricsError: If the profile is empty, all zero, negative or dt <= 0
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or len(v) < 2:
        raise MetricsError("Speed profile needs at least 2 samples")
    if not dt > 0:
        raise MetricsError(f"dt must be > 0, got {dt}")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise MetricsError("Speed profile must be finite and non-negative")

    nfft = int(2 ** math.ceil(math.log2(pad_factor * len(v))))
    freqs = np.fft.rfftfreq(nfft, dt)
    magnitude = np.abs(np.fft.rfft(v, nfft))
    if magnitude[0] <= 0:
        raise MetricsError("Speed profile is identically zero")
    normalized = magnitude / magnitude[0]

    above = np.nonzero(normalized >= alpha)[0]
    f_alpha = freqs[above[-1]]
    cutoff = min(cutoff_max, f_alpha)
    # at least two bins so the arc has a length
    last = max(int(np.searchsorted(freqs, cutoff, side="right")), 2)
    f_sel = freqs[:last]
    m_sel = normalized[:last]
    span = f_sel[-1] - f_sel[0]
    slope = np.gradient(m_sel, f_sel)
    integrand = np.sqrt((1.0 / span) ** 2 + slope ** 2)
    return -float(trapezoid(integrand, f_sel))


def path_length(traj: Trajectory) -> float:
    """Sum of distances between consecutive end-effector positions, in meters."""
    return float(np.sum(np.linalg.norm(np.diff(traj.positions, axis=0), axis=1)))


# ---------------------------------------------------------------------------
# Episode records
# ---------------------------------------------------------------------------

class EpisodeEvent(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    t: float
    kind: Literal["wrong_object_grasped", "object_dropped", "gripper_collision"]
    object: str = ""


class TrajectoryData(BaseModel):
    """Wire form of a trajectory."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    t: List[float] = Field(min_length=2)
    position: List[Tuple[float, float, float]]
    orientation: Optional[List[Tuple[float, float, float, float]]] = None
    gripper: Optional[List[float]] = None

    @model_validator(mode="after")
    def _lengths(self):
        n = len(self.t)
        if len(self.position) != n:
            raise ValueError("position must have one entry per timestamp")
        if self.orientation is not None and len(self.orientation) != n:
            raise ValueError("orientation must have one entry per timestamp")
        if self.gripper is not None and len(self.gripper) != n:
            raise ValueError("gripper must have one entry per timestamp")
        return self

    def to_trajectory(self) -> Trajectory:
        return Trajectory(
            np.array(self.t),
            np.array(self.position),
            np.array(self.orientation) if self.orientation is not None else None,
            np.array(self.gripper) if self.gripper is not None else None,
        )


VariationValue = Union[float, str, List[float]]


class EpisodeRecord(BaseModel):
    """
    One policy rollout.

    ``variation`` maps variation-factor names to scalar values, categorical
    labels, or 7-vectors ``[x, y, z, qw, qx, qy, qz]`` for pose factors.
    ``final_state`` optionally holds the final object poses in the same
    7-vector form so the graded score can be recomputed; otherwise ``score``
    (or the outcome) is used.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    schema_version: int = EPISODE_SCHEMA_VERSION
    episode_id: str = ""
    task_id: str = Field(min_length=1)
    outcome: Literal[0, 1]
    score: Optional[float] = None
    variation: Dict[str, VariationValue] = Field(default_factory=dict)
    events: List[EpisodeEvent] = Field(default_factory=list)
    trajectory: Optional[TrajectoryData] = None
    final_state: Optional[Dict[str, List[float]]] = None
    held: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if self.schema_version != EPISODE_SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError("score must be in [0, 1]")
        if self.trajectory is not None and self.events:
            t0, t1 = self.trajectory.t[0], self.trajectory.t[-1]
            for e in self.events:
                if not t0 <= e.t <= t1:
                    raise ValueError(f"event at t={e.t} lies outside the trajectory span [{t0}, {t1}]")
        if self.final_state is not None:
            for name, values in self.final_state.items():
                if len(values) != 7:
                    raise ValueError(f"final_state['{name}'] must be [x, y, z, qw, qx, qy, qz]")
        return self

    def scene_state(self) -> Optional[SceneState]:
        if self.final_state is None:
            return None
        poses = {n: Pose(tuple(v[:3]), tuple(v[3:])) for n, v in self.final_state.items()}
        return SceneState(poses=poses, held=self.held)


def parse_episodes(text: str) -> List[EpisodeRecord]:
    """
    Parse a JSON-lines episode log; blank lines are skipped.

    Raises:
        PlanParseError: Naming the offending line
    """
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(EpisodeRecord.model_validate_json(line))
        except ValidationError as e:
            first = e.errors()[0]
            loc = ".".join(str(p) for p in first.get("loc", ()))
            raise PlanParseError(f"Episode log line {lineno}: {loc}: {first['msg']}",
                                 path=f"line {lineno}") from e
    return records


def load_episodes(path: str) -> List[EpisodeRecord]:
    return parse_episodes(read_text(path))


def dump_episodes(records: Iterable[EpisodeRecord]) -> str:
    return "".join(r.model_dump_json(exclude_none=True) + "\n" for r in records)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass
class FailureCounts:
    """Event totals per kind and wrong-object grasps per object name."""

    by_kind: Dict[str, int] = field(default_factory=lambda: {k: 0 for k in EVENT_KINDS})
    wrong_objects: Dict[str, int] = field(default_factory=dict)


def failure_counts(episodes: Iterable[EpisodeRecord]) -> FailureCounts:
    counts = FailureCounts()
    for ep in episodes:
        for event in ep.events:
            counts.by_kind[event.kind] += 1
            if event.kind == "wrong_object_grasped" and event.object:
                counts.wrong_objects[event.object] = counts.wrong_objects.get(event.object, 0) + 1
    counts.wrong_objects = dict(sorted(counts.wrong_objects.items()))
    return counts


@dataclass
class MetricsSummary:
    """
    Aggregate over a set of episodes.

    Speeds are in cm/s, path lengths in meters and times in seconds. Standard
    deviations are population deviations. ``time_mean`` covers successful
    episodes only. Breakdowns map a difficulty or subcategory to success %.
    """

    episodes: int = 0
    success_pct: float = 0.0
    mean_score: float = 0.0
    sparc_mean: Optional[float] = None
    sparc_std: Optional[float] = None
    speed_mean: Optional[float] = None
    speed_std: Optional[float] = None
    path_length_mean: Optional[float] = None
    path_length_std: Optional[float] = None
    time_mean: Optional[float] = None
    failures: FailureCounts = field(default_factory=FailureCounts)
    by_difficulty: Dict[str, float] = field(default_factory=dict)
    by_subcategory: Dict[str, float] = field(default_factory=dict)
    per_task: Dict[str, "MetricsSummary"] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.success_pct <= 100.0:
            raise MetricsError("success_pct must be in [0, 100]")

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {
            "episodes": self.episodes,
            "success_pct": self.success_pct,
            "mean_score": self.mean_score,
            "sparc_mean": self.sparc_mean,
            "sparc_std": self.sparc_std,
            "speed_mean_cm_s": self.speed_mean,
            "speed_std_cm_s": self.speed_std,
            "path_length_mean_m": self.path_length_mean,
            "path_length_std_m": self.path_length_std,
            "time_mean_s": self.time_mean,
            "events": dict(self.failures.by_kind),
            "wrong_objects": dict(self.failures.wrong_objects),
        }
        if self.by_difficulty:
            out["by_difficulty"] = dict(self.by_difficulty)
        if self.by_subcategory:
            out["by_subcategory"] = dict(self.by_subcategory)
        if self.per_task:
            out["per_task"] = {k: v.to_dict() for k, v in self.per_task.items()}
        return out


def _mean_std(values: Sequence[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


@dataclass(frozen=True)
class _EpisodeStats:
    success: bool
    score: float
    sparc: Optional[float]
    speed: Optional[float]
    path: Optional[float]
    duration: Optional[float]


def _episode_stats(ep: EpisodeRecord, task: TaskSpec,
                   dims: Optional[Mapping[str, Sequence[float]]],
                   cfg: MetricsConfig) -> _EpisodeStats:
    state = ep.scene_state()
    if state is not None and dims is not None:
        score = graded_score(task, state, dims)
    elif ep.score is not None:
        score = ep.score
    else:
        score = float(ep.outcome)

    smooth = speed = path = duration = None
    if ep.trajectory is not None:
        traj = ep.trajectory.to_trajectory()
        profile = speed_profile(traj)
        path = path_length(traj)
        duration = traj.duration
        speed = 100.0 * profile.mean
        try:
            smooth = sparc(profile.speeds, profile.dt, cfg.cutoff_max, cfg.amplitude_threshold, cfg.pad_factor)
        except MetricsError as e:
            logger.warning("Skipping SPARC for episode '%s': %s", ep.episode_id or ep.task_id, e)
    return _EpisodeStats(bool(ep.outcome), score, smooth, speed, path, duration)


def _summarize(stats: Sequence[_EpisodeStats], episodes: Sequence[EpisodeRecord]) -> MetricsSummary:
    n = len(stats)
    sparc_mean, sparc_std = _mean_std([s.sparc for s in stats if s.sparc is not None])
    speed_mean, speed_std = _mean_std([s.speed for s in stats if s.speed is not None])
    path_mean, path_std = _mean_std([s.path for s in stats if s.path is not None])
    time_mean, _ = _mean_std([s.duration for s in stats if s.success and s.duration is not None])
    return MetricsSummary(
        episodes=n,
        success_pct=100.0 * sum(s.success for s in stats) / n if n else 0.0,
        mean_score=math.fsum(s.score for s in stats) / n if n else 0.0,
        sparc_mean=sparc_mean,
        sparc_std=sparc_std,
        speed_mean=speed_mean,
        speed_std=speed_std,
        path_length_mean=path_mean,
        path_length_std=path_std,
        time_mean=time_mean,
        failures=failure_counts(episodes),
    )


def aggregate(episodes: Sequence[EpisodeRecord],
              tasks: Union[Mapping[str, TaskSpec], Iterable[TaskSpec]],
              dims: Optional[Mapping[str, Sequence[float]]] = None,
              cfg: Optional[MetricsConfig] = None) -> MetricsSummary:
    """
    Summarize episodes into success rate, graded score and motion statistics.

    Graded scores are recomputed from the recorded final state when
    ``dims`` is provided, otherwise taken from the record. Success rates are
    broken down by difficulty and competency subcategory for tagged tasks,
    and a summary is kept per task.

    Args:
        episodes: Episode records
        tasks: Task specifications, as a mapping by id or an iterable
        dims: Object dimensions for graded-score evaluation
        cfg: SPARC settings

    Returns:
        MetricsSummary: The aggregate

    Raises:
        EvaluationError: If an episode references an unknown task id
    """
    cfg = cfg or MetricsConfig()
    by_id = dict(tasks) if isinstance(tasks, Mapping) else {t.task_id: t for t in tasks}
    stats: List[_EpisodeStats] = []
    for ep in episodes:
        task = by_id.get(ep.task_id)
        if task is None:
            raise EvaluationError(f"Episode references unknown task '{ep.task_id}'")
        stats.append(_episode_stats(ep, task, dims, cfg))

    summary = _summarize(stats, episodes)

    groups: Dict[str, List[int]] = {}
    for i, ep in enumerate(episodes):
        groups.setdefault(ep.task_id, []).append(i)
    summary.per_task = {
        task_id: _summarize([stats[i] for i in idx], [episodes[i] for i in idx])
        for task_id, idx in sorted(groups.items())
    }

    def success_by(key) -> Dict[str, float]:
        buckets: Dict[str, List[bool]] = {}
        for ep, s in zip(episodes, stats):
            label = key(by_id[ep.task_id])
            if label:
                buckets.setdefault(label, []).append(s.success)
        return {k: 100.0 * sum(v) / len(v) for k, v in buckets.items()}

    difficulty = success_by(lambda t: t.difficulty)
    summary.by_difficulty = {d: difficulty[d] for d in DIFFICULTIES if d in difficulty}
    subcategory = success_by(lambda t: t.subcategory)
    order = [s for subs in COMPETENCY_AXES.values() for s in subs]
    summary.by_subcategory = {s: subcategory[s] for s in order if s in subcategory}
    return summary


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_BREAKDOWN_COLUMNS = list(DIFFICULTIES) + ["affordance", "reorientation", "stacking",
                                          "conjunction", "counting", "spatial",
                                          "color", "semantics", "size"]


def _fmt(value: Optional[float], spec: str) -> str:
    return "-" if value is None else format(value, spec)


def _pm(mean: Optional[float], std: Optional[float], spec: str) -> str:
    if mean is None:
        return "-"
    return f"{format(mean, spec)} ± {format(std or 0.0, spec)}"


def _align(rows: List[List[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for k, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_summary_table(summaries: Union[MetricsSummary, Mapping[str, MetricsSummary]],
                         label: str = "policy") -> str:
    """
    Overall table: one row per policy with success %, score, SPARC, speed
    and success % per difficulty and competency subcategory.
    """
    if isinstance(summaries, MetricsSummary):
        summaries = {label: summaries}
    header = ["Model", "Succ%", "Score", "SPARC", "Speed"] + _BREAKDOWN_COLUMNS
    rows = [header]
    for name, s in summaries.items():
        breakdown = {**s.by_difficulty, **s.by_subcategory}
        rows.append([name, f"{s.success_pct:.1f}", f"{s.mean_score:.2f}",
                     _fmt(s.sparc_mean, ".2f"), _fmt(s.speed_mean, ".1f")]
                    + [_fmt(breakdown.get(c), ".1f") for c in _BREAKDOWN_COLUMNS])
    return _align(rows)


def render_task_table(summary: MetricsSummary) -> str:
    """Per-task table: success %, score, time, SPARC, path length, speed and wrong objects."""
    rows = [["Task Name", "Succ%", "Score", "Time(s)", "SPARC", "PathLen(m)", "Speed(cm/s)", "WrongObjNames"]]
    for task_id, s in summary.per_task.items():
        wrong = ", ".join(s.failures.wrong_objects) or "-"
        rows.append([task_id, f"{s.success_pct:.1f}", f"{s.mean_score:.3f}", _fmt(s.time_mean, ".2f"),
                     _pm(s.sparc_mean, s.sparc_std, ".2f"), _pm(s.path_length_mean, s.path_length_std, ".2f"),
                     _pm(s.speed_mean, s.speed_std, ".1f"), wrong])
    return _align(rows)


def summary_json(summary: MetricsSummary) -> str:
    return json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"
