"""
LLM-as-judge scoring of instruction/condition alignment, and coverage.

The judge rates six dimensions in [0, 1]: four match dimensions (relation,
target, object, quantifier) plus clarity and feasibility. Alignment is their
weighted mean and is always recomputed locally.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from .chat_client import ChatClient, extract_json_payload
from .config import JudgeConfig
from .exceptions import InvalidInputError, LLMResponseError
from .prompts import fill_template, get_template
from .scene_model import Scene
from .task_model import COMPETENCY_AXES, PREDICATE_LIBRARY, TaskSpec
from .utils import safe_progress_callback, safe_status_callback

logger = logging.getLogger(__name__)

DIMENSIONS: Tuple[str, ...] = ("relation", "target", "object", "quantifier", "clarity", "feasibility")
MATCH_DIMENSIONS: Tuple[str, ...] = DIMENSIONS[:4]
VERDICTS: Tuple[str, ...] = ("aligned", "partial", "misaligned")
PARSE_ATTEMPTS = 3


class _JudgeReply(BaseModel):
    model_config = ConfigDict(extra="ignore")

    relation: float = Field(ge=0.0, le=1.0)
    target: float = Field(ge=0.0, le=1.0)
    object: float = Field(ge=0.0, le=1.0)
    quantifier: float = Field(ge=0.0, le=1.0)
    clarity: float = Field(ge=0.0, le=1.0)
    feasibility: float = Field(ge=0.0, le=1.0)
    verdict: Optional[str] = None
    rationale: str = ""


def weighted_alignment(values: Sequence[float], weights: Sequence[float]) -> float:
    return math.fsum(v * w for v, w in zip(values, weights))


@dataclass(frozen=True)
class JudgeScores:
    """
    Six judge scores, their weighted alignment and the verdict.

    ``alignment`` is computed from the scores and ``weights`` and must equal
    their weighted mean.
    """

    relation: float
    target: float
    object: float
    quantifier: float
    clarity: float
    feasibility: float
    verdict: str
    alignment: float = -1.0
    weights: Tuple[float, ...] = (1 / 6,) * 6
    rationale: str = ""

    def __post_init__(self):
        values = self.values
        if not all(math.isfinite(v) and 0.0 <= v <= 1.0 for v in values):
            raise InvalidInputError(f"Judge scores must lie in [0, 1], got {values}")
        if self.verdict not in VERDICTS:
            raise InvalidInputError(f"Unknown verdict '{self.verdict}'")
        expected = weighted_alignment(values, self.weights)
        if self.alignment < 0:
            object.__setattr__(self, "alignment", expected)
        elif abs(self.alignment - expected) > 1e-9:
            raise InvalidInputError(f"alignment {self.alignment} != weighted mean {expected}")

    @property
    def values(self) -> Tuple[float, ...]:
        return tuple(getattr(self, d) for d in DIMENSIONS)

    @property
    def match(self) -> float:
        return math.fsum(getattr(self, d) for d in MATCH_DIMENSIONS) / len(MATCH_DIMENSIONS)

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {d: getattr(self, d) for d in DIMENSIONS}
        out.update(alignment=self.alignment, verdict=self.verdict, rationale=self.rationale,
                   weights=list(self.weights))
        return out


def _verdict_for(alignment: float, cfg: JudgeConfig) -> str:
    if alignment >= cfg.aligned_threshold:
        return "aligned"
    if alignment >= cfg.partial_threshold:
        return "partial"
    return "misaligned"


def parse_judge_reply(text: str, cfg: Optional[JudgeConfig] = None) -> JudgeScores:
    """
    Parse a judge reply into JudgeScores.

    A missing or unrecognized verdict ("partially aligned" is accepted as
    partial) is derived from the alignment thresholds.

    Raises:
        LLMResponseError: If the reply is not JSON or a score is missing or out of range
    """
    cfg = cfg or JudgeConfig()
    try:
        data = json.loads(extract_json_payload(text))
        reply = _JudgeReply.model_validate(data)
    except (json.JSONDecodeError, ValidationError) as e:
        raise LLMResponseError(f"Unparseable judge reply: {e}") from e
    values = [getattr(reply, d) for d in DIMENSIONS]
    alignment = weighted_alignment(values, cfg.weights)
    verdict = (reply.verdict or "").strip().lower()
    if verdict == "partially aligned":
        verdict = "partial"
    if verdict not in VERDICTS:
        verdict = _verdict_for(alignment, cfg)
    return JudgeScores(*values, verdict=verdict, alignment=alignment,
                       weights=tuple(cfg.weights), rationale=reply.rationale)


def build_judge_prompt(task: TaskSpec) -> str:
    lines = []
    for sub in task.subtasks:
        lines.append(f"- {sub.label}: " + " -> ".join(c.describe() for c in sub.steps))
    return fill_template(get_template("judge"), instruction=task.instruction, conditions="\n".join(lines))


def judge_task(task: TaskSpec, client: ChatClient, cfg: Optional[JudgeConfig] = None) -> JudgeScores:
    """
    Score one task with the judge model at temperature 0.

    Args:
        task: Task to judge
        client: Chat client
        cfg: Weights and verdict thresholds

    Returns:
        JudgeScores: Parsed scores with recomputed alignment

    Raises:
        LLMResponseError: If no parseable reply is obtained within the retry budget
    """
    cfg = cfg or JudgeConfig()
    messages = [{"role": "user", "content": build_judge_prompt(task)}]
    for attempt in Retrying(retry=retry_if_exception_type(LLMResponseError),
                            stop=stop_after_attempt(PARSE_ATTEMPTS), reraise=True):
        with attempt:
            return parse_judge_reply(client.complete(messages, temperature=0.0), cfg)
    raise LLMResponseError(f"Judge reply for '{task.task_id}' unparseable")


@dataclass
class JudgeRecord:
    task: TaskSpec
    scores: JudgeScores


def judge_tasks(tasks: Sequence[TaskSpec],
                client: ChatClient,
                cfg: Optional[JudgeConfig] = None,
                status_callback: Optional[Callable[[str], None]] = None,
                progress_callback: Optional[Callable[[int], None]] = None) -> List[JudgeRecord]:
    """Judge tasks in order (replay transcripts are consumed in call order)."""
    records = []
    for i, task in enumerate(tasks, start=1):
        safe_status_callback(status_callback, f"Judging task {i}/{len(tasks)}: {task.task_id}")
        records.append(JudgeRecord(task, judge_task(task, client, cfg)))
        safe_progress_callback(progress_callback, int(100 * i / len(tasks)))
    return records


def coverage(tasks: Sequence[TaskSpec],
             scene: Scene,
             predicate_library: Sequence[str] = PREDICATE_LIBRARY) -> Tuple[float, float]:
    """
    Object and predicate coverage of a task set.

    Returns:
        Tuple of (fraction of scene objects referenced by at least one task,
        fraction of library predicates used by at least one task)

    Raises:
        InvalidInputError: If the scene has no objects
    """
    if not scene.placements:
        raise InvalidInputError("Coverage needs a non-empty scene")
    objects = set(scene.names)
    referenced = {name for t in tasks for name in t.objects if name in objects}
    library = set(predicate_library)
    used = {c.predicate for t in tasks for c in t.conditions if c.predicate in library}
    pred_cov = len(used) / len(library) if library else 0.0
    return len(referenced) / len(objects), pred_cov


@dataclass
class JudgeSummaryRow:
    """Aggregate judge scores over a group of tasks."""

    label: str
    n: int
    alignment: float
    clarity: float
    feasibility: float
    match: float
    aligned_pct: float
    partial_pct: float
    object_coverage: Optional[float] = None
    predicate_coverage: Optional[float] = None


def _row(label: str, records: Sequence[JudgeRecord]) -> JudgeSummaryRow:
    n = len(records)

    def mean(get) -> float:
        return math.fsum(get(r.scores) for r in records) / n

    return JudgeSummaryRow(
        label=label,
        n=n,
        alignment=mean(lambda s: s.alignment),
        clarity=mean(lambda s: s.clarity),
        feasibility=mean(lambda s: s.feasibility),
        match=mean(lambda s: s.match),
        aligned_pct=100.0 * sum(r.scores.verdict == "aligned" for r in records) / n,
        partial_pct=100.0 * sum(r.scores.verdict == "partial" for r in records) / n,
    )


def summarize_judgments(records: Sequence[JudgeRecord],
                        scene: Optional[Scene] = None) -> List[JudgeSummaryRow]:
    """
    One row per competency subcategory (taxonomy order) plus an overall row.

    Untagged tasks only count towards the overall row. Coverage is filled in
    on the overall row when a scene is given.
    """
    rows: List[JudgeSummaryRow] = []
    for subs in COMPETENCY_AXES.values():
        for sub in subs:
            group = [r for r in records if r.task.subcategory == sub]
            if group:
                rows.append(_row(sub, group))
    if records:
        overall = _row("overall", records)
        if scene is not None:
            overall.object_coverage, overall.predicate_coverage = coverage([r.task for r in records], scene)
        rows.append(overall)
    return rows


def render_judge_table(rows: Sequence[JudgeSummaryRow]) -> str:
    """Aligned text table of judge summary rows."""
    header = ["Category", "N", "Alignment", "Clarity", "Feasibility", "Match", "Aligned%", "Partial%",
              "ObjCov", "PredCov"]
    table = [header]
    for r in rows:
        table.append([r.label, str(r.n), f"{r.alignment:.2f}", f"{r.clarity:.2f}", f"{r.feasibility:.2f}",
                      f"{r.match:.2f}", f"{r.aligned_pct:.1f}", f"{r.partial_pct:.1f}",
                      "-" if r.object_coverage is None else f"{r.object_coverage:.2f}",
                      "-" if r.predicate_coverage is None else f"{r.predicate_coverage:.2f}"])
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for k, row in enumerate(table):
        lines.append("  ".join([row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def judgments_json(records: Sequence[JudgeRecord], rows: Sequence[JudgeSummaryRow]) -> str:
    payload = {
        "tasks": [{"task_id": r.task.task_id, **r.scores.to_dict()} for r in records],
        "summary": [vars(row) for row in rows],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
