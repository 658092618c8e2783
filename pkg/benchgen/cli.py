"""
Command-line entry points.

Every command takes a required ``--seed`` that is written into the metadata
block of each artifact it produces. Exit codes: 0 on success, 1 for IO,
parse and configuration errors, 2 when a pipeline fails (exhausted
generation attempts, unsolvable layouts, insufficient data).
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from .chat_client import ChatClient
from .config import (JudgeConfig, LLMConfig, LLM_MODES, MetricsConfig, PlacementConfig,
                     SensitivityConfig, SolverConfig)
from .exceptions import (BenchGenError, ConfigurationError, FileOperationError, GenerationError,
                         InvalidInputError, PlanParseError)
from .geometry import TableBounds
from .judge import judge_tasks, judgments_json, render_judge_table, summarize_judgments
from .placement_solver import baseline_grid_layout, settle_and_check
from .scene_generation import generate_scene
from .scene_model import Catalog, default_catalog, load_catalog, parse_scene_document, serialize_scene
from .sensitivity import Dataset, analyze, parse_variation_space, render_histograms
from .task_generation import generate_task
from .task_model import TaskSpec, load_sample_tasks, parse_tasks, serialize_task
from .trajectory_metrics import aggregate, load_episodes, render_summary_table, render_task_table
from .utils import atomic_write_text, read_text

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_PIPELINE = 2

_IO_ERRORS = (FileOperationError, PlanParseError, ConfigurationError, InvalidInputError, ValueError)


@dataclass
class RunConfig:
    """The parsed invocation of one command."""

    command: str
    seed: int
    out: Optional[str] = None
    inputs: Dict[str, Any] = field(default_factory=dict)
    llm_mode: Optional[str] = None
    fixtures: Optional[str] = None
    overrides: Dict[str, Any] = field(default_factory=dict)

    _COMMON = ("command", "seed", "out", "llm_mode", "fixtures", "verbose", "handler", "margin", "threshold",
               "attempts")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        values = vars(args)
        overrides = {k: values[k] for k in ("margin", "threshold", "attempts") if values.get(k) is not None}
        inputs = {k: v for k, v in values.items() if k not in cls._COMMON and v is not None}
        return cls(command=args.command, seed=args.seed, out=values.get("out"), inputs=inputs,
                   llm_mode=values.get("llm_mode"), fixtures=values.get("fixtures"), overrides=overrides)

    def metadata(self) -> Dict[str, Any]:
        meta: Dict[str, Any] = {"command": self.command, "seed": self.seed}
        if self.inputs:
            meta["inputs"] = dict(sorted(self.inputs.items()))
        if self.overrides:
            meta["overrides"] = dict(sorted(self.overrides.items()))
        return meta


def _write_json(path: str, payload: Any) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _sidecar(path: str, suffix: str) -> str:
    root, _ = os.path.splitext(path)
    return f"{root}.{suffix}"


def _catalog(args: argparse.Namespace) -> Catalog:
    return load_catalog(args.catalog) if args.catalog else default_catalog()


def _client(args: argparse.Namespace) -> ChatClient:
    load_dotenv()
    try:
        config = LLMConfig(mode=args.llm_mode, fixture_dir=args.fixtures,
                           model_name=os.getenv("LLM_MODEL", "gpt-4o"))
    except ValueError as e:
        raise ConfigurationError(f"Invalid LLM configuration: {e}") from e
    return ChatClient(config)


def _solver_cfg(args: argparse.Namespace) -> SolverConfig:
    if args.margin is not None:
        return SolverConfig(base_margin=args.margin, rng_seed=args.seed)
    return SolverConfig(rng_seed=args.seed)


def _placement_cfg(args: argparse.Namespace) -> PlacementConfig:
    if args.threshold is not None:
        return PlacementConfig(stability_threshold=args.threshold)
    return PlacementConfig()


def _load_tasks(path: Optional[str]) -> List[TaskSpec]:
    return parse_tasks(read_text(path)) if path else load_sample_tasks()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen_scene(args: argparse.Namespace) -> int:
    run = RunConfig.from_args(args)
    catalog = _catalog(args)
    client = _client(args)
    rng = np.random.default_rng(args.seed)
    try:
        scene, report = generate_scene(args.theme, catalog, TableBounds(), client,
                                       max_attempts=args.attempts, rng=rng, target_count=args.target_count,
                                       solver_cfg=_solver_cfg(args), placement_cfg=_placement_cfg(args))
    except GenerationError as e:
        _write_json(_sidecar(args.out, "report.json"), {**e.report.to_dict(), "metadata": run.metadata()})
        raise
    meta = {**run.metadata(), "theme": args.theme, "attempts": report.attempts}
    atomic_write_text(args.out, serialize_scene(scene, meta))
    _write_json(_sidecar(args.out, "report.json"), {**report.to_dict(), "metadata": run.metadata()})
    print(f"Scene with {len(scene.placements)} objects written to {args.out} ({report.attempts} attempt(s))")
    return EXIT_OK


def cmd_gen_task(args: argparse.Namespace) -> int:
    run = RunConfig.from_args(args)
    scene, scene_meta = parse_scene_document(read_text(args.scene))
    prior = _load_tasks(args.prior) if args.prior else []
    forbidden = [n.strip() for n in (args.forbidden or "").split(",") if n.strip()]
    client = _client(args)
    scene_name = args.scene_name or str(scene_meta.get("theme", ""))
    try:
        task, report = generate_task(scene, args.axis, args.subcategory, args.difficulty, client,
                                     prior_tasks=prior, max_attempts=args.attempts,
                                     examples=load_sample_tasks()[:2], scene_name=scene_name,
                                     forbidden=forbidden)
    except GenerationError as e:
        _write_json(_sidecar(args.out, "report.json"), {**e.report.to_dict(), "metadata": run.metadata()})
        raise
    task = task.model_copy(update={"metadata": run.metadata()})
    atomic_write_text(args.out, serialize_task(task))
    _write_json(_sidecar(args.out, "report.json"), {**report.to_dict(), "metadata": run.metadata()})
    print(f"Task '{task.task_id}' written to {args.out} ({report.attempts} attempt(s))")
    return EXIT_OK


def cmd_judge(args: argparse.Namespace) -> int:
    run = RunConfig.from_args(args)
    tasks = _load_tasks(args.tasks)
    scene = parse_scene_document(read_text(args.scene))[0] if args.scene else None
    client = _client(args)
    records = judge_tasks(tasks, client, JudgeConfig())
    rows = summarize_judgments(records, scene)
    payload = json.loads(judgments_json(records, rows))
    payload["metadata"] = run.metadata()
    _write_json(args.out, payload)
    print(render_judge_table(rows), end="")
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    run = RunConfig.from_args(args)
    episodes = load_episodes(args.episodes)
    tasks = _load_tasks(args.tasks)
    dims = {e.name: e.dims for e in _catalog(args)}
    summary = aggregate(episodes, tasks, dims, MetricsConfig())
    payload = summary.to_dict()
    payload["metadata"] = run.metadata()
    _write_json(args.out, payload)
    print(render_summary_table(summary, label=args.label), end="")
    if args.per_task:
        print()
        print(render_task_table(summary), end="")
    return EXIT_OK


def cmd_sensitivity(args: argparse.Namespace) -> int:
    run = RunConfig.from_args(args)
    space = parse_variation_space(read_text(args.space))
    dataset = Dataset.from_episodes(space, load_episodes(args.episodes))
    cfg = SensitivityConfig(n_samples=args.samples)
    result = analyze(dataset, args.outcome, cfg, seed=args.seed)
    payload = result.to_dict()
    payload["metadata"] = run.metadata()
    _write_json(args.out, payload)
    print(render_histograms(result), end="")
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    run = RunConfig.from_args(args)
    catalog = _catalog(args)
    objects = [n.strip() for n in args.objects.split(",") if n.strip()]
    missing = [n for n in objects if n not in catalog]
    if missing:
        raise InvalidInputError(f"Objects not in the catalog: {missing}")
    scene = baseline_grid_layout(objects, catalog, args.rows, args.cols, TableBounds(),
                                 np.random.default_rng(args.seed))
    report = settle_and_check(scene, _placement_cfg(args).stability_threshold)
    atomic_write_text(args.out, serialize_scene(scene, run.metadata()))
    _write_json(_sidecar(args.out, "stability.json"), {
        "stable": report.stable,
        "max_displacement": report.max_displacement,
        "unstable": [{"name": u.name, "cause": u.cause, "support": u.support, "displacement": u.displacement}
                     for u in report.unstable],
        "metadata": run.metadata(),
    })
    print(f"Baseline scene with {len(objects)} objects written to {args.out} "
          f"({'stable' if report.stable else 'unstable'})")
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    """Run a JSON list of argument vectors across worker threads; returns the worst exit code."""
    runs = json.loads(read_text(args.manifest))
    if not isinstance(runs, list) or not all(isinstance(r, list) for r in runs):
        raise PlanParseError("Batch manifest must be a JSON list of argument lists", path="$")
    if any(r and r[0] == "batch" for r in runs):
        raise PlanParseError("Batch manifests cannot nest batch runs", path="$")
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        codes = list(pool.map(lambda argv: run_command([str(a) for a in argv]), runs))
    for argv, code in zip(runs, codes):
        logger.info("batch run %s exited with %d", " ".join(map(str, argv[:1])), code)
    return max(codes, default=EXIT_OK)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, required=True, help="Random seed, recorded in every artifact")
    p.add_argument("--out", required=out_required, help="Output JSON path")


def _add_llm(p: argparse.ArgumentParser) -> None:
    p.add_argument("--llm-mode", choices=LLM_MODES, default="replay", help="Chat client mode")
    p.add_argument("--fixtures", help="Transcript directory for replay/record modes")
    p.add_argument("--attempts", type=int, default=None, help="Generation attempt budget (default 3)")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--catalog", help="Catalog JSON (default: shipped catalog)")
    p.add_argument("--margin", type=float, default=None, help="Base collision margin in meters")
    p.add_argument("--threshold", type=float, default=None, help="Stability displacement threshold in meters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="benchgen",
                                     description="Tabletop benchmark scene/task generation and episode analysis")
    parser.add_argument("--verbose", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="Generate a scene from a theme")
    p.add_argument("--theme", required=True, help="Scene theme")
    p.add_argument("--target-count", type=int, default=10, help="Requested number of objects")
    _add_common(p)
    _add_llm(p)
    _add_solver(p)
    p.set_defaults(handler=cmd_gen_scene)

    p = sub.add_parser("gen-task", help="Generate a task for a scene")
    p.add_argument("--scene", required=True, help="Scene JSON")
    p.add_argument("--axis", required=True, choices=("visual", "procedural", "relational"))
    p.add_argument("--subcategory", required=True)
    p.add_argument("--difficulty", required=True, choices=("simple", "moderate", "complex"))
    p.add_argument("--prior", help="JSON list of previously generated tasks")
    p.add_argument("--forbidden", help="Comma-separated objects tasks may not reference")
    p.add_argument("--scene-name", help="Scene identifier stored in the task")
    _add_common(p)
    _add_llm(p)
    p.set_defaults(handler=cmd_gen_task, margin=None, threshold=None)

    p = sub.add_parser("judge", help="Score task instruction/condition alignment")
    p.add_argument("--tasks", help="JSON list of tasks (default: shipped sample tasks)")
    p.add_argument("--scene", help="Scene JSON for coverage")
    _add_common(p)
    _add_llm(p)
    p.set_defaults(handler=cmd_judge, margin=None, threshold=None)

    p = sub.add_parser("metrics", help="Aggregate episode logs")
    p.add_argument("--episodes", required=True, help="Episode JSONL")
    p.add_argument("--tasks", help="JSON list of tasks (default: shipped sample tasks)")
    p.add_argument("--catalog", help="Catalog JSON for object dimensions")
    p.add_argument("--label", default="policy", help="Row label in the summary table")
    p.add_argument("--per-task", action="store_true", help="Also print the per-task table")
    _add_common(p)
    p.set_defaults(handler=cmd_metrics, margin=None, threshold=None, attempts=None)

    p = sub.add_parser("sensitivity", help="Posterior of variation parameters given an outcome")
    p.add_argument("--episodes", required=True, help="Episode JSONL")
    p.add_argument("--space", required=True, help="Variation space JSON")
    p.add_argument("--outcome", type=int, choices=(0, 1), default=1)
    p.add_argument("--samples", type=int, default=5000, help="Posterior samples")
    _add_common(p)
    p.set_defaults(handler=cmd_sensitivity, margin=None, threshold=None, attempts=None)

    p = sub.add_parser("baseline", help="Grid baseline layout with stability report")
    p.add_argument("--objects", required=True, help="Comma-separated catalog names")
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--cols", type=int, default=None)
    _add_common(p)
    _add_solver(p)
    p.set_defaults(handler=cmd_baseline, attempts=None)

    p = sub.add_parser("batch", help="Run a manifest of commands across worker threads")
    p.add_argument("--manifest", required=True, help="JSON list of argument lists")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--seed", type=int, required=True, help="Recorded for symmetry; each run carries its own")
    p.set_defaults(handler=cmd_batch, out=None, margin=None, threshold=None, attempts=None)
    return parser


def run_command(argv: Sequence[str]) -> int:
    """Parse and run one command, mapping failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return EXIT_IO if e.code else EXIT_OK
    try:
        return args.handler(args)
    except _IO_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except BenchGenError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PIPELINE


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.DEBUG if "--verbose" in argv else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return run_command(argv)


if __name__ == "__main__":
    sys.exit(main())
