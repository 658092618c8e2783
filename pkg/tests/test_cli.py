"""
Tests for the command line surface and its exit codes.
"""

import json
from pathlib import Path

import pytest

from benchgen.cli import EXIT_IO, EXIT_OK, EXIT_PIPELINE, RunConfig, build_parser, run_command
from benchgen.task_model import load_sample_tasks
from tests.conftest import write_transcripts
from tests.test_scene_generation import FRUIT_PLAN

FIXTURES = Path(__file__).parent / "fixtures" / "episodes"
EPISODES = str(FIXTURES / "ten_episodes.jsonl")
SPACE = str(FIXTURES / "variation_space.json")


def _read(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _judge_reply():
    return {"relation": 1.0, "target": 1.0, "object": 1.0, "quantifier": 1.0, "clarity": 1.0, "feasibility": 1.0}


class TestArguments:
    """Test argument handling."""

    def test_unknown_command(self):
        assert run_command(["explode"]) == EXIT_IO

    def test_missing_seed(self, tmp_path):
        assert run_command(["baseline", "--objects", "apple", "--out", str(tmp_path / "s.json")]) == EXIT_IO

    def test_run_config_metadata(self, tmp_path):
        args = build_parser().parse_args(["baseline", "--objects", "apple", "--seed", "4", "--threshold", "0.05",
                                          "--out", str(tmp_path / "s.json")])
        meta = RunConfig.from_args(args).metadata()
        assert meta["command"] == "baseline"
        assert meta["seed"] == 4
        assert meta["inputs"]["objects"] == "apple"
        assert meta["overrides"] == {"threshold": 0.05}


class TestBaseline:
    """Test the grid baseline command."""

    def test_writes_scene_and_stability(self, tmp_path):
        out = tmp_path / "baseline.json"
        assert run_command(["baseline", "--objects", "apple,lemon,lime", "--seed", "7", "--out", str(out)]) == EXIT_OK
        scene = _read(out)
        assert scene["metadata"]["seed"] == 7
        assert len(scene["placements"]) == 3
        stability = _read(tmp_path / "baseline.stability.json")
        assert stability["stable"] is True
        assert stability["metadata"]["seed"] == 7

    def test_same_seed_same_scene(self, tmp_path):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        for out in (first, second):
            run_command(["baseline", "--objects", "apple,lemon", "--seed", "3", "--out", str(out)])
        assert first.read_text() == second.read_text()

    def test_unknown_object(self, tmp_path, capsys):
        code = run_command(["baseline", "--objects", "apple,unicorn", "--seed", "1", "--out",
                            str(tmp_path / "s.json")])
        assert code == EXIT_IO
        assert "unicorn" in capsys.readouterr().err


class TestMetrics:
    """Test the metrics command."""

    def test_fixture_episodes(self, tmp_path, capsys):
        out = tmp_path / "metrics.json"
        code = run_command(["metrics", "--episodes", EPISODES, "--seed", "0", "--out", str(out), "--per-task",
                            "--label", "pi0"])
        assert code == EXIT_OK
        doc = _read(out)
        assert doc["episodes"] == 10
        assert doc["success_pct"] == pytest.approx(30.0)
        assert doc["metadata"]["command"] == "metrics"
        printed = capsys.readouterr().out
        assert "pi0" in printed
        assert "BananaInBowlTask" in printed

    def test_missing_episodes_file(self, tmp_path):
        code = run_command(["metrics", "--episodes", str(tmp_path / "none.jsonl"), "--seed", "0",
                            "--out", str(tmp_path / "m.json")])
        assert code == EXIT_IO


class TestSensitivity:
    """Test the sensitivity command."""

    def test_too_few_records(self, tmp_path):
        code = run_command(["sensitivity", "--episodes", EPISODES, "--space", SPACE, "--outcome", "0",
                            "--seed", "0", "--out", str(tmp_path / "p.json")])
        assert code == EXIT_PIPELINE

    def test_posterior_written(self, tmp_path, capsys):
        episodes = tmp_path / "episodes.jsonl"
        lines = []
        for i in range(40):
            yaw = (i + 0.5) / 40
            lines.append(json.dumps({
                "episode_id": f"ep-{i:02d}", "task_id": "BananaInBowlTask", "outcome": int(yaw < 0.5),
                "score": float(yaw < 0.5), "variation": {"camera_yaw": yaw, "lighting": ("bright", "dim")[i % 2]},
            }))
        episodes.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "posterior.json"
        code = run_command(["sensitivity", "--episodes", str(episodes), "--space", SPACE, "--outcome", "1",
                            "--samples", "500", "--seed", "11", "--out", str(out)])
        assert code == EXIT_OK
        doc = _read(out)
        assert doc["records"] == 20
        assert doc["metadata"]["seed"] == 11
        assert doc["continuous"]["camera_yaw"]["raw"]["mean"] < 0.5
        assert "camera_yaw" in capsys.readouterr().out


class TestGeneration:
    """Test the LLM-backed commands in replay mode."""

    def test_gen_scene(self, tmp_path):
        fixtures = write_transcripts(tmp_path / "llm", [FRUIT_PLAN])
        out = tmp_path / "scene.json"
        code = run_command(["gen-scene", "--theme", "fruit on the counter", "--seed", "5", "--fixtures",
                            str(fixtures), "--out", str(out)])
        assert code == EXIT_OK
        scene = _read(out)
        assert scene["metadata"]["theme"] == "fruit on the counter"
        assert scene["metadata"]["attempts"] == 1
        assert _read(tmp_path / "scene.report.json")["success"] is True

    def test_gen_scene_exhausted(self, tmp_path):
        fixtures = write_transcripts(tmp_path / "llm", ["no", "still no", "never"])
        out = tmp_path / "scene.json"
        code = run_command(["gen-scene", "--theme", "x", "--seed", "5", "--fixtures", str(fixtures),
                            "--out", str(out)])
        assert code == EXIT_PIPELINE
        assert not out.exists()
        report = _read(tmp_path / "scene.report.json")
        assert report["success"] is False
        assert report["metadata"]["seed"] == 5

    def test_replay_without_fixtures(self, tmp_path):
        code = run_command(["gen-scene", "--theme", "x", "--seed", "5", "--out", str(tmp_path / "s.json")])
        assert code == EXIT_IO

    def test_gen_task_on_baseline_scene(self, tmp_path):
        scene = tmp_path / "scene.json"
        assert run_command(["baseline", "--objects", "bowl,lemon", "--seed", "2", "--out", str(scene)]) == EXIT_OK
        reply = {
            "task_id": "LemonInBowlTask",
            "instruction": "Put the lemon in the bowl.",
            "subtasks": [{"label": "lemon in bowl", "steps": [
                {"predicate": "grasped", "subjects": ["lemon"]},
                {"predicate": "inside", "subjects": ["lemon"], "reference": "bowl"},
            ]}],
        }
        fixtures = write_transcripts(tmp_path / "llm", [reply])
        out = tmp_path / "task.json"
        code = run_command(["gen-task", "--scene", str(scene), "--axis", "visual", "--subcategory", "semantics",
                            "--difficulty", "simple", "--scene-name", "counter", "--seed", "9",
                            "--fixtures", str(fixtures), "--out", str(out)])
        assert code == EXIT_OK
        task = _read(out)
        assert task["task_id"] == "LemonInBowlTask"
        assert task["scene"] == "counter"
        assert task["metadata"]["seed"] == 9

    def test_judge_sample_tasks(self, tmp_path, capsys):
        replies = [_judge_reply() for _ in load_sample_tasks()]
        fixtures = write_transcripts(tmp_path / "llm", replies)
        out = tmp_path / "judge.json"
        code = run_command(["judge", "--seed", "0", "--fixtures", str(fixtures), "--out", str(out)])
        assert code == EXIT_OK
        doc = _read(out)
        assert len(doc["tasks"]) == len(replies)
        assert doc["summary"][-1]["label"] == "overall"
        assert capsys.readouterr().out.startswith("Category")


class TestBatch:
    """Test manifest runs."""

    def test_worst_exit_code(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        good = tmp_path / "good.json"
        manifest.write_text(json.dumps([
            ["baseline", "--objects", "apple", "--seed", 1, "--out", str(good)],
            ["metrics", "--episodes", str(tmp_path / "missing.jsonl"), "--seed", 1, "--out",
             str(tmp_path / "m.json")],
        ]), encoding="utf-8")
        assert run_command(["batch", "--manifest", str(manifest), "--seed", "0", "--workers", "2"]) == EXIT_IO
        assert good.exists()

    def test_all_succeed(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps([
            ["baseline", "--objects", "apple", "--seed", 1, "--out", str(tmp_path / "a.json")],
            ["baseline", "--objects", "lemon", "--seed", 2, "--out", str(tmp_path / "b.json")],
        ]), encoding="utf-8")
        assert run_command(["batch", "--manifest", str(manifest), "--seed", "0"]) == EXIT_OK

    def test_nested_batch_rejected(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps([["batch", "--manifest", "x.json", "--seed", 0]]), encoding="utf-8")
        assert run_command(["batch", "--manifest", str(manifest), "--seed", "0"]) == EXIT_IO
