"""Pipeline tests: config parsing, a small end-to-end run, stage-wise
resume against an existing output directory, determinism, and the CLI
wrapper."""

import json
import subprocess
import sys

import numpy as np
import pytest

from dexsynth import (
    ConfigError,
    PipelineError,
    load_manifest,
    parse_config,
    read_shard,
    run_pipeline,
    verify_manifest,
)
from dexsynth import cli


def _config_doc(**overrides):
    doc = {
        "hand": "toy",
        "seed": 5,
        "objects": [{
            "id": "sphere",
            "builtin": "unit_sphere",
            "scale": 0.07,
            "obstacles": [{"id": "table", "builtin": "table_slab",
                           "top_z": -0.035}],
        }],
        "task": "grasp",
        "optim": {"steps": 150, "restarts": 4, "trace_every": 50},
        "plan": {"waypoints": 8, "iterations": 20},
        "debias": {"points": 64, "samples": 8},
        "stages": ["synthesize", "eval", "debias", "proposals", "post-opt",
                   "plan", "export"],
    }
    doc.update(overrides)
    return doc


# ---------------------------------------------------------------------------
# parse_config


def test_parse_config_from_dict():
    config = parse_config(_config_doc())
    assert config.hand.dof == 4
    assert config.task == "grasp"
    assert config.optim.steps == 150
    assert config.plan.waypoints == 8
    assert config.debias_points == 64
    assert config.stages[0] == "synthesize"


def test_parse_config_from_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(_config_doc()))
    config = parse_config(path)
    assert config.optim.restarts == 4
    assert config.raw["seed"] == 5


def test_parse_config_articulation():
    doc = _config_doc(task="articulation",
                      articulation={"kind": "revolute",
                                    "axis": [0.0, 0.0, 1.0],
                                    "origin": [0.1, 0.0, 0.0]})
    config = parse_config(doc)
    assert config.articulation.kind == "revolute"
    np.testing.assert_allclose(config.articulation.origin, [0.1, 0.0, 0.0])


@pytest.mark.parametrize("mutate", [
    {"objects": []},
    {"objects": [{"builtin": "unit_sphere"}]},
    {"objects": [{"id": "a", "builtin": "unit_sphere"},
                 {"id": "a", "builtin": "unit_cube"}]},
    {"task": "juggle"},
    {"stages": ["synthesize", "launch"]},
    {"optim": {"steps": -5}},
])
def test_parse_config_rejects_bad_documents(mutate):
    with pytest.raises(ConfigError):
        parse_config(_config_doc(**mutate))


def test_unknown_builtin_fails_at_synthesis(tmp_path):
    doc = _config_doc(objects=[{"id": "x", "builtin": "torus"}])
    with pytest.raises(PipelineError):
        run_pipeline(doc, tmp_path / "out", seed=0)


# ---------------------------------------------------------------------------
# end-to-end


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    manifest, report = run_pipeline(_config_doc(), out, seed=5)
    return out, manifest, report


def test_run_produces_all_artifacts(full_run):
    out, manifest, report = full_run
    for name in ("seed.shard", "eval.shard", "post.shard", "plan.shard",
                 "debias_stats.json", "conditions.json", "manifest.json",
                 "run_report.json"):
        assert (out / name).exists(), name
    assert verify_manifest(manifest, base_dir=out)
    assert manifest.total_records == 16  # 4 records in each of 4 shards
    stage_names = [s["stage"] for s in report["stages"]]
    assert stage_names == ["synthesize", "eval", "debias", "proposals",
                           "post-opt", "plan", "export"]


def test_run_stage_contents(full_run, toy_hand):
    out, _, report = full_run
    seeds = read_shard(out / "seed.shard",
                       expected_hand_hash=toy_hand.config_hash)
    assert len(seeds) == 4
    assert all(r.metrics is None and r.generator == "optim" for r in seeds)

    evaluated = read_shard(out / "eval.shard")
    assert all(r.metrics is not None for r in evaluated)

    refined = read_shard(out / "post.shard")
    assert all(r.generator == "optim+post" for r in refined)

    planned = read_shard(out / "plan.shard")
    for record in planned:
        assert record.trajectory is not None
        stages = record.trajectory.stages
        assert stages[0] == "reach"
        assert "grasp" in stages
        assert stages[-1] == "post"
        # keyframe rides along unchanged from the post stage
        assert any("grasp" == s for s in stages)

    # proposals stage without a command is an explicit no-op
    proposals = [s for s in report["stages"] if s["stage"] == "proposals"]
    assert proposals[0].get("skipped")


def test_run_debias_outputs(full_run):
    out, _, _ = full_run
    doc = json.loads((out / "conditions.json").read_text())
    assert doc["budgets"] == {"sphere": 8}
    assert len(doc["conditions"]["sphere"]) == 8
    assert all(0 <= i < 64 for i in doc["conditions"]["sphere"])

    from dexsynth import load_stats

    stats = load_stats(out / "debias_stats.json")
    assert stats.objects["sphere"].total == 4  # one hit per record


def test_pipeline_deterministic(tmp_path, full_run):
    out_a, manifest_a, _ = full_run
    out_b = tmp_path / "again"
    manifest_b, _ = run_pipeline(_config_doc(), out_b, seed=5)
    checks_a = [s["checksum"] for s in manifest_a.shards]
    checks_b = [s["checksum"] for s in manifest_b.shards]
    assert checks_a == checks_b
    assert (out_b / "conditions.json").read_text() \
        == ((out_a / "conditions.json").read_text())


def test_pipeline_seed_changes_output(tmp_path, full_run):
    _, manifest_a, _ = full_run
    out_c = tmp_path / "other-seed"
    manifest_c, _ = run_pipeline(
        _config_doc(stages=["synthesize"]), out_c, seed=6)
    assert manifest_c.shards[0]["checksum"] \
        != manifest_a.shards[0]["checksum"]


# ---------------------------------------------------------------------------
# stage-wise resume


def test_stagewise_resume(tmp_path):
    out = tmp_path / "staged"
    doc = _config_doc()
    run_pipeline(doc, out, seed=5, stages=("synthesize",))
    assert (out / "seed.shard").exists()
    assert not (out / "eval.shard").exists()

    # a fresh invocation picks up seed.shard from the directory
    run_pipeline(doc, out, seed=5, stages=("eval",))
    assert (out / "eval.shard").exists()

    run_pipeline(doc, out, seed=5, stages=("post-opt",))
    refined = read_shard(out / "post.shard")
    assert all(r.generator == "optim+post" for r in refined)

    # export alone indexes whatever shards exist on disk
    manifest, report = run_pipeline(doc, out, seed=5, stages=("export",))
    listed = {s["path"] for s in manifest.shards}
    assert {"seed.shard", "eval.shard", "post.shard"} <= listed
    assert verify_manifest(manifest, base_dir=out)


def test_stage_without_input_fails(tmp_path):
    with pytest.raises(PipelineError):
        run_pipeline(_config_doc(), tmp_path / "empty", seed=5,
                     stages=("eval",))


def test_unknown_stage_rejected(tmp_path):
    with pytest.raises(ConfigError):
        run_pipeline(_config_doc(), tmp_path / "x", seed=5,
                     stages=("warp",))


# ---------------------------------------------------------------------------
# CLI


def test_cli_pipeline_success(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(_config_doc(
        stages=["synthesize", "eval", "export"])))
    out = tmp_path / "out"
    code = cli.main(["pipeline", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert [s["stage"] for s in report["stages"]] \
        == ["synthesize", "eval", "export"]
    assert report["seed"] == 5  # from the config document
    assert (out / "manifest.json").exists()


def test_cli_stage_subcommands_share_out_dir(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(_config_doc()))
    out = tmp_path / "out"
    assert cli.main(["synthesize", "--config", str(cfg), "--out", str(out),
                     "--seed", "7"]) == 0
    capsys.readouterr()
    assert cli.main(["eval", "--config", str(cfg), "--out", str(out),
                     "--seed", "7"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["seed"] == 7  # the flag overrides the config
    assert (out / "eval.shard").exists()


def test_cli_error_reports_json(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(_config_doc(objects=[])))
    code = cli.main(["pipeline", "--config", str(cfg),
                     "--out", str(tmp_path / "out")])
    assert code == 1
    err = capsys.readouterr().err
    assert json.loads(err)  # structured, machine-readable failure


def test_cli_missing_config_file(tmp_path, capsys):
    code = cli.main(["pipeline", "--config", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "out")])
    assert code == 1
    assert json.loads(capsys.readouterr().err)


def test_cli_entry_point(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(_config_doc(stages=["synthesize", "export"])))
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "dexsynth.cli", "pipeline",
         "--config", str(cfg), "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "manifest.json").exists()
    json.loads(proc.stdout)
