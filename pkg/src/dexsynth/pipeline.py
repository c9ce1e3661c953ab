"""Stage orchestration: synthesize, evaluate, debias, external
proposals, post-optimize, plan, export.

A run is driven by one JSON config document and a master seed. Stages
communicate exclusively through shards in the output directory, so any
stage subset can be re-run against existing outputs. Per-object work
derives its seed from (master seed, object index) only, which makes
manifests reproducible regardless of scheduling.
"""

import json
import os
import shlex
import subprocess
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .assets import load_toy_hand, load_unit_cube, load_unit_sphere
from .dataset import (DemoRecord, Manifest, read_shard, save_manifest,
                      verify_manifest, write_shard)
from .debias import (DebiasStats, associate_point, sample_conditions,
                     object_budget, save_stats, update_stats)
from .energy import ArticulationSpec, EnergyWeights, Scene
from .errors import ConfigError, EngineError, PipelineError
from .geometry import PointCloud, build_bvh, load_mesh, make_table_slab
from .hand import load_hand
from .metrics import evaluate_pose
from .optimizer import (OptimSettings, optimize_batch, post_optimize_batch,
                        sample_initializations)
from .planner import (PlanSettings, Trajectory, generate_post_grasp,
                      plan_reach)

ALL_STAGES = ("synthesize", "eval", "debias", "proposals", "post-opt",
              "plan", "export")
_BUILTIN_MESHES = {"unit_sphere": load_unit_sphere, "unit_cube": load_unit_cube}


@dataclass
class PipelineConfig:
    """Parsed run configuration with engine-level defaults filled in."""

    hand: object  # HandModel
    objects: list  # of dicts {id, mesh loader args}
    task: str = "grasp"
    weights: EnergyWeights = None
    optim: OptimSettings = None
    plan: PlanSettings = None
    debias_points: int = 512
    debias_alpha: float = 1.0
    debias_samples: int = 64
    stages: tuple = ALL_STAGES
    proposal_command: str = None
    articulation: ArticulationSpec = None
    raw: dict = field(default_factory=dict)


def _load_object_mesh(entry):
    scale = float(entry.get("scale", 1.0))
    if "builtin" in entry:
        name = entry["builtin"]
        if name == "table_slab":
            return make_table_slab(top_z=float(entry.get("top_z", 0.0)))
        if name not in _BUILTIN_MESHES:
            raise ConfigError(f"unknown builtin mesh {name!r}")
        return _BUILTIN_MESHES[name](scale=scale)
    if "path" in entry:
        return load_mesh(entry["path"], scale=scale,
                         name=entry.get("id", entry["path"]))
    raise ConfigError("object entry needs 'builtin' or 'path'",
                      entry=repr(entry))


def parse_config(source):
    """Build a PipelineConfig from a JSON path or an in-memory dict."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = dict(source)

    hand_ref = doc.get("hand", "toy")
    if hand_ref == "toy":
        hand = load_toy_hand()
    else:
        hand = load_hand(hand_ref)

    objects = doc.get("objects")
    if not objects:
        raise ConfigError("config must list at least one object")
    seen = set()
    for entry in objects:
        oid = entry.get("id")
        if not oid:
            raise ConfigError("every object entry needs an 'id'")
        if oid in seen:
            raise ConfigError(f"duplicate object id {oid!r}")
        seen.add(oid)

    task = doc.get("task", "grasp")
    if task not in ("grasp", "articulation"):
        raise ConfigError(f"unknown task {task!r}")

    weights = EnergyWeights(**doc.get("weights", {}))
    optim = OptimSettings(**doc.get("optim", {}))
    plan = PlanSettings(**doc.get("plan", {}))

    debias_doc = doc.get("debias", {})
    stages = tuple(doc.get("stages", ALL_STAGES))
    for stage in stages:
        if stage not in ALL_STAGES:
            raise ConfigError(f"unknown stage {stage!r}")

    articulation = None
    if "articulation" in doc:
        a = doc["articulation"]
        articulation = ArticulationSpec(
            kind=a["kind"], axis=np.asarray(a["axis"], dtype=np.float64),
            origin=np.asarray(a.get("origin", (0.0, 0.0, 0.0)),
                              dtype=np.float64))

    return PipelineConfig(
        hand=hand, objects=list(objects), task=task, weights=weights,
        optim=optim, plan=plan,
        debias_points=int(debias_doc.get("points", 512)),
        debias_alpha=float(debias_doc.get("alpha", 1.0)),
        debias_samples=int(debias_doc.get("samples", 64)),
        stages=stages, proposal_command=doc.get("proposal_command"),
        articulation=articulation, raw=doc)


def _build_scene(config, entry):
    mesh = _load_object_mesh(entry)
    obstacles = tuple(build_bvh(_load_object_mesh(o))
                      for o in entry.get("obstacles", []))
    return Scene(build_bvh(mesh), obstacles,
                 articulation=config.articulation)


def _object_seed(seed, index):
    # independent, reproducible streams per object
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


class _Run:
    """Shared state threaded through the stages of one pipeline run."""

    def __init__(self, config, out_dir, seed, jobs):
        self.config = config
        self.out_dir = out_dir
        self.seed = seed
        self.jobs = max(1, int(jobs))
        self.hand_hash = config.hand.config_hash or "0" * 64
        self.manifest = Manifest(hand_hash=self.hand_hash,
                                 created=time.strftime("%Y-%m-%d"),
                                 metadata={"engine": __version__,
                                           "seed": seed})
        for entry in config.objects:
            self.manifest.objects[entry["id"]] = {
                k: v for k, v in entry.items() if k != "id"}
        self.report = {"seed": seed, "stages": []}
        self.current_shard = None
        self.scenes = {}

    def scene(self, object_id):
        if object_id not in self.scenes:
            entry = next(e for e in self.config.objects
                         if e["id"] == object_id)
            self.scenes[object_id] = _build_scene(self.config, entry)
        return self.scenes[object_id]

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def emit(self, name, records):
        path = self.path(name)
        checksum = write_shard(records, path, self.hand_hash)
        self.manifest.add_shard(name, len(records), checksum)
        self.current_shard = path
        return checksum

    def latest_records(self, stage):
        if self.current_shard is None:
            self._resume(stage)
        if self.current_shard is None:
            raise PipelineError(
                f"stage '{stage}' needs a shard from an earlier stage",
                out_dir=self.out_dir)
        return read_shard(self.current_shard,
                          expected_hand_hash=self.hand_hash)

    # preferred inputs per stage when resuming from an existing out dir
    _RESUME_INPUTS = {
        "eval": ("post.shard", "proposals.shard", "seed.shard"),
        "debias": ("eval.shard", "seed.shard"),
        "post-opt": ("proposals.shard", "eval.shard", "seed.shard"),
        "plan": ("post.shard", "eval.shard", "seed.shard"),
    }

    def _resume(self, stage):
        for name in self._RESUME_INPUTS.get(stage, ()):
            path = self.path(name)
            if os.path.exists(path):
                self.current_shard = path
                return


def _synthesize_worker(raw_config, index, seed):
    """Process-pool entry; re-parses the config because BVH trees and
    compiled kernels do not pickle."""
    return _synthesize_object(parse_config(raw_config), index, seed)


def _synthesize_object(config, index, seed):
    entry = config.objects[index]
    scene = _build_scene(config, entry)
    oseed = _object_seed(seed, index)
    settings = OptimSettings(
        steps=config.optim.steps, step_size=config.optim.step_size,
        noise_scale=config.optim.noise_scale,
        restarts=config.optim.restarts, seed=oseed,
        resample_contacts_every=config.optim.resample_contacts_every,
        translation_scale=config.optim.translation_scale,
        rotation_scale=config.optim.rotation_scale,
        joint_scale=config.optim.joint_scale,
        trace_every=config.optim.trace_every)
    inits = sample_initializations(config.hand, scene,
                                   config.optim.restarts, oseed)
    results = optimize_batch(config.hand, scene, config.task, inits,
                             config.weights, settings)
    return [DemoRecord(task=config.task, object_path=entry["id"],
                       object_scale=float(entry.get("scale", 1.0)),
                       keyframe=r.pose, generator="optim", seed=oseed)
            for r in results]


def _stage_synthesize(run):
    config = run.config
    indices = list(range(len(config.objects)))
    if run.jobs > 1 and len(indices) > 1 and config.raw.get("objects"):
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=run.jobs) as pool:
            chunks = list(pool.map(
                _synthesize_worker,
                [config.raw] * len(indices), indices,
                [run.seed] * len(indices)))
    else:
        chunks = [_synthesize_object(config, i, run.seed)
                  for i in indices]
    records = [record for chunk in chunks for record in chunk]
    run.emit("seed.shard", records)
    return {"records": len(records)}


def _stage_eval(run):
    records = run.latest_records("eval")
    evaluated = []
    for record in records:
        scene = run.scene(record.object_path)
        metrics = evaluate_pose(record.keyframe, run.config.hand,
                                scene.object_tree)
        evaluated.append(DemoRecord(
            task=record.task, object_path=record.object_path,
            object_scale=record.object_scale, keyframe=record.keyframe,
            trajectory=record.trajectory,
            condition_index=record.condition_index, metrics=metrics,
            generator=record.generator, seed=record.seed,
            engine=record.engine))
    run.emit("eval.shard", evaluated)
    feasible = sum(1 for r in evaluated if r.metrics.feasible)
    return {"records": len(evaluated), "feasible": feasible}


def _stage_debias(run):
    config = run.config
    records = run.latest_records("debias")
    stats = DebiasStats(alpha=config.debias_alpha)
    clouds = {}
    for index, entry in enumerate(config.objects):
        mesh = run.scene(entry["id"]).object_tree.mesh
        oseed = _object_seed(run.seed, index)
        stats.register_mesh(entry["id"], mesh, config.debias_points, oseed)
        clouds[entry["id"]] = PointCloud(stats.objects[entry["id"]].points)
    for record in records:
        idx = associate_point(record.keyframe, config.hand,
                              clouds[record.object_path])
        update_stats(stats, record.object_path, idx)

    save_stats(stats, run.path("debias_stats.json"))
    budgets = object_budget(stats, config.debias_samples, run.seed)
    conditions = {}
    for object_id, budget in sorted(budgets.items()):
        if budget > 0:
            conditions[object_id] = sample_conditions(
                stats, object_id, budget, run.seed)
        else:
            conditions[object_id] = []
    with open(run.path("conditions.json"), "w", encoding="utf-8") as fh:
        json.dump({"alpha": config.debias_alpha, "budgets": budgets,
                   "conditions": conditions}, fh, indent=2, sort_keys=True)
    histogram = {oid: stats.objects[oid].counts.tolist()
                 for oid in sorted(stats.objects)}
    return {"records": len(records), "budgets": budgets,
            "histogram_totals": {k: int(np.sum(v))
                                 for k, v in histogram.items()}}


def _stage_proposals(run):
    command = run.config.proposal_command
    if not command:
        return {"skipped": "no proposal_command configured"}
    out_path = run.path("proposals.shard")
    rendered = command.format(conditions=run.path("conditions.json"),
                              out=out_path, seed=run.seed)
    proc = subprocess.run(shlex.split(rendered), capture_output=True,
                          text=True)
    if proc.returncode != 0:
        raise PipelineError("proposal command failed",
                            command=rendered, stderr=proc.stderr[-2000:])
    records = read_shard(out_path, expected_hand_hash=run.hand_hash)
    run.manifest.add_shard("proposals.shard", len(records),
                           _file_checksum(out_path))
    run.current_shard = out_path
    return {"records": len(records)}


def _file_checksum(path):
    import hashlib

    with open(path, "rb") as fh:
        blob = fh.read()
    return hashlib.sha256(blob[:-32]).hexdigest()


def _stage_post_opt(run):
    config = run.config
    records = run.latest_records("post-opt")
    by_object = {}
    for i, record in enumerate(records):
        by_object.setdefault(record.object_path, []).append(i)
    refined = list(records)
    post_settings = OptimSettings(
        steps=100, step_size=2e-4, noise_scale=0.0,
        seed=run.seed, trace_every=10)
    for object_id in sorted(by_object):
        idxs = by_object[object_id]
        scene = run.scene(object_id)
        results = post_optimize_batch([records[i].keyframe for i in idxs],
                                      scene, config.hand, config.weights,
                                      post_settings)
        for i, result in zip(idxs, results):
            old = records[i]
            refined[i] = DemoRecord(
                task=old.task, object_path=old.object_path,
                object_scale=old.object_scale, keyframe=result.pose,
                trajectory=old.trajectory,
                condition_index=old.condition_index, metrics=None,
                generator=old.generator + "+post", seed=old.seed,
                engine=old.engine)
    run.emit("post.shard", refined)
    return {"records": len(refined)}


def _stage_plan(run):
    config = run.config
    records = run.latest_records("plan")
    planned = []
    failures = 0
    for index, record in enumerate(records):
        scene = run.scene(record.object_path)
        oseed = _object_seed(run.seed, index)
        start = sample_initializations(config.hand, scene, 1, oseed)[0]
        reach = plan_reach(start, record.keyframe, scene, config.hand,
                           config.plan)
        if not reach.feasible:
            failures += 1
        if config.task == "articulation":
            post = generate_post_grasp(record.keyframe, "articulation",
                                       config.hand,
                                       spec=config.articulation,
                                       settings=config.plan)
        else:
            post = generate_post_grasp(record.keyframe, "lift", config.hand,
                                       settings=config.plan)
        frames = reach.trajectory.frames + post.frames[1:]
        stages = reach.trajectory.stages + post.stages[1:]
        trajectory = Trajectory(frames, config.plan.dt, stages)
        planned.append(DemoRecord(
            task=record.task, object_path=record.object_path,
            object_scale=record.object_scale, keyframe=record.keyframe,
            trajectory=trajectory, condition_index=record.condition_index,
            metrics=record.metrics, generator=record.generator,
            seed=record.seed, engine=record.engine))
    run.emit("plan.shard", planned)
    return {"records": len(planned), "reach_failures": failures}


def _stage_export(run):
    if not run.manifest.shards:
        # stage-wise invocation: index whatever shards already exist
        for name in ("seed.shard", "eval.shard", "proposals.shard",
                     "post.shard", "plan.shard"):
            path = run.path(name)
            if os.path.exists(path):
                records = read_shard(path,
                                     expected_hand_hash=run.hand_hash)
                run.manifest.add_shard(name, len(records),
                                       _file_checksum(path))
    manifest_path = run.path("manifest.json")
    save_manifest(run.manifest, manifest_path)
    verify_manifest(run.manifest, run.out_dir)
    return {"manifest": manifest_path,
            "total_records": run.manifest.total_records,
            "shards": len(run.manifest.shards)}


_STAGE_FUNCS = {
    "synthesize": _stage_synthesize,
    "eval": _stage_eval,
    "debias": _stage_debias,
    "proposals": _stage_proposals,
    "post-opt": _stage_post_opt,
    "plan": _stage_plan,
    "export": _stage_export,
}


def run_pipeline(config, out_dir, seed=0, jobs=1, stages=None):
    """Execute the configured stages; returns (manifest, report dict).

    Any stage failure aborts the run with the stage name and the paths
    of whatever outputs were already produced.
    """
    if not isinstance(config, PipelineConfig):
        config = parse_config(config)
    os.makedirs(out_dir, exist_ok=True)
    run = _Run(config, out_dir, seed, jobs)
    todo = tuple(stages) if stages is not None else config.stages
    for stage in todo:
        if stage not in _STAGE_FUNCS:
            raise ConfigError(f"unknown stage {stage!r}")
        started = time.time()
        try:
            detail = _STAGE_FUNCS[stage](run)
        except EngineError as exc:
            partial = [s["path"] for s in run.manifest.shards]
            raise PipelineError(
                f"stage '{stage}' failed: {exc}", stage=stage,
                partial_outputs=partial) from exc
        run.report["stages"].append({
            "stage": stage, "seconds": round(time.time() - started, 3),
            **detail})
    report_path = os.path.join(out_dir, "run_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(run.report, fh, indent=2, sort_keys=True)
    if run.manifest.shards and not any(s == "export" for s in todo):
        save_manifest(run.manifest, os.path.join(out_dir, "manifest.json"))
    return run.manifest, run.report
