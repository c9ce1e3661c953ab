"""Command line entry points.

    dexgen train   --shards S [S ...] --hand H --cloud C --out CKPT
                   [--steps N --seed N --batch-size N --learning-rate F
                    --num-points N --clearance-weight F --frames N]
    dexgen propose --checkpoint CKPT --cloud C --conditions FILE
                   --n N --seed N --out SHARD [--object-scale F]

``propose`` is the hook the synthesis engine's pipeline invokes: it
reads the sampled condition indices from the conditions file, decodes
one pose per requested proposal, and writes them as a shard the engine
reads back. Reports are JSON on stdout; errors are JSON on stderr with
exit code 1.
"""

import argparse
import json
import sys

import numpy as np

from .encoder import resample_cloud  # noqa: F401  (re-export for scripts)
from .errors import ConfigError, GenError
from .handkin import HandKinematics
from .records import read_shard, write_shard
from .sample import sample_proposals
from .train import TrainConfig, load_checkpoint, train


def load_cloud(path):
    """(N, 3) points from a .npy array, a JSON list/object, or an OBJ
    file's vertices."""
    text = str(path)
    if text.endswith(".npy"):
        return np.asarray(np.load(path), dtype=np.float64)
    if text.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if isinstance(doc, dict):
            doc = doc.get("points", doc.get("vertices"))
        return np.asarray(doc, dtype=np.float64)
    if text.endswith(".obj"):
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if parts and parts[0] == "v":
                    rows.append([float(v) for v in parts[1:4]])
        return np.asarray(rows, dtype=np.float64)
    raise ConfigError(f"unsupported cloud format: {path}")


def _flatten_conditions(doc):
    """(object_id, index) pairs from a conditions document, object ids
    in sorted order."""
    table = doc.get("conditions", doc) if isinstance(doc, dict) else {}
    pairs = []
    for object_id in sorted(table):
        for idx in table[object_id]:
            pairs.append((object_id, int(idx)))
    return pairs


def _cmd_train(args):
    hand = HandKinematics.from_file(args.hand)
    records = []
    for shard in args.shards:
        records.extend(read_shard(shard, expected_hand_hash=hand.hash))
    cloud = load_cloud(args.cloud)
    config = TrainConfig(
        learning_rate=args.learning_rate, num_points=args.num_points,
        batch_size=args.batch_size, steps=args.steps, seed=args.seed,
        w_clearance=args.clearance_weight, frames=args.frames)
    clouds = {path: cloud for path in {r.object_path for r in records}}
    checkpoint = train(records, clouds, hand, config)
    checkpoint.save(args.out)
    final = checkpoint.curve[-1] if checkpoint.curve else {}
    return {"checkpoint": args.out, "records": len(records),
            "steps": config.steps, "final_loss": final.get("total"),
            "hand_hash": hand.hash}


def _cmd_propose(args):
    checkpoint = load_checkpoint(args.checkpoint)
    cloud = load_cloud(args.cloud)
    with open(args.conditions, "r", encoding="utf-8") as fh:
        pairs = _flatten_conditions(json.load(fh))
    if not pairs and args.n > 0:
        raise ConfigError("conditions file holds no condition indices",
                          path=str(args.conditions))

    by_object = {}
    for pos, (object_id, _) in enumerate(pairs):
        by_object.setdefault(object_id, []).append(pos)
    records = [None] * args.n
    assigned = [pairs[i % len(pairs)] for i in range(args.n)]
    for object_id in sorted(by_object):
        rows = [i for i, (oid, _) in enumerate(assigned)
                if oid == object_id]
        if not rows:
            continue
        indices = [assigned[i][1] for i in rows]
        protos = sample_proposals(
            checkpoint, cloud, indices, len(rows), args.seed,
            object_path=object_id, object_scale=args.object_scale)
        for row, proto in zip(rows, protos):
            records[row] = proto
    checksum = write_shard(records, args.out, checkpoint.hand_hash)
    return {"shard": args.out, "records": len(records),
            "checksum": checksum, "seed": args.seed}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dexgen",
        description="Generative grasp-proposal model: training and "
                    "conditioned sampling over demonstration shards.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the generator on shards")
    p.add_argument("--shards", nargs="+", required=True)
    p.add_argument("--hand", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--num-points", type=int, default=1024)
    p.add_argument("--clearance-weight", type=float, default=1e-4)
    p.add_argument("--frames", type=int, default=1)
    p.set_defaults(run=_cmd_train)

    p = sub.add_parser("propose", help="sample proposals into a shard")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--conditions", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--object-scale", type=float, default=1.0)
    p.set_defaults(run=_cmd_propose)

    args = parser.parse_args(argv)
    try:
        report = args.run(args)
    except GenError as exc:
        json.dump(exc.to_dict(), sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 1
    except OSError as exc:
        json.dump({"error": "io_error", "message": str(exc)}, sys.stderr,
                  indent=2)
        sys.stderr.write("\n")
        return 1
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
