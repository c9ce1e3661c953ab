"""Command-line entry point.

Subcommands map one-to-one onto pipeline stages plus `pipeline` for the
full configured sequence. Every subcommand takes the same global flags:

    --config PATH   run configuration JSON (required)
    --seed INT      master seed (default 0, overrides the config)
    --jobs INT      parallel workers for per-object stages (default 1)
    --out PATH      output directory (default ./out)

Exit status is 0 on success; on failure a JSON error report is printed
to stderr and the status is nonzero.
"""

import argparse
import json
import sys

from .errors import EngineError
from .pipeline import ALL_STAGES, parse_config, run_pipeline

_SUBCOMMANDS = ("synthesize", "post-opt", "plan", "eval", "debias",
                "export", "pipeline")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dexsynth",
        description="Grasp synthesis engine: seed-dataset generation, "
                    "refinement, planning, and dataset export.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage"
                           if name != "pipeline"
                           else "run every configured stage in order")
        p.add_argument("--config", required=True,
                       help="path to the run configuration JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides the config)")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for per-object stages")
        p.add_argument("--out", default="out",
                       help="output directory for shards and reports")
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = parse_config(args.config)
        seed = args.seed
        if seed is None:
            seed = int(config.raw.get("seed", 0))
        if args.command == "pipeline":
            stages = None  # the config's stage list
        else:
            stages = (args.command,)
        manifest, report = run_pipeline(config, args.out, seed=seed,
                                        jobs=args.jobs, stages=stages)
        print(json.dumps(report, indent=2, sort_keys=True))
        return 0
    except EngineError as exc:
        json.dump(exc.to_dict(), sys.stderr, indent=2, sort_keys=True)
        sys.stderr.write("\n")
        return 1
    except OSError as exc:
        json.dump({"error": "io_error", "message": str(exc)}, sys.stderr,
                  indent=2, sort_keys=True)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
