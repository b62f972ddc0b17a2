"""Command-line entry point: ``traveldist <stage> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .pipeline import ALIASES, ALL_MODELS, STAGES, Pipeline, StageError, load_config


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with per-stage sections (merged over the defaults)")
    common.add_argument("--seed", type=int, help="root seed; every stage derives its own seed from it")
    common.add_argument("--out", default="out", help="artifact directory (default: ./out)")
    common.add_argument("--preset", help="synthetic corpus preset: default, clean, dirty, small, planted or null")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    ap = argparse.ArgumentParser(prog="traveldist", description="Travel-distance class prediction pipeline.")
    sub = ap.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        if stage == "train":
            continue
        sub.add_parser(stage, parents=[common], help=f"run the {stage} stage")
    tr = sub.add_parser("train", parents=[common], help="train one architecture, or all of them")
    tr.add_argument("arch", choices=[*ALL_MODELS, *ALIASES, "all"])
    sub.add_parser("all", parents=[common], help="run every stage in order")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.preset)
        pipe = Pipeline(cfg, args.out)
        if args.command == "all":
            pipe.run_all()
        else:
            pipe.run_stage(args.command, getattr(args, "arch", None))
    except StageError as e:
        print(json.dumps(e.to_json()), file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - every failure is reported as one JSON line
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "command": args.command, "out": str(args.out)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
