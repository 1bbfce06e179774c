"""Command-line entry point wiring the pipeline steps to one config file."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import (
    ArtifactError,
    ArtifactVersionError,
    ConfigError,
    EngineError,
)
from .pipeline import SUBCOMMANDS, run_pipeline
from .pipeline_config import load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_VERSION_MISMATCH = 4
EXIT_ENGINE = 5

_EPILOG = """\
subcommands:
  synth        generate a synthetic corpus with planted ground truth
  train        train the alignment model on the train split
  extract      extract aspect sub-sentences for every document
  arcss        filter extraction by rank-fused relevance classification
  build-pool   build the substitution pool from the train split
  deidentify   produce k-anonymous (and random-baseline) summaries
  evaluate     write the utility/fidelity/re-identification bundle
  all          chain every step above

exit codes:
  0  success
  2  configuration error (bad file, bad key, bad value)
  3  missing or already-existing artifact
  4  artifact version or integrity mismatch
  5  any other engine error

environment:
  ASPECTDEID_LOG  log level (DEBUG, INFO, WARNING, ...); default WARNING
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aspectdeid",
        description="Aspect-guided de-identification pipeline.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, help="YAML config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config scalar by dotted name (repeatable)",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the run seed")
    parser.add_argument("--out", default="run", help="run directory for all artifacts")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=os.environ.get("ASPECTDEID_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, args.overrides, args.seed)
        artifact = run_pipeline(args.subcommand, config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactVersionError as exc:
        print(f"artifact version error: {exc}", file=sys.stderr)
        return EXIT_VERSION_MISMATCH
    except ArtifactError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    print(artifact)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
