"""Command-line entry point: staged pipeline subcommands over a flat config file."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .pipeline import ArtifactError, InvariantError, STAGE_ORDER, run_subcommand

logger = logging.getLogger("trendrank")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_INVARIANT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trendrank",
        description=(
            "Temporal popularity pipeline: ingest interaction logs, build leakage-free "
            "splits, mine contrastive triplets, train the projection head, score and "
            "explain items, and evaluate the ranked list."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in [*STAGE_ORDER, "run-all"]:
        stage = sub.add_parser(name, help=f"run the {name} stage")
        stage.add_argument("--config", default=None, help="path to a flat JSON config file")
        stage.add_argument("--out", default="out", help="artifact directory (default: out)")
        stage.add_argument("--threads", type=int, default=None, help="intra-stage parallelism")
        stage.add_argument(
            "--strict", action="store_true", help="treat malformed input lines as fatal"
        )
        stage.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (repeatable; overrides env and file)",
        )
    return parser


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigError(key or pair, "override must look like KEY=VALUE")
        out[key] = value
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    try:
        overrides = _parse_overrides(args.overrides)
        if args.threads is not None:
            overrides["threads"] = str(args.threads)
        if args.strict:
            overrides["strict"] = "true"
        cfg = load_config(args.config, overrides)
        run_subcommand(args.command, cfg, Path(args.out))
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except ArtifactError as exc:
        logger.error("%s", exc)
        return EXIT_MISSING_ARTIFACT
    except (InvariantError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
