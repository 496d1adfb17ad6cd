"""Command-line interface for the qiga benchmark."""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from .config import Settings, get_settings
from .errors import QigaError
from .experiment import (
    compute_oracle,
    parse_seeds,
    parse_spec_file,
    replay,
    report,
    run_experiment,
)

logger = logging.getLogger(__name__)


async def _run_async(
    settings: Settings,
    *,
    spec_path: Path,
    seeds: str | None,
    output: Path | None,
    workers: int | None,
) -> None:
    spec = parse_spec_file(spec_path)
    if seeds:
        spec = spec.model_copy(update={"seeds": parse_seeds(seeds)})
    summaries = await run_experiment(spec, settings, output=output, workers=workers)
    for summary in summaries:
        print(
            f"{summary.algorithm} t{int(summary.test_case)} seed={summary.seed}: "
            f"best_fit={summary.best_fit:.6f} accuracy={summary.accuracy:.6f} "
            f"loss={summary.loss:.6f}"
        )


async def _oracle_async(settings: Settings, *, spec_path: Path) -> None:
    spec = parse_spec_file(spec_path)
    outcome = await asyncio.to_thread(compute_oracle, spec.problem, settings)
    print(f"→ Oracle {outcome['kind']} for {spec.problem.label()}: {outcome['value']}")
    if outcome["cached"]:
        print(f"   Cached at {outcome['cached']}")


async def _report_async(settings: Settings, *, source: Path | None, output: Path | None) -> None:
    root = source or settings.output_root
    written = await asyncio.to_thread(report, root, output or root)
    for path in written:
        print(f"→ {path}")


async def _replay_async(settings: Settings, *, source: Path, output: Path) -> None:
    summary = await asyncio.to_thread(replay, source, output, settings)
    print(
        f"Replayed {summary.algorithm} t{int(summary.test_case)} seed={summary.seed} "
        f"into {output}: best_fit={summary.best_fit:.6f}"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Quantum-inspired genetic algorithm benchmark (GA, QIGA, D-QIGA)",
    )
    parser.add_argument(
        "--log-level",
        default=None,
        help="Logging level (DEBUG, INFO, WARNING, ERROR); defaults to QIGA_LOG_LEVEL",
    )

    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Run every algorithm x test case x seed")
    run_parser.add_argument("spec", type=Path, help="Experiment spec file (key = value lines)")
    run_parser.add_argument("--seeds", help="Seed override, e.g. 1..5 or 1,2,3")
    run_parser.add_argument("--out", type=Path, help="Output root (default: QIGA_OUTPUT_ROOT)")
    run_parser.add_argument(
        "--workers",
        type=int,
        help="Maximum concurrent runs (default: QIGA_WORKERS)",
    )

    oracle_parser = subparsers.add_parser(
        "oracle", help="Compute and cache the knapsack optimum or centroid baseline"
    )
    oracle_parser.add_argument("spec", type=Path, help="Experiment spec file naming the problem")

    report_parser = subparsers.add_parser(
        "report", help="Aggregate run directories into fitness, accuracy and timing tables"
    )
    report_parser.add_argument(
        "source", type=Path, nargs="?", help="Directory holding run directories"
    )
    report_parser.add_argument("--out", type=Path, help="Directory receiving the tables")

    replay_parser = subparsers.add_parser("replay", help="Re-run a stored manifest")
    replay_parser.add_argument("manifest", type=Path, help="manifest.json or its run directory")
    replay_parser.add_argument("--out", type=Path, required=True, help="Target run directory")

    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = get_settings()
        _configure_logging(args.log_level or settings.log_level)

        if args.command == "run":
            if args.workers is not None and args.workers < 1:
                parser.error("--workers must be >= 1")
            asyncio.run(
                _run_async(
                    settings,
                    spec_path=args.spec,
                    seeds=args.seeds,
                    output=args.out,
                    workers=args.workers,
                )
            )
            return 0

        if args.command == "oracle":
            asyncio.run(_oracle_async(settings, spec_path=args.spec))
            return 0

        if args.command == "report":
            asyncio.run(_report_async(settings, source=args.source, output=args.out))
            return 0

        if args.command == "replay":
            asyncio.run(_replay_async(settings, source=args.manifest, output=args.out))
            return 0
    except (QigaError, ValidationError) as exc:
        first_line = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {first_line}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        logger.info("Shutdown requested (KeyboardInterrupt).")
        return 130

    parser.print_help()
    return 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
