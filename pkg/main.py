"""Entry point for the order book simulator experiments."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from rich.logging import RichHandler

from config import ConfigValidationError, get_config
from core.parser import load_json
from core.recipe_repository import ExperimentRecipe, RecipeRepository
from pipeline.orchestrator import ExperimentError, ExperimentOrchestrator
from pipeline.user_io import ConsoleIO

# Subcommand -> recipe name.
COMMANDS: Dict[str, str] = {
    "simulate": "solo_bt",
    "interaction": "interaction",
    "pov": "pov_impact",
    "sobol": "sobol",
    "calibrate": "calibrate",
    "facts": "facts",
}

EXIT_GATES_FAILED = 1
EXIT_INVALID_CONFIG = 2
EXIT_RUN_FAILED = 3


def _configure_logging() -> None:
    """Configures application-wide logging."""
    level_name = os.getenv("LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(name)s - %(message)s",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Discrete-event limit order book simulator experiments.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, recipe in COMMANDS.items():
        sub = subparsers.add_parser(command, help=f"run the {recipe} recipe")
        sub.add_argument("--seed", type=int, help="master seed; repetition r uses seed + r")
        sub.add_argument("--reps", type=int, help="number of repetitions per condition")
        sub.add_argument("--out", type=Path, help="run directory (defaults to a run-scoped folder)")
        sub.add_argument("--config", type=Path, help="run config JSON replacing the recipe's run block")
        sub.add_argument("--recipe", type=Path, help="recipe JSON file instead of the stored default")
        if command in ("facts", "calibrate"):
            sub.add_argument("--messages", type=Path, help="LOBSTER-style message file")
            sub.add_argument("--book", type=Path, help="LOBSTER-style order book file")
        if command == "facts":
            sub.add_argument("--open", dest="open_s", type=float, help="session open, seconds after midnight")
            sub.add_argument("--close", dest="close_s", type=float, help="session close, seconds after midnight")
        if command == "pov":
            sub.add_argument("--lams", type=float, nargs="+", help="participation rates in (0, 1]")
        if command == "sobol":
            sub.add_argument("--n", type=int, help="base sample size")
    return parser


def _recipe(args: argparse.Namespace, repository: RecipeRepository, default_repetitions: int) -> ExperimentRecipe:
    name = COMMANDS[args.command]
    if args.recipe is not None:
        recipe = ExperimentRecipe.from_dict(load_json(args.recipe), default_repetitions=default_repetitions)
        if recipe.name != name:
            raise ValueError(f"{args.recipe} holds a '{recipe.name}' recipe, expected '{name}'.")
    else:
        recipe = repository.load(name)
    params: Dict[str, Any] = {}
    for option, key in (("lams", "lams"), ("n", "n"), ("open_s", "open_s"), ("close_s", "close_s")):
        value = getattr(args, option, None)
        if value is not None:
            params[key] = value
    run = load_json(args.config) if args.config is not None else None
    return recipe.with_overrides(seed=args.seed, repetitions=args.reps, run=run, params=params or None)


def main(argv: Optional[List[str]] = None) -> int:
    """CLI entry point; returns 0 only when every acceptance gate passes."""
    _configure_logging()
    logger = logging.getLogger(__name__)
    args = build_parser().parse_args(argv)
    config = get_config()

    repository = RecipeRepository(config.paths.recipes_dir, default_repetitions=config.limits.default_repetitions)
    base_dir = args.config.parent if args.config is not None else (
        args.recipe.parent if args.recipe is not None else config.paths.recipes_dir
    )
    orchestrator = ExperimentOrchestrator(config, ConsoleIO(), run_base_dir=base_dir)

    try:
        recipe = _recipe(args, repository, config.limits.default_repetitions)
        outcome = orchestrator.run(
            recipe,
            out_dir=args.out,
            messages=getattr(args, "messages", None),
            book=getattr(args, "book", None),
        )
    except ConfigValidationError as error:
        logger.error("%s", error)
        return EXIT_INVALID_CONFIG
    except (ValueError, FileNotFoundError, KeyError) as error:
        logger.error("Invalid input: %s", error)
        return EXIT_INVALID_CONFIG
    except ExperimentError as error:
        logger.error("%s", error)
        return EXIT_RUN_FAILED

    logger.info("Outputs written to %s.", outcome.run_dir)
    return 0 if outcome.passed else EXIT_GATES_FAILED


if __name__ == "__main__":
    sys.exit(main())
