"""Application and run configuration for the order book simulator."""

# ---------------------------------------------------------------------------
# Configuration guide
# ---------------------------------------------------------------------------
# Application settings come from two places:
# 1. DEFAULT_LIMITS below holds the repository-wide defaults.
# 2. Environment variables (or a .env file) override them at runtime
#    (WORKER_POOL_SIZE, DEFAULT_REPETITIONS, RECIPES_DIR, EXPORT_DIR,
#     RUNS_DIR, WRITE_CHARTS).
# A single simulation is described by a JSON run config with one section
# per module; see docs/CONFIG_GUIDE.md for the schema.
# ---------------------------------------------------------------------------

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from dotenv import load_dotenv

from background.intensity import CTLSTMParams, HawkesParams
from background.order_stats import OrderStatsParams
from background.trader import BackgroundConfig, PreOpenConfig
from core.parser import load_json, parse_section, unknown_keys
from simulation.kernel import LatencyModel
from simulation.oracle import OUParams
from simulation.session import AGENT_KINDS, AgentGroup, SessionConfig, SimulationSetup, build_agents

DEFAULT_LIMITS: Dict[str, int] = {
    "worker_pool_size": 4,  # Thread pool size for repetition fan-out.
    "default_repetitions": 10,  # Used when a recipe does not say otherwise.
}

RUN_SECTIONS = ["session", "latency", "oracle", "agents", "background", "order_stats", "outputs"]


def _env_bool(var_name: str, default: bool) -> bool:
    """Returns a boolean for the provided environment variable name."""
    raw_value = os.getenv(var_name)
    if raw_value is None:
        return default
    return raw_value.lower() in {"1", "true", "yes", "on"}


@dataclass(frozen=True)
class LimitsConfig:
    """Holds numeric limits used by the orchestrator."""

    worker_pool_size: int = DEFAULT_LIMITS["worker_pool_size"]  # Concurrent simulations.
    default_repetitions: int = DEFAULT_LIMITS["default_repetitions"]  # Repetitions per condition.


@dataclass(frozen=True)
class PathsConfig:
    """Collects filesystem locations used by the application."""

    recipes_dir: Path  # Folder storing the experiment recipes.
    export_dir: Path  # Root data directory.
    runs_dir: Path  # Run-scoped output directories live here.


@dataclass(frozen=True)
class FlagsConfig:
    """Boolean feature toggles."""

    write_charts: bool = True  # Emit SVG charts next to their CSVs.


@dataclass(frozen=True)
class Config:
    """Top-level configuration object."""

    limits: LimitsConfig
    paths: PathsConfig
    flags: FlagsConfig


def get_config() -> Config:
    """Instantiates the Config object, honoring .env and environment overrides."""
    load_dotenv()
    recipes_dir = Path(os.getenv("RECIPES_DIR", "recipes"))
    export_dir = Path(os.getenv("EXPORT_DIR", "data"))
    runs_dir = Path(os.getenv("RUNS_DIR", str(export_dir / "runs")))

    for directory in (export_dir, runs_dir):
        directory.mkdir(parents=True, exist_ok=True)

    limits = LimitsConfig(
        worker_pool_size=int(os.getenv("WORKER_POOL_SIZE", str(DEFAULT_LIMITS["worker_pool_size"]))),
        default_repetitions=int(os.getenv("DEFAULT_REPETITIONS", str(DEFAULT_LIMITS["default_repetitions"]))),
    )
    return Config(
        limits=limits,
        paths=PathsConfig(recipes_dir=recipes_dir, export_dir=export_dir, runs_dir=runs_dir),
        flags=FlagsConfig(write_charts=_env_bool("WRITE_CHARTS", True)),
    )


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


class ConfigValidationError(ValueError):
    """Every problem found in a run config, reported together."""

    def __init__(self, errors: List[str]) -> None:
        super().__init__("Invalid run configuration:\n  - " + "\n  - ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class OutputsConfig:
    """What a run writes besides its summary CSVs."""

    lobster: bool = True
    facts: bool = True
    charts: bool = True
    oracle_trace: bool = False


@dataclass(frozen=True)
class RunConfig:
    simulation: SimulationSetup = field(default_factory=SimulationSetup)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)


def _resolve(value: Any, base_dir: Path) -> Path:
    path = Path(str(value))
    return path if path.is_absolute() else base_dir / path


def _params_loader(cls: Any, base_dir: Path) -> Any:
    """Accepts inline parameters or the path of a fitted-parameter JSON file."""

    def load(value: Any) -> Any:
        if isinstance(value, str):
            value = load_json(_resolve(value, base_dir))
        if not isinstance(value, Mapping):
            raise TypeError("expected an object or a JSON file path")
        return cls.from_dict(dict(value))

    return load


def _parse_latency(payload: Any, errors: List[str]) -> Optional[LatencyModel]:
    if payload is None:
        return LatencyModel()
    if not isinstance(payload, Mapping):
        errors.append("latency: expected an object.")
        return None
    for key in unknown_keys(payload, ["default_ns", "pairs"]):
        errors.append(f"latency: unknown key '{key}'.")
    try:
        pairs: Dict[Tuple[int, int], int] = {}
        for entry in payload.get("pairs", []):
            sender, recipient, delay = (int(value) for value in entry)
            pairs[(sender, recipient)] = delay
        return LatencyModel(default_ns=int(payload.get("default_ns", 0)), pairs=pairs)
    except (TypeError, ValueError) as exc:
        errors.append(f"latency: {exc}")
        return None


def _parse_agents(payload: Any, errors: List[str]) -> Tuple[AgentGroup, ...]:
    if payload is None:
        return ()
    if not isinstance(payload, list):
        errors.append("agents: expected a list of agent groups.")
        return ()
    groups = []
    for index, entry in enumerate(payload):
        section = f"agents[{index}]"
        if isinstance(entry, Mapping) and entry.get("kind") not in AGENT_KINDS:
            errors.append(f"{section}: unknown agent type {entry.get('kind')!r}; expected one of {', '.join(AGENT_KINDS.names())}.")
            continue
        group = parse_section(AgentGroup, entry, section, errors, converters={"params": dict})
        if group is None:
            continue
        try:
            build_agents([group])
        except (TypeError, ValueError) as exc:
            errors.append(f"{section}.params: {exc}")
            continue
        groups.append(group)
    return tuple(groups)


def parse_run_config(payload: Mapping[str, Any], *, base_dir: Path = Path(".")) -> RunConfig:
    """Validates every section and raises one ConfigValidationError listing all problems."""
    errors: List[str] = []
    if not isinstance(payload, Mapping):
        raise ConfigValidationError(["run config must be a JSON object."])
    for key in unknown_keys(payload, RUN_SECTIONS):
        errors.append(f"unknown section '{key}'.")

    session = parse_section(SessionConfig, payload.get("session"), "session", errors)
    latency = _parse_latency(payload.get("latency"), errors)

    oracle_payload = dict(payload.get("oracle") or {})
    fundamental = oracle_payload.pop("fundamental_csv", None)
    oracle = parse_section(OUParams, oracle_payload, "oracle", errors)

    agents = _parse_agents(payload.get("agents"), errors)
    order_stats = parse_section(OrderStatsParams, payload.get("order_stats"), "order_stats", errors)

    background_payload = dict(payload.get("background") or {})
    if "order_stats" in background_payload:
        errors.append("background: order statistics belong in the top-level 'order_stats' section.")
        background_payload.pop("order_stats")
    background = parse_section(
        BackgroundConfig,
        background_payload,
        "background",
        errors,
        converters={
            "hawkes": _params_loader(HawkesParams, base_dir),
            "ctlstm": _params_loader(CTLSTMParams, base_dir),
            "pre_open": _pre_open,
        },
    )
    outputs = parse_section(OutputsConfig, payload.get("outputs"), "outputs", errors)

    if errors:
        raise ConfigValidationError(errors)
    setup = SimulationSetup(
        session=session,
        latency=latency,
        oracle=oracle,
        fundamental_csv=_resolve(fundamental, base_dir) if fundamental else None,
        agents=agents,
        background=replace(background, order_stats=order_stats),
    )
    return RunConfig(simulation=setup, outputs=outputs)


def _pre_open(value: Any) -> PreOpenConfig:
    errors: List[str] = []
    parsed = parse_section(PreOpenConfig, value, "pre_open", errors)
    if parsed is None:
        raise ValueError("; ".join(errors))
    return parsed


def load_run_config(path: Path) -> RunConfig:
    """Loads a JSON run config; relative file references resolve against its folder."""
    return parse_run_config(load_json(Path(path)), base_dir=Path(path).parent)
