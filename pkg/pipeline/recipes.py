"""Parameter blocks of the experiment recipes, parsed strictly like run configs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Type

from analytics.report import FACT_NAMES, FactSettings
from background.order_stats import SYMBOLS
from calibration.ctlstm_train import TrainingConfig
from config import ConfigValidationError
from core.parser import parse_section
from simulation.session import AGENT_KINDS

STRATEGIC_KINDS = ("MM", "MR", "ZI", "HBL")


def _settings(value: Any) -> FactSettings:
    errors: List[str] = []
    parsed = parse_section(FactSettings, value, "settings", errors)
    if parsed is None:
        raise ValueError("; ".join(errors))
    return parsed


def _training(value: Any) -> TrainingConfig:
    errors: List[str] = []
    parsed = parse_section(TrainingConfig, value, "training", errors)
    if parsed is None:
        raise ValueError("; ".join(errors))
    return parsed


def _gated(value: Any) -> Tuple[str, ...]:
    names = tuple(str(name) for name in value)
    unknown = [name for name in names if name not in FACT_NAMES]
    if unknown:
        raise ValueError(f"unknown facts {', '.join(unknown)}")
    return names


def _fluctuations(value: Any) -> Dict[str, float]:
    if not isinstance(value, Mapping):
        raise TypeError("expected an object keyed by order statistic symbol")
    unknown = [symbol for symbol in value if symbol not in SYMBOLS]
    if unknown:
        raise ValueError(f"unknown symbols {', '.join(unknown)}; expected {', '.join(SYMBOLS)}")
    return {str(symbol): float(width) for symbol, width in value.items()}


def _agent_params(value: Any) -> Dict[str, Dict[str, Any]]:
    if not isinstance(value, Mapping):
        raise TypeError("expected an object keyed by agent type")
    for kind in value:
        if kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent type {kind!r}")
    return {str(kind): dict(params) for kind, params in value.items()}


@dataclass(frozen=True)
class SoloParams:
    """Background trader alone; a fact gate passes when enough repetitions pass it."""

    settings: FactSettings = field(default_factory=FactSettings)
    pass_fraction: float = 0.5
    gated_facts: Tuple[str, ...] = FACT_NAMES

    def __post_init__(self) -> None:
        if not 0.0 < self.pass_fraction <= 1.0:
            raise ValueError("pass_fraction must lie in (0, 1].")


@dataclass(frozen=True)
class InteractionParams:
    agent_types: Tuple[str, ...] = STRATEGIC_KINDS
    counts: Tuple[int, ...] = (1, 15, 50)
    no_impact_count: int = 15
    pairs: Tuple[Tuple[str, str], ...] = (("MM", "MR"), ("ZI", "HBL"))
    pair_count: int = 15
    mean_wakeup_s: float = 30.0
    agent_params: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    mid_dt: float = 1.0

    def __post_init__(self) -> None:
        for kind in [*self.agent_types, *(k for pair in self.pairs for k in pair)]:
            if kind not in STRATEGIC_KINDS:
                raise ValueError(f"Unknown agent type {kind!r}; expected one of {', '.join(STRATEGIC_KINDS)}.")
        if any(count < 1 for count in self.counts) or self.no_impact_count < 0 or self.pair_count < 1:
            raise ValueError("Agent counts must be positive.")
        if any(len(pair) != 2 for pair in self.pairs):
            raise ValueError("pairs hold exactly two agent types each.")


@dataclass(frozen=True)
class POVParams:
    lams: Tuple[float, ...] = (0.01, 0.1, 0.2, 0.5)
    window_s: float = 600.0
    start_s: float = 1800.0
    child_interval_s: float = 60.0
    side: str = "bid"
    sample_dt: float = 1.0
    order_flow_compare: Tuple[float, float] = (0.1, 0.5)

    def __post_init__(self) -> None:
        if not self.lams:
            raise ValueError("lams must not be empty.")
        bad = [lam for lam in self.lams if not 0.0 < lam <= 1.0]
        if bad:
            raise ValueError(f"Participation rates must lie in (0, 1]; got {bad}.")
        if self.side not in ("bid", "ask"):
            raise ValueError("side is 'bid' (buy) or 'ask' (sell).")


@dataclass(frozen=True)
class SobolParams:
    n: int = 20
    first_order: bool = False
    fluctuations: Mapping[str, float] = field(default_factory=dict)
    settings: FactSettings = field(default_factory=FactSettings)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("Sobol estimation needs n >= 2.")


@dataclass(frozen=True)
class CalibrateParams:
    power_law_samples: int = 100_000
    exponents: Tuple[float, ...] = (1.5, 4.7, 1.2, 1.6)
    x_min: float = 1.0
    exponent_tolerance: float = 0.05
    hawkes_horizon: float = 200.0
    hawkes_sequences: int = 10
    recovery_truth: Tuple[float, float, float] = (0.5, 0.8, 1.0)
    recovery_events: int = 100_000
    recovery_tolerance: float = 0.1
    validation_fraction: float = 0.2
    init_scale: float = 0.5
    gradient_seeds: int = 10
    nll_tolerance: float = 0.05
    training: TrainingConfig = field(default_factory=TrainingConfig)
    train_ctlstm: bool = True


@dataclass(frozen=True)
class FactsParams:
    settings: FactSettings = field(default_factory=FactSettings)
    gated_facts: Tuple[str, ...] = FACT_NAMES
    open_s: Optional[float] = None
    close_s: Optional[float] = None


RECIPE_PARAMS: Dict[str, Tuple[Type[Any], Dict[str, Callable[[Any], Any]]]] = {
    "solo_bt": (SoloParams, {"settings": _settings, "gated_facts": _gated}),
    "interaction": (InteractionParams, {"agent_params": _agent_params}),
    "pov_impact": (POVParams, {}),
    "sobol": (SobolParams, {"settings": _settings, "fluctuations": _fluctuations}),
    "calibrate": (CalibrateParams, {"training": _training}),
    "facts": (FactsParams, {"settings": _settings, "gated_facts": _gated}),
}


def parse_recipe_params(name: str, payload: Mapping[str, Any]) -> Any:
    """Validates a recipe's parameter block; unknown keys are errors."""
    cls, converters = RECIPE_PARAMS[name]
    errors: List[str] = []
    parsed = parse_section(cls, payload, f"{name}.params", errors, converters=converters)
    if parsed is None:
        raise ConfigValidationError(errors)
    return parsed
