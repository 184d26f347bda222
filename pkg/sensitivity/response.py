"""The six response statistics of a run and the simulation-backed model function."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Tuple

import numpy as np

from analytics import facts
from analytics.logs import AnalyticsError, MarketLogs
from analytics.report import FactSettings
from simulation.session import SimulationSetup, run_simulation

LOGGER = logging.getLogger(__name__)

RESPONSE_NAMES = (
    "hurst_volatility",
    "return_acf",
    "submission_sign_acf",
    "cancellation_sign_acf",
    "price_impact",
    "ofi_r_squared",
)


class ResponseStatisticError(RuntimeError):
    """A response statistic could not be computed; ``criterion`` names it."""

    def __init__(self, criterion: str, reason: str) -> None:
        super().__init__(f"Response statistic {criterion!r} failed: {reason}")
        self.criterion = criterion


def _hurst(logs: MarketLogs, settings: FactSettings) -> float:
    return facts.dfa_hurst(np.abs(facts.log_returns(logs, settings.fine_dt).returns))


def _return_acf(logs: MarketLogs, settings: FactSettings) -> float:
    return facts.autocorrelation(facts.log_returns(logs, settings.fine_dt).returns, 1)


def _submission_sign(logs: MarketLogs, settings: FactSettings) -> float:
    return facts.order_sign_acf(logs, "submission").coefficient


def _cancellation_sign(logs: MarketLogs, settings: FactSettings) -> float:
    return facts.order_sign_acf(logs, "cancellation").coefficient


def _impact(logs: MarketLogs, settings: FactSettings) -> float:
    volumes, changes = facts.market_order_impacts(logs)
    return facts.price_impact_fit(volumes, changes, n_bins=settings.impact_bins, min_trades=settings.min_trades).beta


def _ofi(logs: MarketLogs, settings: FactSettings) -> float:
    return facts.ofi_regression(logs, settings.ofi_window_s, weighted=settings.ofi_weighted).r_squared


_STATISTICS: Tuple[Callable[[MarketLogs, FactSettings], float], ...] = (
    _hurst,
    _return_acf,
    _submission_sign,
    _cancellation_sign,
    _impact,
    _ofi,
)


def response_statistics(logs: MarketLogs, settings: FactSettings = FactSettings()) -> np.ndarray:
    """Returns the six statistics in ``RESPONSE_NAMES`` order."""
    values = np.empty(len(RESPONSE_NAMES))
    for index, (name, statistic) in enumerate(zip(RESPONSE_NAMES, _STATISTICS)):
        try:
            value = statistic(logs, settings)
        except AnalyticsError as exc:
            raise ResponseStatisticError(name, str(exc)) from exc
        if not math.isfinite(value):
            raise ResponseStatisticError(name, "statistic is undefined on these logs")
        values[index] = value
    return values


@dataclass(frozen=True)
class SimulationResponse:
    """Runs one session with shifted order statistics and returns its responses.

    Row ``j`` of every Sobol matrix gets seed ``base_seed + j``.
    """

    setup: SimulationSetup
    symbols: Tuple[str, ...]
    base_seed: int = 0
    settings: FactSettings = FactSettings()

    def __call__(self, point: np.ndarray, row: int = 0) -> np.ndarray:
        initial = self.setup.background.order_stats
        shifts = {
            symbol: float(value) - initial.symbol_value(symbol)
            for symbol, value in zip(self.symbols, point)
        }
        background = replace(self.setup.background, order_stats=initial.perturbed(shifts))
        setup = replace(self.setup, background=background).with_seed(self.base_seed + row)
        result = run_simulation(setup)
        return response_statistics(MarketLogs.from_result(result), self.settings)
