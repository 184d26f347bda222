"""Zero-intelligence (ZI) and heuristic-belief-learning (HBL) value agents."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from agents.base import Action, AgentState, TradingAgent, buy_size, sell_size
from core.models import Quotes, Side
from simulation.kernel import NS_PER_SECOND
from simulation.messages import Message, QuoteRequest, QuoteResponse, Wakeup
from simulation.oracle import (
    AgentEstimate,
    bayes_observe,
    initial_estimate,
    prior_update,
    project,
)

VALUE_KINDS = ("ZI", "HBL")
HBL_GRID_PAD = 5


@dataclass(frozen=True)
class ValueConfig:
    kind: str = "ZI"
    r_max: float = 5.0
    lookback: int = 8
    unit: int = 100
    horizon_s: Optional[float] = None  # Defaults to the mean wakeup interval.
    eta: float = 1.0  # Accepted for configuration parity; not read by the decision rule.
    skip_without_surplus: bool = True  # False always submits the HBL argmax price.

    def __post_init__(self) -> None:
        if self.kind not in VALUE_KINDS:
            raise ValueError(f"Unknown value agent kind: {self.kind}")
        if self.r_max < 0:
            raise ValueError("r_max must be non-negative.")
        if self.lookback < 1:
            raise ValueError("lookback must be at least 1.")
        if self.unit <= 0:
            raise ValueError("unit must be positive.")


def hbl_exec_prob(
    trade_prices: Sequence[int],
    side: Side,
    price_grid: Sequence[int],
    lookback: int,
) -> np.ndarray:
    """Empirical execution probability of each grid price over the last trades.

    A buy at ``p`` counts trades at or below ``p``; a sell counts trades at or
    above it. Values are clipped to ``[1 / lookback, 1]``.
    """
    if len(trade_prices) < lookback:
        raise ValueError(f"Need {lookback} trades, got {len(trade_prices)}.")
    recent = np.asarray(trade_prices[-lookback:], dtype=float)
    grid = np.asarray(price_grid, dtype=float)
    if side is Side.BID:
        counts = (recent[None, :] <= grid[:, None]).sum(axis=1)
    else:
        counts = (recent[None, :] >= grid[:, None]).sum(axis=1)
    return np.clip(counts / lookback, 1.0 / lookback, 1.0)


def _zi_price(side: Side, projected: float, quotes: Quotes, surplus: float) -> int:
    if side is Side.BID:
        if projected - quotes.best_ask > surplus:
            return int(quotes.best_ask)
        return int(math.floor(projected - surplus))
    if quotes.best_bid - projected > surplus:
        return int(quotes.best_bid)
    return int(math.ceil(projected + surplus))


def _hbl_price(
    side: Side,
    projected: float,
    quotes: Quotes,
    trade_prices: Sequence[int],
    lookback: int,
    *,
    skip_without_surplus: bool = True,
) -> Optional[int]:
    grid = np.arange(max(1, quotes.best_bid - HBL_GRID_PAD), quotes.best_ask + HBL_GRID_PAD + 1)
    prob = hbl_exec_prob(trade_prices, side, grid, lookback)
    surplus = projected - grid if side is Side.BID else grid - projected
    expected = prob * surplus
    best = int(np.argmax(expected))
    if expected[best] <= 0 and skip_without_surplus:
        return None
    return int(grid[best])


def value_act(
    state: AgentState,
    cfg: ValueConfig,
    quotes: Quotes,
    projected: float,
    rng: np.random.Generator,
) -> Optional[Action]:
    """Draws the surplus and side, then prices a limit order (ZI or HBL rule)."""
    if not quotes.two_sided:
        return None
    surplus = rng.uniform(0.0, cfg.r_max)
    side = Side.BID if rng.random() < 0.5 else Side.ASK
    quantity = buy_size(state.holdings, cfg.unit) if side is Side.BID else sell_size(state.holdings, cfg.unit)

    if cfg.kind == "HBL" and len(state.trade_memory) >= cfg.lookback:
        price = _hbl_price(
            side, projected, quotes, state.trade_memory, cfg.lookback, skip_without_surplus=cfg.skip_without_surplus
        )
        if price is None:
            return None
    else:
        price = _zi_price(side, projected, quotes, surplus)
    return Action(side=side, quantity=quantity, price=max(1, price))


class ValueAgent(TradingAgent):
    """Observes the oracle on each wakeup and posts one limit order."""

    def __init__(
        self,
        agent_id: int,
        config: ValueConfig,
        *,
        mean_wakeup_s: float = 30.0,
        initial_cash: int = 0,
    ) -> None:
        super().__init__(agent_id, mean_wakeup_s=mean_wakeup_s, initial_cash=initial_cash)
        self.config = config
        self.kind = config.kind
        horizon_s = config.horizon_s if config.horizon_s is not None else mean_wakeup_s
        self.horizon_ns = int(horizon_s * NS_PER_SECOND)
        self.estimate: Optional[AgentEstimate] = None
        self._projected: Optional[float] = None

    def kernel_starting(self, start_time: int) -> None:
        oracle = self._kernel.oracle
        if oracle is None:
            raise RuntimeError("Value agents need a fundamental oracle.")
        self.estimate = initial_estimate(oracle.params, start_time)
        super().kernel_starting(start_time)

    def on_wakeup(self, payload: Wakeup, message: Message) -> None:
        self.cancel_all_orders()
        oracle = self._kernel.oracle
        observation = oracle.observe(self.now, self.rng)
        estimate = prior_update(self.estimate, oracle.params, self.now)
        self.estimate = bayes_observe(estimate, oracle.params, observation)
        projected = project(self.estimate, oracle.params, self.horizon_ns)
        self._projected = round(2.0 * projected) / 2.0
        self.send_to_exchange(QuoteRequest(n_levels=1, n_trades=self.config.lookback))

    def on_quote_response(self, payload: QuoteResponse, message: Message) -> None:
        self.observe_quotes(payload.quotes)
        self.state.trade_memory = payload.recent_trade_prices
        self.place(value_act(self.state, self.config, payload.quotes, self._projected, self.rng))
        self.record_account()
        self.schedule_next_wakeup()
