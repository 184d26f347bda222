"""Momentum (MM) and mean-reversion (MR) trend agents."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import islice
from typing import Optional

import numpy as np

from agents.base import Action, AgentState, TradingAgent, buy_size, sell_size
from core.models import Quotes, Side
from simulation.messages import Message, QuoteRequest, QuoteResponse, Wakeup

TREND_KINDS = ("MM", "MR")


@dataclass(frozen=True)
class TrendConfig:
    kind: str = "MM"
    l1: int = 20
    l2: int = 50
    unit: int = 100

    def __post_init__(self) -> None:
        if self.kind not in TREND_KINDS:
            raise ValueError(f"Unknown trend agent kind: {self.kind}")
        if not self.l2 > self.l1 >= 1:
            raise ValueError("Trend windows must satisfy l2 > l1 >= 1.")
        if self.unit <= 0:
            raise ValueError("unit must be positive.")


def _moving_average(values: deque, window: int) -> float:
    start = len(values) - window
    return float(np.mean(list(islice(values, start, None))))


def trend_act(state: AgentState, cfg: TrendConfig, quotes: Quotes) -> Optional[Action]:
    """Appends the mid and returns a market order once both averages exist."""
    if not quotes.two_sided:
        return None
    state.mid_list.append(quotes.mid)
    if len(state.mid_list) < cfg.l2:
        return None
    short = _moving_average(state.mid_list, cfg.l1)
    long = _moving_average(state.mid_list, cfg.l2)
    rising = short > long
    buy = rising if cfg.kind == "MM" else not rising
    if buy:
        return Action(side=Side.BID, quantity=buy_size(state.holdings, cfg.unit))
    return Action(side=Side.ASK, quantity=sell_size(state.holdings, cfg.unit))


class TrendAgent(TradingAgent):
    """Cancels, asks for quotes, then trades on the moving-average crossover."""

    def __init__(
        self,
        agent_id: int,
        config: TrendConfig,
        *,
        mean_wakeup_s: float = 30.0,
        initial_cash: int = 0,
    ) -> None:
        super().__init__(agent_id, mean_wakeup_s=mean_wakeup_s, initial_cash=initial_cash)
        self.config = config
        self.kind = config.kind
        self.state.mid_list = deque(maxlen=config.l2)

    def on_wakeup(self, payload: Wakeup, message: Message) -> None:
        self.cancel_all_orders()
        self.send_to_exchange(QuoteRequest(n_levels=1))

    def on_quote_response(self, payload: QuoteResponse, message: Message) -> None:
        self.observe_quotes(payload.quotes)
        self.place(trend_act(self.state, self.config, payload.quotes))
        self.record_account()
        self.schedule_next_wakeup()
