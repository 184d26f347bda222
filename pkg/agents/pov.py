"""Percent-of-volume execution agent used to probe price impact."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

from agents.base import Action, TradingAgent
from core.models import Side
from simulation.kernel import NS_PER_SECOND
from simulation.messages import Message, VolumeRequest, VolumeResponse, Wakeup


@dataclass(frozen=True)
class POVConfig:
    """``start_s`` is measured from the market open."""

    side: Side = Side.BID
    lam: float = 0.1
    window_s: float = 600.0
    start_s: float = 1800.0
    child_interval_s: float = 60.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1].")
        if self.window_s <= 0 or self.child_interval_s <= 0:
            raise ValueError("window_s and child_interval_s must be positive.")
        if self.start_s < 0:
            raise ValueError("start_s must be non-negative.")

    @property
    def n_children(self) -> int:
        return max(1, int(self.window_s // self.child_interval_s))


@dataclass
class POVState:
    plan: Optional[List[int]] = None
    children_sent: int = 0
    target: int = 0

    @property
    def remaining(self) -> int:
        if self.plan is None:
            return 0
        return sum(self.plan[self.children_sent :])


def pov_child_sizes(cfg: POVConfig, market_volume: int) -> List[int]:
    """Splits V = floor(lam * M) into equal child orders, remainder to the earliest.

    The floor tolerates float error, so lam=0.29 of 100 shares is 29.
    """
    target = math.floor(round(cfg.lam * market_volume, 6))
    if target <= 0:
        return []
    base, extra = divmod(target, cfg.n_children)
    sizes = [base + (1 if index < extra else 0) for index in range(cfg.n_children)]
    return [size for size in sizes if size > 0]


def pov_act(
    state: POVState,
    cfg: POVConfig,
    market_volume: int,
    elapsed_s: float,
) -> Optional[Action]:
    """Returns the next child market order, or None outside the window or when done."""
    if not 0.0 <= elapsed_s < cfg.window_s:
        return None
    if state.plan is None:
        state.plan = pov_child_sizes(cfg, market_volume)
        state.target = sum(state.plan)
    if state.children_sent >= len(state.plan):
        return None
    size = state.plan[state.children_sent]
    state.children_sent += 1
    return Action(side=cfg.side, quantity=size)


class POVAgent(TradingAgent):
    """Measures trailing volume at the window start, then trades child orders."""

    kind = "POV"

    def __init__(self, agent_id: int, config: POVConfig, *, initial_cash: int = 0) -> None:
        super().__init__(agent_id, initial_cash=initial_cash)
        self.config = config
        self.pov_state = POVState()
        self.market_volume: Optional[int] = None
        self._window_ns = int(config.window_s * NS_PER_SECOND)
        self._interval_ns = int(config.child_interval_s * NS_PER_SECOND)

    @property
    def start_time(self) -> int:
        return self._kernel.market_open + int(self.config.start_s * NS_PER_SECOND)

    def kernel_starting(self, start_time: int) -> None:
        self.wakeup_at(max(start_time, self.start_time), reason="start")

    def on_wakeup(self, payload: Wakeup, message: Message) -> None:
        if payload.reason == "start":
            self.send_to_exchange(VolumeRequest(lookback_ns=self._window_ns))
            return
        self._trade_child()

    def on_volume_response(self, payload: VolumeResponse, message: Message) -> None:
        self.market_volume = payload.volume
        self._trade_child()
        plan = self.pov_state.plan or []
        self._logger.info(
            "POV %s lam=%.2f: M=%d, V=%d in %d children.",
            self.config.side.value,
            self.config.lam,
            payload.volume,
            self.pov_state.target,
            len(plan),
        )
        for index in range(1, len(plan)):
            self.wakeup_at(self.start_time + index * self._interval_ns, reason="child")

    def _trade_child(self) -> None:
        elapsed_s = (self.now - self.start_time) / NS_PER_SECOND
        action = pov_act(self.pov_state, self.config, self.market_volume or 0, elapsed_s)
        self.place(action)
        self.record_account()
