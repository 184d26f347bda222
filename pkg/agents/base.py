"""Trading agent base: accounting, open orders and the Poisson wakeup scheme."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple

from core.models import Quotes, Side
from simulation.agent import Agent
from simulation.kernel import NS_PER_SECOND
from simulation.messages import (
    CancelOrder,
    Message,
    OrderAccepted,
    OrderCancelled,
    OrderExecuted,
    SubmitLimit,
    SubmitMarket,
)


@dataclass
class AgentState:
    """Holdings, cash and memory of one strategic agent."""

    holdings: int = 0
    cash: int = 0
    initial_cash: int = 0
    open_orders: Dict[int, Tuple[Side, int, int]] = field(default_factory=dict)
    mid_list: Deque[float] = field(default_factory=deque)
    trade_memory: Tuple[int, ...] = ()

    def apply_fill(self, side: Side, price: int, volume: int) -> None:
        """Buys add holdings and spend cash; sells do the opposite."""
        self.holdings += side.sign * volume
        self.cash -= side.sign * price * volume

    def mark_to_market(self, mid: Optional[float]) -> float:
        """Returns cash + holdings * mid - initial cash."""
        value = self.cash - self.initial_cash
        if mid is not None:
            value += self.holdings * mid
        return float(value)


@dataclass(frozen=True)
class Action:
    """An order an agent decided to place."""

    side: Side
    quantity: int
    price: Optional[int] = None

    @property
    def is_market(self) -> bool:
        return self.price is None


@dataclass(frozen=True)
class Fill:
    time: int
    side: Side
    price: int
    volume: int


def buy_size(holdings: int, unit: int) -> int:
    """Closes a short larger than ``unit``, otherwise trades ``unit``."""
    return max(-holdings, unit)


def sell_size(holdings: int, unit: int) -> int:
    return max(holdings, unit)


class TradingAgent(Agent):
    """Common plumbing for the strategic agents."""

    kind = "agent"

    def __init__(
        self,
        agent_id: int,
        *,
        mean_wakeup_s: float = 30.0,
        initial_cash: int = 0,
        name: Optional[str] = None,
    ) -> None:
        super().__init__(agent_id, name=name)
        if mean_wakeup_s <= 0:
            raise ValueError("mean_wakeup_s must be positive.")
        self.mean_wakeup_ns = int(mean_wakeup_s * NS_PER_SECOND)
        self.state = AgentState(cash=initial_cash, initial_cash=initial_cash)
        self.fills: List[Fill] = []
        self.account_history: List[Tuple[int, int, int, float]] = []
        self.decisions: List[Tuple[int, Optional[Action]]] = []
        self.last_mid: Optional[float] = None

    # -------------------------------------------------------------- wakeups
    def kernel_starting(self, start_time: int) -> None:
        first = max(start_time, self._kernel.market_open)
        self.wakeup_at(first + self._draw_interval())

    def schedule_next_wakeup(self) -> None:
        self.wakeup_at(self.now + self._draw_interval())

    def _draw_interval(self) -> int:
        return max(1, int(self.rng.exponential(self.mean_wakeup_ns)))

    # --------------------------------------------------------------- orders
    def cancel_all_orders(self) -> None:
        for order_id in sorted(self.state.open_orders):
            self.send_to_exchange(CancelOrder(order_id=order_id))

    def place(self, action: Optional[Action]) -> None:
        """Sends the decided action (if any) and records the decision."""
        self.decisions.append((self.now, action))
        if action is None or action.quantity <= 0:
            return
        if action.is_market:
            self.send_to_exchange(SubmitMarket(side=action.side, quantity=action.quantity))
        else:
            self.send_to_exchange(
                SubmitLimit(side=action.side, price=max(1, int(action.price)), quantity=action.quantity)
            )

    def observe_quotes(self, quotes: Quotes) -> None:
        if quotes.two_sided:
            self.last_mid = quotes.mid

    # ----------------------------------------------------- order callbacks
    def on_order_accepted(self, payload: OrderAccepted, message: Message) -> None:
        if payload.remaining > 0:
            self.state.open_orders[payload.order_id] = (payload.side, payload.price, payload.remaining)

    def on_order_cancelled(self, payload: OrderCancelled, message: Message) -> None:
        self.state.open_orders.pop(payload.order_id, None)

    def on_order_executed(self, payload: OrderExecuted, message: Message) -> None:
        self.state.apply_fill(payload.side, payload.price, payload.volume)
        self.fills.append(Fill(self.now, payload.side, payload.price, payload.volume))
        if payload.is_maker and payload.order_id in self.state.open_orders:
            side, price, remaining = self.state.open_orders[payload.order_id]
            remaining -= payload.volume
            if remaining > 0:
                self.state.open_orders[payload.order_id] = (side, price, remaining)
            else:
                del self.state.open_orders[payload.order_id]
        self.record_account()

    def record_account(self) -> None:
        self.account_history.append(
            (
                self.now,
                self.state.holdings,
                self.state.cash,
                self.state.mark_to_market(self.last_mid),
            )
        )
