"""The background trader agent and the pre-open book population."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Any, Deque, Dict, List, Mapping, Optional, Set, Tuple

import numpy as np

from background.intensity import (
    CTLSTMModel,
    CTLSTMParams,
    HawkesModel,
    HawkesParams,
    IntensityModel,
    default_hawkes_params,
)
from background.memory import DEFAULT_MEMORY_LENGTH, BTMemory
from background.order_stats import (
    ActionKind,
    OrderAction,
    OrderStatsParams,
    attach_order_stats,
    in_window,
)
from background.thinning import ThinningDiagnostics, thinning_sample
from core.model_registry import ModelRegistry
from core.models import DepthSnapshot, EventType, Order, Side
from matching.order_book import LimitOrderBook
from simulation.agent import EXCHANGE_ID, Agent
from simulation.kernel import NS_PER_SECOND
from simulation.messages import (
    CancelOrder,
    MarketDataUpdate,
    Message,
    OrderAccepted,
    OrderCancelled,
    OrderExecuted,
    QuoteRequest,
    QuoteResponse,
    SubmitLimit,
    SubmitMarket,
    Wakeup,
)

LOGGER = logging.getLogger(__name__)

BACKGROUND_AGENT_ID = 1
INTENSITY_MODELS = ModelRegistry({"hawkes": HawkesModel, "ctlstm": CTLSTMModel})

# (side, price, remaining) of every resting BT order.
BTOrderBook = Dict[int, Tuple[Side, int, int]]


@dataclass(frozen=True)
class PreOpenConfig:
    levels: int = 5
    order_volume: Tuple[int, int] = (100, 1_000)
    level_target: Tuple[int, int] = (15_000, 20_000)
    spacing_ns: int = 1_000

    def __post_init__(self) -> None:
        lo, hi = self.order_volume
        if not 0 < lo <= hi:
            raise ValueError("order_volume must be a positive (low, high) pair.")
        if not 0 < self.level_target[0] <= self.level_target[1]:
            raise ValueError("level_target must be a positive (low, high) pair.")
        if self.levels < 1 or self.spacing_ns < 1:
            raise ValueError("levels and spacing_ns must be positive.")


@dataclass(frozen=True)
class BackgroundConfig:
    """Background trader settings; ``reference_price`` seeds an empty book."""

    intensity: str = "hawkes"
    hawkes: Optional[HawkesParams] = None
    ctlstm: Optional[CTLSTMParams] = None
    order_stats: OrderStatsParams = field(default_factory=OrderStatsParams)
    flow_impact: bool = True
    memory_length: int = DEFAULT_MEMORY_LENGTH
    reference_price: int = 1_000
    pre_open: PreOpenConfig = field(default_factory=PreOpenConfig)
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.intensity not in INTENSITY_MODELS:
            raise ValueError(f"Unknown intensity model: {self.intensity}")
        if self.intensity == "ctlstm" and self.ctlstm is None:
            raise ValueError("The ctlstm intensity needs CT-LSTM parameters.")
        if self.memory_length < 1:
            raise ValueError("memory_length must be at least 1.")
        if self.reference_price < 2:
            raise ValueError("reference_price must be at least 2 ticks.")

    def build_model(self) -> IntensityModel:
        if self.intensity == "ctlstm":
            return INTENSITY_MODELS.get("ctlstm")(self.ctlstm)
        return INTENSITY_MODELS.get("hawkes")(self.hawkes or default_hawkes_params())


@dataclass
class BTDiagnostics:
    thinning: ThinningDiagnostics = field(default_factory=ThinningDiagnostics)
    samples: int = 0
    fired: int = 0
    abandoned: int = 0
    limit_orders: int = 0
    market_orders: int = 0
    cancellations: int = 0
    silent_cancels: int = 0
    emergency_refills: int = 0
    external_events_seen: int = 0

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["thinning"]["acceptance_rate"] = self.thinning.acceptance_rate
        return payload


def initialize_book(
    book: LimitOrderBook,
    rng: np.random.Generator,
    *,
    start_time: int,
    best_bid: int,
    agent_id: int = BACKGROUND_AGENT_ID,
    config: Optional[PreOpenConfig] = None,
) -> int:
    """Fills ``levels`` adjacent price levels per side straight into the book.

    Each level receives orders of volume ``U{order_volume}`` until its total
    reaches a ``U[level_target]`` draw. Asks start one tick above ``best_bid``
    so the opening spread is one tick. Returns the number of orders placed.
    """
    cfg = config or PreOpenConfig()
    if best_bid - cfg.levels + 1 < 1:
        raise ValueError("best_bid is too low for the requested number of levels.")
    time = start_time
    placed = 0
    for level in range(cfg.levels):
        for side, price in ((Side.BID, best_bid - level), (Side.ASK, best_bid + 1 + level)):
            target = rng.uniform(*cfg.level_target)
            total = 0
            while total < target:
                volume = int(rng.integers(cfg.order_volume[0], cfg.order_volume[1] + 1))
                order = Order(
                    order_id=book.next_order_id(),
                    agent_id=agent_id,
                    side=side,
                    price=price,
                    quantity=volume,
                    submit_time=time,
                )
                book.submit_limit(order, time)
                total += volume
                placed += 1
                time += cfg.spacing_ns
    LOGGER.info("Pre-open population placed %d orders around %d.", placed, best_bid)
    return placed


def level_boundary_update(
    bt_orders: Mapping[int, Tuple[Side, int, int]],
    old_snapshot: Optional[DepthSnapshot],
    new_snapshot: DepthSnapshot,
    queue: Deque[int],
    queued: Optional[Set[int]] = None,
) -> List[int]:
    """Queues BT orders that now rest behind a full five-level window.

    Levels entering the window need no bookkeeping since snapshots carry their
    true resting volume. Returns the newly queued order ids, oldest first.
    """
    members = set(queue) if queued is None else queued
    added: List[int] = []
    for order_id in sorted(bt_orders):
        side, price, _ = bt_orders[order_id]
        if order_id in members or in_window(new_snapshot, side, price):
            continue
        queue.append(order_id)
        members.add(order_id)
        added.append(order_id)
    if added and old_snapshot is not None:
        LOGGER.debug(
            "Window moved (ask %s->%s, bid %s->%s); %d orders queued for silent cancel.",
            old_snapshot.ask_prices[-1],
            new_snapshot.ask_prices[-1],
            old_snapshot.bid_prices[-1],
            new_snapshot.bid_prices[-1],
            len(added),
        )
    return added


class BackgroundTrader(Agent):
    """Samples the next book event from an intensity model and acts it out.

    Each accepted book update (its own, or any update when flow impact is on)
    is appended to memory and triggers a fresh sample; a pending sample is
    abandoned through its wakeup token.
    """

    def __init__(self, config: BackgroundConfig, *, agent_id: int = BACKGROUND_AGENT_ID) -> None:
        super().__init__(agent_id, name="BackgroundTrader")
        self.config = config
        self.model = config.build_model()
        self.model_state = self.model.new_state()
        self.memory = BTMemory(config.memory_length)
        self.orders: BTOrderBook = {}
        self.silent_queue: Deque[int] = deque()
        self._queued: Set[int] = set()
        self.snapshot: Optional[DepthSnapshot] = None
        self.diagnostics = BTDiagnostics()
        self.pending: Optional[Tuple[int, int]] = None
        self._token = 0
        self.last_action: Optional[OrderAction] = None

    # ------------------------------------------------------------- lifecycle
    def kernel_starting(self, start_time: int) -> None:
        exchange = self._kernel.agent(EXCHANGE_ID)
        for order in exchange.book.resting_orders():
            if order.agent_id == self.agent_id:
                self.orders[order.order_id] = (order.side, order.price, order.remaining)
        self.wakeup_at(max(start_time, self._kernel.market_open), reason="open")

    def kernel_stopping(self, end_time: int) -> None:
        self._logger.info(
            "BT fired %d actions (%d abandoned samples, %d refills, %d silent cancels).",
            self.diagnostics.fired,
            self.diagnostics.abandoned,
            self.diagnostics.emergency_refills,
            self.diagnostics.silent_cancels,
        )

    def _seconds(self, time_ns: int) -> float:
        return (time_ns - self._kernel.market_open) / NS_PER_SECOND

    # -------------------------------------------------------------- handlers
    def on_wakeup(self, payload: Wakeup, message: Message) -> None:
        if payload.reason == "open":
            self.send_to_exchange(QuoteRequest(n_levels=5))
        elif payload.token != self._token:
            return
        elif payload.reason == "fire":
            self._fire()
        elif payload.reason == "resume" and self.pending is None:
            self.bt_step()

    def on_quote_response(self, payload: QuoteResponse, message: Message) -> None:
        self._refresh_snapshot(payload.snapshot)
        self.bt_step()

    def on_market_data(self, payload: MarketDataUpdate, message: Message) -> None:
        self._refresh_snapshot(payload.snapshot)
        event = payload.event
        if event is None:
            return
        own = event.agent_id == self.agent_id
        if payload.silent:
            if own and self.pending is None:
                self.bt_step()
            return
        if not own:
            self.diagnostics.external_events_seen += 1
        if own or self.config.flow_impact:
            self.observe_event(event.event_type, event.time, payload.snapshot)
            self.bt_step()

    def on_order_accepted(self, payload: OrderAccepted, message: Message) -> None:
        if payload.remaining > 0:
            self.orders[payload.order_id] = (payload.side, payload.price, payload.remaining)

    def on_order_executed(self, payload: OrderExecuted, message: Message) -> None:
        if not payload.is_maker or payload.order_id not in self.orders:
            return
        side, price, remaining = self.orders[payload.order_id]
        remaining -= payload.volume
        if remaining > 0:
            self.orders[payload.order_id] = (side, price, remaining)
        else:
            del self.orders[payload.order_id]

    def on_order_cancelled(self, payload: OrderCancelled, message: Message) -> None:
        self.orders.pop(payload.order_id, None)

    # ------------------------------------------------------------ core step
    def observe_event(self, event_type: EventType, time_ns: int, snapshot: Optional[DepthSnapshot]) -> None:
        """Appends one book event to memory and folds it into the model state."""
        t = max(self._seconds(time_ns), self.memory.last_time)
        self.memory.append(event_type, t, snapshot)
        self.model_state = self.model.update(self.model_state, int(event_type), t, snapshot)

    def _refresh_snapshot(self, snapshot: DepthSnapshot) -> None:
        level_boundary_update(self.orders, self.snapshot, snapshot, self.silent_queue, self._queued)
        self.snapshot = snapshot

    def bt_step(self) -> Optional[Tuple[int, int]]:
        """Samples the next ``(event_type, time_ns)`` from the intensity and schedules it."""
        self._token += 1
        if self.pending is not None:
            self.diagnostics.abandoned += 1
            self.pending = None
        t_prev = max(self._seconds(self.now), self.memory.last_time)
        event_type, t_next = thinning_sample(
            self.model, self.model_state, t_prev, self.rng, diagnostics=self.diagnostics.thinning
        )
        self.diagnostics.samples += 1
        fire_at = max(self.now + 1, self._kernel.market_open + int(math.ceil(t_next * NS_PER_SECOND)))
        if fire_at >= self._kernel.market_close:
            return None
        self.pending = (event_type, fire_at)
        self.wakeup_at(fire_at, reason="fire", token=self._token)
        return self.pending

    def _fire(self) -> None:
        event_type, _ = self.pending
        self.pending = None
        self.diagnostics.fired += 1
        self._pop_silent_cancel()
        action = attach_order_stats(
            event_type,
            self.snapshot,
            self.config.order_stats,
            self.rng,
            bt_orders=self.orders,
            fallback_price=self.config.reference_price,
        )
        self._execute(action)
        latency = self._kernel.latency.delay(self.agent_id, EXCHANGE_ID)
        self.wakeup_at(self.now + 2 * latency + 1, reason="resume", token=self._token)

    def _pop_silent_cancel(self) -> None:
        while self.silent_queue:
            order_id = self.silent_queue.popleft()
            self._queued.discard(order_id)
            entry = self.orders.get(order_id)
            if entry is None or in_window(self.snapshot, entry[0], entry[1]):
                continue
            self.send_to_exchange(CancelOrder(order_id=order_id, silent=True))
            self.diagnostics.silent_cancels += 1
            return

    def _execute(self, action: OrderAction) -> None:
        self.last_action = action
        if action.kind is ActionKind.MARKET:
            self.diagnostics.market_orders += 1
            self.send_to_exchange(SubmitMarket(side=action.side, quantity=action.quantity, tag="bt"))
        elif action.kind is ActionKind.CANCEL:
            self.diagnostics.cancellations += 1
            self.send_to_exchange(CancelOrder(order_id=action.order_id))
        else:
            if action.kind is ActionKind.REFILL:
                self.diagnostics.emergency_refills += 1
                self._logger.warning(
                    "Emergency refill: %s %d @ %d.", action.side.value, action.quantity, action.price
                )
            else:
                self.diagnostics.limit_orders += 1
            self.send_to_exchange(
                SubmitLimit(side=action.side, price=action.price, quantity=action.quantity, tag=action.kind.value)
            )
