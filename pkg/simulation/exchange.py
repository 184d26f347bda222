"""Exchange agent: owns the book, notifies owners and broadcasts depth."""

from __future__ import annotations

import bisect
from typing import List, Optional, Sequence

from core.models import EventRecord, Order, Trade
from matching.order_book import LimitOrderBook, OrderRejectedError
from simulation.agent import EXCHANGE_ID, Agent
from simulation.messages import (
    CancelOrder,
    MarketDataUpdate,
    Message,
    OrderAccepted,
    OrderCancelled,
    OrderExecuted,
    Payload,
    QuoteRequest,
    QuoteResponse,
    SubmitLimit,
    SubmitMarket,
    VolumeRequest,
    VolumeResponse,
)


class ExchangeAgent(Agent):
    """Single-venue exchange; always registered as agent 0."""

    def __init__(self, book: Optional[LimitOrderBook] = None, *, broadcast_levels: int = 5) -> None:
        super().__init__(EXCHANGE_ID, name="Exchange")
        self.book = book or LimitOrderBook()
        self.broadcast_levels = broadcast_levels
        self._subscribers: List[int] = []
        self._trade_times: List[int] = []
        self._trade_volume_cumsum: List[int] = []
        self.broadcasts_sent = 0
        self.rejections = 0

    def subscribe(self, agent_id: int) -> None:
        """Subscribes an agent to market-data broadcasts."""
        if agent_id not in self._subscribers:
            self._subscribers.append(agent_id)

    @property
    def subscribers(self) -> Sequence[int]:
        return tuple(self._subscribers)

    # --------------------------------------------------------------- orders
    def on_submit_limit(self, payload: SubmitLimit, message: Message) -> None:
        order = Order(
            order_id=self.book.next_order_id(),
            agent_id=message.sender,
            side=payload.side,
            price=payload.price,
            quantity=payload.quantity,
            submit_time=self.now,
        )
        try:
            result = self.book.submit_limit(order, self.now)
        except OrderRejectedError as error:
            self._reject(message, error)
            return
        resting = result.resting.remaining if result.resting is not None else 0
        self._notify(
            message.sender,
            OrderAccepted(
                order_id=order.order_id,
                side=order.side,
                price=order.price,
                quantity=order.quantity,
                remaining=resting,
                tag=payload.tag,
            ),
        )
        self._settle(result.trades)
        self.broadcast_market_data(result.event)

    def on_submit_market(self, payload: SubmitMarket, message: Message) -> None:
        try:
            result = self.book.submit_market(
                payload.side, payload.quantity, self.now, agent_id=message.sender
            )
        except OrderRejectedError as error:
            self._reject(message, error)
            return
        if result.liquidity_exhausted:
            self._logger.debug(
                "Market order from %d filled %d of %d.",
                message.sender,
                result.executed_volume,
                payload.quantity,
            )
        self._settle(result.trades)
        if result.event is not None:
            self.broadcast_market_data(result.event)

    def on_cancel_order(self, payload: CancelOrder, message: Message) -> None:
        order = self.book.get_order(payload.order_id)
        if order is None or order.agent_id != message.sender:
            self._logger.debug("Cancel of non-resting order %d ignored.", payload.order_id)
            return
        volume = self.book.cancel(payload.order_id, self.now)
        if volume is None:  # pragma: no cover - guarded above
            return
        self._notify(
            message.sender,
            OrderCancelled(order_id=order.order_id, side=order.side, price=order.price, volume=volume),
        )
        self.broadcast_market_data(self.book.event_log[-1], silent=payload.silent)

    # -------------------------------------------------------------- queries
    def on_quote_request(self, payload: QuoteRequest, message: Message) -> None:
        trades = self.book.trades[-payload.n_trades :] if payload.n_trades > 0 else []
        self._notify(
            message.sender,
            QuoteResponse(
                quotes=self.book.quotes(),
                snapshot=self.book.depth_snapshot(payload.n_levels),
                recent_trade_prices=tuple(trade.price for trade in trades),
                last_trade=self.book.last_trade,
            ),
        )

    def on_volume_request(self, payload: VolumeRequest, message: Message) -> None:
        self._notify(
            message.sender,
            VolumeResponse(
                lookback_ns=payload.lookback_ns,
                volume=self.traded_volume(self.now - payload.lookback_ns, self.now),
            ),
        )

    def traded_volume(self, start: int, end: int) -> int:
        """Returns the volume traded in the half-open interval (start, end]."""
        lo = bisect.bisect_right(self._trade_times, start)
        hi = bisect.bisect_right(self._trade_times, end)
        if hi <= lo:
            return 0
        before = self._trade_volume_cumsum[lo - 1] if lo > 0 else 0
        return self._trade_volume_cumsum[hi - 1] - before

    # ------------------------------------------------------------- internal
    def _settle(self, trades: Sequence[Trade]) -> None:
        for trade in trades:
            running = self._trade_volume_cumsum[-1] if self._trade_volume_cumsum else 0
            self._trade_times.append(trade.time)
            self._trade_volume_cumsum.append(running + trade.volume)
            self._notify(
                trade.maker_agent_id,
                OrderExecuted(
                    order_id=trade.maker_order_id,
                    side=trade.maker_side,
                    price=trade.price,
                    volume=trade.volume,
                    is_maker=True,
                ),
            )
            self._notify(
                trade.taker_agent_id,
                OrderExecuted(
                    order_id=trade.taker_order_id,
                    side=trade.maker_side.opposite,
                    price=trade.price,
                    volume=trade.volume,
                    is_maker=False,
                ),
            )

    def broadcast_market_data(self, event: EventRecord, *, silent: bool = False) -> None:
        """Sends the post-event depth to every subscriber; nothing goes out before the open."""
        if self.now < self._kernel.market_open:
            return
        update = MarketDataUpdate(
            snapshot=self.book.depth_snapshot(self.broadcast_levels),
            last_trade=self.book.last_trade,
            event=event,
            silent=silent,
        )
        for agent_id in self._subscribers:
            self.send(agent_id, update)
            self.broadcasts_sent += 1

    def _notify(self, agent_id: int, payload: Payload) -> None:
        if agent_id == self.agent_id or not self._kernel.has_agent(agent_id):
            return
        self.send(agent_id, payload)

    def _reject(self, message: Message, error: OrderRejectedError) -> None:
        self.rejections += 1
        self._logger.warning("Rejected %s: %s", message.describe(), error)
