"""Limit order book with price-time priority and order indexing."""

from __future__ import annotations

import logging
import operator
from collections import deque
from dataclasses import dataclass
from itertools import islice
from typing import Deque, Dict, Iterator, List, Optional, Tuple

from sortedcontainers import SortedDict

from core.models import (
    DepthSnapshot,
    EventRecord,
    EventType,
    JournalRow,
    MessageKind,
    Order,
    Quotes,
    Side,
    Trade,
)


class OrderRejectedError(ValueError):
    """Raised when the book refuses an order or an out-of-order timestamp."""


@dataclass(frozen=True)
class SubmitResult:
    """Outcome of a limit order submission."""

    trades: List[Trade]
    resting: Optional[Order]
    event: EventRecord


@dataclass(frozen=True)
class MarketResult:
    """Outcome of a market order; residual volume is never rested."""

    trades: List[Trade]
    liquidity_exhausted: bool
    event: Optional[EventRecord]

    @property
    def executed_volume(self) -> int:
        """Returns the total filled volume."""
        return sum(trade.volume for trade in self.trades)


class LimitOrderBook:
    """Two FIFO price ladders plus an append-only event journal.

    Prices are integer ticks. Every accepted action appends to ``event_log``
    (submissions and cancellations), ``trades`` (fills) and ``journal`` (the
    LOBSTER-style message rows). When ``record_depth`` is set the book also
    keeps the ``n_levels`` snapshot taken after every journal row.
    """

    def __init__(self, *, n_levels: int = 5, record_depth: bool = True) -> None:
        if n_levels < 1:
            raise ValueError("n_levels must be at least 1.")
        self._ladders: Dict[Side, SortedDict] = {
            Side.BID: SortedDict(operator.neg),
            Side.ASK: SortedDict(),
        }
        self._level_volume: Dict[Side, Dict[int, int]] = {Side.BID: {}, Side.ASK: {}}
        # Cancelled entries still sitting inside a level queue; the queue head is always live.
        self._dead: Dict[Side, Dict[int, int]] = {Side.BID: {}, Side.ASK: {}}
        self._orders: Dict[int, Order] = {}
        self._last_order_id = 0
        self._last_time: Optional[int] = None
        self.n_levels = n_levels
        self.record_depth = record_depth
        self.last_trade: Optional[Tuple[int, int, int]] = None
        self.event_log: List[EventRecord] = []
        self.trades: List[Trade] = []
        self.journal: List[JournalRow] = []
        self.depth_log: List[Tuple[int, ...]] = []
        self._logger = logging.getLogger(self.__class__.__name__)

    # ------------------------------------------------------------------ ids
    def next_order_id(self) -> int:
        """Returns the next unused order id."""
        return self._last_order_id + 1

    # ------------------------------------------------------------ operations
    def submit_limit(self, order: Order, time: int) -> SubmitResult:
        """Matches the marketable part of ``order`` and rests the remainder."""
        if order.quantity <= 0:
            raise OrderRejectedError(f"Order {order.order_id} has non-positive quantity.")
        if order.price < 1:
            raise OrderRejectedError(f"Order {order.order_id} has price below one tick.")
        self._check_time(time)
        self._claim_order_id(order.order_id)
        self._last_time = time

        opposite_best = self.best_price(order.side.opposite)
        marketable = opposite_best is not None and self._crosses(
            order.side, order.price, opposite_best
        )
        order.submit_time = time
        order.remaining = order.quantity
        trades = self._match(
            taker_side=order.side,
            limit_price=order.price,
            volume=order.quantity,
            time=time,
            taker_order_id=order.order_id,
            taker_agent_id=order.agent_id,
        )
        order.remaining = order.quantity - sum(trade.volume for trade in trades)

        resting: Optional[Order] = None
        if order.remaining > 0:
            self._rest(order)
            resting = order

        event = EventRecord(
            time=time,
            event_type=EventType.of(order.side, submission=True),
            price=order.price,
            volume=order.quantity,
            order_id=order.order_id,
            is_marketable=marketable,
            agent_id=order.agent_id,
        )
        self.event_log.append(event)
        self._journal(
            JournalRow(
                time=time,
                kind=MessageKind.SUBMISSION,
                order_id=order.order_id,
                volume=order.quantity,
                price=order.price,
                side=order.side,
            )
        )
        return SubmitResult(trades=trades, resting=resting, event=event)

    def submit_market(
        self,
        side: Side,
        volume: int,
        time: int,
        *,
        agent_id: int = -1,
        order_id: Optional[int] = None,
    ) -> MarketResult:
        """Consumes opposite liquidity level by level; residual volume is dropped."""
        if volume <= 0:
            raise OrderRejectedError("Market order volume must be positive.")
        order_id = self.next_order_id() if order_id is None else order_id
        self._check_time(time)
        self._claim_order_id(order_id)
        self._last_time = time

        if self.best_price(side.opposite) is None:
            self._logger.debug(
                "Market %s order %d found no liquidity at %d.", side.value, order_id, time
            )
            return MarketResult(trades=[], liquidity_exhausted=True, event=None)

        trades = self._match(
            taker_side=side,
            limit_price=None,
            volume=volume,
            time=time,
            taker_order_id=order_id,
            taker_agent_id=agent_id,
        )
        executed = sum(trade.volume for trade in trades)
        event = EventRecord(
            time=time,
            event_type=EventType.of(side, submission=True),
            price=trades[-1].price,
            volume=executed,
            order_id=order_id,
            is_marketable=True,
            agent_id=agent_id,
        )
        self.event_log.append(event)
        self._journal(
            JournalRow(
                time=time,
                kind=MessageKind.SUBMISSION,
                order_id=order_id,
                volume=executed,
                price=trades[-1].price,
                side=side,
            )
        )
        return MarketResult(
            trades=trades,
            liquidity_exhausted=executed < volume,
            event=event,
        )

    def cancel(self, order_id: int, time: int) -> Optional[int]:
        """Removes a resting order; returns its cancelled volume, or None if not resting."""
        order = self._orders.get(order_id)
        if order is None:
            return None
        self._check_time(time)
        self._last_time = time
        cancelled = order.remaining
        order.remaining = 0
        del self._orders[order_id]
        self._adjust_level(order.side, order.price, -cancelled)
        if order.price in self._level_volume[order.side]:
            self._bury(order.side, order.price)
        else:
            del self._ladders[order.side][order.price]
            self._dead[order.side].pop(order.price, None)
        self.event_log.append(
            EventRecord(
                time=time,
                event_type=EventType.of(order.side, submission=False),
                price=order.price,
                volume=cancelled,
                order_id=order_id,
                agent_id=order.agent_id,
            )
        )
        self._journal(
            JournalRow(
                time=time,
                kind=MessageKind.CANCELLATION,
                order_id=order_id,
                volume=cancelled,
                price=order.price,
                side=order.side,
            )
        )
        return cancelled

    def depth_snapshot(self, n_levels: Optional[int] = None) -> DepthSnapshot:
        """Returns aggregated volumes for the best ``n_levels`` prices per side."""
        n_levels = self.n_levels if n_levels is None else n_levels
        if n_levels < 1:
            raise ValueError("n_levels must be at least 1.")
        sides = {}
        for side in (Side.ASK, Side.BID):
            prices: List[Optional[int]] = list(islice(self._ladders[side].keys(), n_levels))
            volumes = [self._level_volume[side][price] for price in prices]  # type: ignore[index]
            missing = n_levels - len(prices)
            prices.extend([None] * missing)
            volumes.extend([0] * missing)
            sides[side] = (tuple(prices), tuple(volumes))
        return DepthSnapshot(
            ask_prices=sides[Side.ASK][0],
            ask_volumes=sides[Side.ASK][1],
            bid_prices=sides[Side.BID][0],
            bid_volumes=sides[Side.BID][1],
        )

    def quotes(self) -> Quotes:
        """Returns the best ask and best bid."""
        return Quotes(best_ask=self.best_price(Side.ASK), best_bid=self.best_price(Side.BID))

    # --------------------------------------------------------------- queries
    def best_price(self, side: Side) -> Optional[int]:
        """Returns the best price of a side, or None when the side is empty."""
        ladder = self._ladders[side]
        if not ladder:
            return None
        return ladder.peekitem(0)[0]

    def level_volume(self, side: Side, price: int) -> int:
        """Returns the aggregate remaining volume at a price level."""
        return self._level_volume[side].get(price, 0)

    def orders_at(self, side: Side, price: int) -> Tuple[Order, ...]:
        """Returns the FIFO queue at a price level, front first."""
        queue = self._ladders[side].get(price)
        return tuple(order for order in queue if order.remaining > 0) if queue else ()

    def price_levels(self, side: Side) -> Iterator[int]:
        """Iterates occupied prices from best to worst."""
        return iter(self._ladders[side].keys())

    def get_order(self, order_id: int) -> Optional[Order]:
        """Returns a resting order by id."""
        return self._orders.get(order_id)

    def resting_orders(self) -> Iterator[Order]:
        """Iterates every resting order."""
        return iter(self._orders.values())

    def side_volume(self, side: Side) -> int:
        """Returns the total resting volume on one side."""
        return sum(self._level_volume[side].values())

    # -------------------------------------------------------------- internal
    @staticmethod
    def _crosses(taker_side: Side, limit_price: int, maker_price: int) -> bool:
        if taker_side is Side.BID:
            return limit_price >= maker_price
        return limit_price <= maker_price

    def _claim_order_id(self, order_id: int) -> None:
        if order_id in self._orders:
            raise OrderRejectedError(f"Duplicate order id {order_id}.")
        if order_id <= self._last_order_id:
            raise OrderRejectedError(
                f"Order id {order_id} is not above the last accepted id {self._last_order_id}."
            )
        self._last_order_id = order_id

    def _check_time(self, time: int) -> None:
        if self._last_time is not None and time < self._last_time:
            raise OrderRejectedError(
                f"Event time {time} precedes the previous event at {self._last_time}."
            )

    def _match(
        self,
        *,
        taker_side: Side,
        limit_price: Optional[int],
        volume: int,
        time: int,
        taker_order_id: int,
        taker_agent_id: int,
    ) -> List[Trade]:
        maker_side = taker_side.opposite
        ladder = self._ladders[maker_side]
        trades: List[Trade] = []
        remaining = volume
        while remaining > 0 and ladder:
            price, queue = ladder.peekitem(0)
            if limit_price is not None and not self._crosses(taker_side, limit_price, price):
                break
            while remaining > 0 and queue:
                maker: Order = queue[0]
                fill = min(remaining, maker.remaining)
                maker.remaining -= fill
                remaining -= fill
                self._adjust_level(maker_side, price, -fill)
                if maker.remaining == 0:
                    queue.popleft()
                    del self._orders[maker.order_id]
                    self._trim_head(maker_side, price, queue)
                trade = Trade(
                    time=time,
                    price=price,
                    volume=fill,
                    maker_order_id=maker.order_id,
                    taker_order_id=taker_order_id,
                    maker_agent_id=maker.agent_id,
                    taker_agent_id=taker_agent_id,
                    maker_side=maker_side,
                )
                trades.append(trade)
                self.trades.append(trade)
                self.last_trade = (price, fill, time)
                if not queue:
                    del ladder[price]
                    self._dead[maker_side].pop(price, None)
                self._journal(
                    JournalRow(
                        time=time,
                        kind=MessageKind.EXECUTION,
                        order_id=maker.order_id,
                        volume=fill,
                        price=price,
                        side=maker_side,
                    )
                )
        return trades

    def _rest(self, order: Order) -> None:
        ladder = self._ladders[order.side]
        queue: Optional[Deque[Order]] = ladder.get(order.price)
        if queue is None:
            queue = deque()
            ladder[order.price] = queue
        queue.append(order)
        self._orders[order.order_id] = order
        self._adjust_level(order.side, order.price, order.remaining)

    def _bury(self, side: Side, price: int) -> None:
        """Leaves a cancelled entry in place; compacts the queue once half of it is dead."""
        queue: Deque[Order] = self._ladders[side][price]
        dead = self._dead[side]
        dead[price] = dead.get(price, 0) + 1
        self._trim_head(side, price, queue)
        if dead.get(price, 0) * 2 > len(queue):
            self._ladders[side][price] = deque(order for order in queue if order.remaining > 0)
            dead.pop(price, None)

    def _trim_head(self, side: Side, price: int, queue: Deque[Order]) -> None:
        dead = self._dead[side]
        while queue and queue[0].remaining == 0:
            queue.popleft()
            dead[price] -= 1
        if not dead.get(price):
            dead.pop(price, None)

    def _adjust_level(self, side: Side, price: int, delta: int) -> None:
        volumes = self._level_volume[side]
        updated = volumes.get(price, 0) + delta
        if updated:
            volumes[price] = updated
        else:
            volumes.pop(price, None)

    def _journal(self, row: JournalRow) -> None:
        self.journal.append(row)
        if self.record_depth:
            self.depth_log.append(self.depth_snapshot().as_lobster_row())
