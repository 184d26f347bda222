from typing import Dict, List, Optional, Tuple

import numpy as np
import pytest

from core.models import MessageKind, Order, Side
from matching.order_book import LimitOrderBook, OrderRejectedError


def _limit(book: LimitOrderBook, side: Side, price: int, quantity: int, time: int, agent_id: int = 7) -> Order:
    order = Order(order_id=book.next_order_id(), agent_id=agent_id, side=side, price=price, quantity=quantity, submit_time=time)
    book.submit_limit(order, time)
    return order


class ReferenceMatcher:
    """Brute-force price-time matcher over a flat list of resting orders."""

    def __init__(self) -> None:
        self.resting: List[List[int]] = []  # [order_id, side_sign, price, remaining, arrival]
        self.trades: List[Tuple[int, int, int, int]] = []  # (maker, taker, price, volume)
        self.cancelled = 0
        self._arrival = 0

    def _best_maker(self, taker_sign: int, limit: Optional[int]) -> Optional[List[int]]:
        candidates = [entry for entry in self.resting if entry[1] == -taker_sign]
        if limit is not None:
            candidates = [e for e in candidates if (e[2] <= limit if taker_sign > 0 else e[2] >= limit)]
        if not candidates:
            return None
        # Buyers take the lowest ask first, sellers the highest bid; then earliest arrival.
        return min(candidates, key=lambda e: (e[2] * taker_sign, e[4]))

    def _match(self, order_id: int, sign: int, limit: Optional[int], volume: int) -> int:
        while volume > 0:
            maker = self._best_maker(sign, limit)
            if maker is None:
                break
            fill = min(volume, maker[3])
            maker[3] -= fill
            volume -= fill
            self.trades.append((maker[0], order_id, maker[2], fill))
            if maker[3] == 0:
                self.resting.remove(maker)
        return volume

    def limit(self, order_id: int, sign: int, price: int, quantity: int) -> None:
        left = self._match(order_id, sign, price, quantity)
        if left > 0:
            self._arrival += 1
            self.resting.append([order_id, sign, price, left, self._arrival])

    def market(self, order_id: int, sign: int, quantity: int) -> None:
        self._match(order_id, sign, None, quantity)

    def cancel(self, order_id: int) -> Optional[int]:
        for entry in self.resting:
            if entry[0] == order_id:
                self.resting.remove(entry)
                self.cancelled += entry[3]
                return entry[3]
        return None

    def book_state(self) -> Dict[int, List[Tuple[int, int, int]]]:
        state: Dict[int, List[Tuple[int, int, int]]] = {1: [], -1: []}
        for sign in (1, -1):
            side = [e for e in self.resting if e[1] == sign]
            side.sort(key=lambda e: (-e[2] * sign, e[4]))
            state[sign] = [(e[0], e[2], e[3]) for e in side]
        return state


def _book_state(book: LimitOrderBook) -> Dict[int, List[Tuple[int, int, int]]]:
    state: Dict[int, List[Tuple[int, int, int]]] = {}
    for side in (Side.BID, Side.ASK):
        rows = []
        for price in book.price_levels(side):
            rows.extend((order.order_id, order.price, order.remaining) for order in book.orders_at(side, price))
        state[side.sign] = rows
    return state


class TestLimitOrders:
    def test_non_crossing_limit_rests_and_sets_quotes(self) -> None:
        # Arrange
        book = LimitOrderBook()

        # Act
        _limit(book, Side.BID, 99, 100, time=1)
        _limit(book, Side.ASK, 101, 50, time=2)

        # Assert
        quotes = book.quotes()
        assert quotes.best_bid == 99
        assert quotes.best_ask == 101
        assert quotes.spread == 2
        assert book.level_volume(Side.ASK, 101) == 50
        assert book.trades == []

    def test_crossing_limit_fills_in_time_priority_then_rests_remainder(self) -> None:
        # Arrange
        book = LimitOrderBook()
        first = _limit(book, Side.ASK, 100, 30, time=1, agent_id=1)
        second = _limit(book, Side.ASK, 100, 30, time=2, agent_id=2)

        # Act
        buy = Order(order_id=book.next_order_id(), agent_id=3, side=Side.BID, price=100, quantity=80, submit_time=3)
        result = book.submit_limit(buy, 3)

        # Assert
        assert [(t.maker_order_id, t.volume) for t in result.trades] == [(first.order_id, 30), (second.order_id, 30)]
        assert result.resting is buy
        assert buy.remaining == 20
        assert book.quotes().best_bid == 100
        assert book.quotes().best_ask is None
        assert result.event.is_marketable

    def test_executions_are_journaled_before_the_submission_row(self) -> None:
        # Arrange
        book = LimitOrderBook()
        maker = _limit(book, Side.ASK, 100, 10, time=1)

        # Act
        _limit(book, Side.BID, 100, 10, time=2)

        # Assert
        kinds = [row.kind for row in book.journal]
        assert kinds == [MessageKind.SUBMISSION, MessageKind.EXECUTION, MessageKind.SUBMISSION]
        execution = book.journal[1]
        assert execution.order_id == maker.order_id
        assert execution.side is Side.ASK
        assert len(book.depth_log) == len(book.journal)

    def test_rejects_non_positive_quantity_and_duplicate_ids(self) -> None:
        # Arrange
        book = LimitOrderBook()
        order = _limit(book, Side.BID, 99, 10, time=1)

        # Act, Assert
        with pytest.raises(OrderRejectedError):
            book.submit_limit(Order(order_id=book.next_order_id(), agent_id=1, side=Side.BID, price=99, quantity=0, submit_time=2), 2)
        with pytest.raises(OrderRejectedError):
            book.submit_limit(Order(order_id=order.order_id, agent_id=1, side=Side.BID, price=98, quantity=5, submit_time=2), 2)

    def test_rejects_time_going_backwards(self) -> None:
        book = LimitOrderBook()
        _limit(book, Side.BID, 99, 10, time=5)

        with pytest.raises(OrderRejectedError):
            _limit(book, Side.BID, 98, 10, time=4)


class TestMarketOrders:
    def test_market_order_walks_levels(self) -> None:
        # Arrange
        book = LimitOrderBook()
        _limit(book, Side.ASK, 101, 10, time=1)
        _limit(book, Side.ASK, 102, 10, time=2)

        # Act
        result = book.submit_market(Side.BID, 15, 3, agent_id=9)

        # Assert
        assert [(t.price, t.volume) for t in result.trades] == [(101, 10), (102, 5)]
        assert result.executed_volume == 15
        assert not result.liquidity_exhausted
        assert book.level_volume(Side.ASK, 102) == 5
        assert book.journal[-1].kind is MessageKind.SUBMISSION
        assert book.journal[-1].volume == 15

    def test_market_order_larger_than_book_drops_residual(self) -> None:
        book = LimitOrderBook()
        _limit(book, Side.BID, 99, 10, time=1)

        result = book.submit_market(Side.ASK, 25, 2)

        assert result.executed_volume == 10
        assert result.liquidity_exhausted
        assert book.quotes().best_bid is None

    def test_market_order_into_empty_side_records_nothing(self) -> None:
        book = LimitOrderBook()

        result = book.submit_market(Side.BID, 10, 1)

        assert result.trades == []
        assert result.liquidity_exhausted
        assert result.event is None
        assert book.journal == []


class TestCancel:
    def test_cancel_returns_remaining_volume(self) -> None:
        # Arrange
        book = LimitOrderBook()
        order = _limit(book, Side.BID, 99, 40, time=1)
        book.submit_market(Side.ASK, 15, 2)

        # Act
        cancelled = book.cancel(order.order_id, 3)

        # Assert
        assert cancelled == 25
        assert book.quotes().best_bid is None
        assert book.journal[-1].kind is MessageKind.CANCELLATION

    def test_cancel_of_unknown_or_filled_order_returns_none(self) -> None:
        book = LimitOrderBook()
        order = _limit(book, Side.ASK, 101, 5, time=1)
        book.submit_market(Side.BID, 5, 2)

        assert book.cancel(order.order_id, 3) is None
        assert book.cancel(999, 3) is None

    def test_cancels_inside_a_deep_level_keep_time_priority(self) -> None:
        # Arrange
        book = LimitOrderBook(record_depth=False)
        orders = [_limit(book, Side.ASK, 101, 10, time=1, agent_id=i) for i in range(10)]
        for index in (0, 2, 3, 5, 6, 7):
            book.cancel(orders[index].order_id, 2)

        # Act
        result = book.submit_market(Side.BID, 25, 3)

        # Assert
        assert [order.order_id for order in book.orders_at(Side.ASK, 101)] == [orders[8].order_id, orders[9].order_id]
        assert [trade.maker_order_id for trade in result.trades] == [orders[i].order_id for i in (1, 4, 8)]
        assert result.trades[-1].volume == 5
        assert book.level_volume(Side.ASK, 101) == 15

    def test_cancelling_the_last_live_order_clears_the_level(self) -> None:
        # Arrange
        book = LimitOrderBook(record_depth=False)
        orders = [_limit(book, Side.BID, 99, 10, time=1) for _ in range(4)]

        # Act
        for order in reversed(orders):
            book.cancel(order.order_id, 2)
        fresh = _limit(book, Side.BID, 99, 7, time=3)

        # Assert
        assert book.orders_at(Side.BID, 99) == (fresh,)
        assert book.level_volume(Side.BID, 99) == 7
        assert book.best_price(Side.BID) == 99

    def test_one_sided_book_has_no_spread(self) -> None:
        book = LimitOrderBook()
        _limit(book, Side.BID, 99, 5, time=1)

        quotes = book.quotes()

        assert not quotes.two_sided
        assert quotes.spread is None


class TestAgainstReferenceMatcher:
    @pytest.mark.parametrize("seed", range(10))
    def test_random_scripts_match_reference(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        for _ in range(100):
            self._run_script(rng, int(rng.integers(1, 201)))

    @staticmethod
    def _run_script(rng: np.random.Generator, n_events: int) -> None:
        book = LimitOrderBook(record_depth=False)
        reference = ReferenceMatcher()
        limit_quantity = 0
        limit_ids = set()
        for time in range(1, n_events + 1):
            action = rng.random()
            sign = 1 if rng.random() < 0.5 else -1
            side = Side.BID if sign > 0 else Side.ASK
            resting = [entry[0] for entry in reference.resting]
            if action < 0.6:
                price = int(rng.integers(95, 106))
                quantity = int(rng.integers(1, 50))
                order = Order(order_id=book.next_order_id(), agent_id=1, side=side, price=price, quantity=quantity, submit_time=time)
                reference.limit(order.order_id, sign, price, quantity)
                book.submit_limit(order, time)
                limit_quantity += quantity
                limit_ids.add(order.order_id)
            elif action < 0.8:
                quantity = int(rng.integers(1, 80))
                order_id = book.next_order_id()
                reference.market(order_id, sign, quantity)
                book.submit_market(side, quantity, time, order_id=order_id)
            elif resting:
                target = int(rng.choice(resting)) if rng.random() < 0.9 else 10**6
                assert book.cancel(target, time) == reference.cancel(target)

        assert _book_state(book) == reference.book_state()
        assert [(t.maker_order_id, t.taker_order_id, t.price, t.volume) for t in book.trades] == reference.trades

        # Conservation: every limit share is resting, filled as maker, filled as taker or cancelled.
        resting_volume = book.side_volume(Side.BID) + book.side_volume(Side.ASK)
        filled_as_maker = sum(t.volume for t in book.trades)
        filled_as_taker = sum(t.volume for t in book.trades if t.taker_order_id in limit_ids)
        assert limit_quantity == resting_volume + filled_as_maker + filled_as_taker + reference.cancelled
