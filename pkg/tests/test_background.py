from collections import deque

import numpy as np
import pytest

from background.intensity import HawkesModel, HawkesParams
from background.order_stats import (
    ActionKind,
    OrderStatsParams,
    attach_order_stats,
    emergency_refill,
    in_window,
)
from background.thinning import ThinningDiagnostics, thinning_sample
from background.trader import PreOpenConfig, initialize_book, level_boundary_update
from calibration.dataset import simulate_hawkes_dataset
from calibration.evaluation import UniformIntensity
from core.models import DepthSnapshot, EventType, Side
from matching.order_book import LimitOrderBook


def _snapshot(best_ask, best_bid, *, levels=5, volume=20_000, ask_levels=None, bid_levels=None) -> DepthSnapshot:
    ask_levels = levels if ask_levels is None else ask_levels
    bid_levels = levels if bid_levels is None else bid_levels
    asks = [best_ask + i if best_ask is not None and i < ask_levels else None for i in range(levels)]
    bids = [best_bid - i if best_bid is not None and i < bid_levels else None for i in range(levels)]
    return DepthSnapshot(
        ask_prices=tuple(asks),
        ask_volumes=tuple(0 if p is None else volume for p in asks),
        bid_prices=tuple(bids),
        bid_volumes=tuple(0 if p is None else volume for p in bids),
    )


class TestSubmissions:
    def test_limit_orders_land_within_the_level_window(self) -> None:
        # Arrange
        stats = OrderStatsParams(market_order_fraction=0.0, inner_spread_prob=0.0)
        snapshot = _snapshot(101, 100)
        rng = np.random.default_rng(2)

        # Act
        actions = [
            attach_order_stats(EventType.BID_SUBMISSION, snapshot, stats, rng, bt_orders={}, fallback_price=1_000)
            for _ in range(200)
        ]

        # Assert
        for action in actions:
            assert action.kind is ActionKind.LIMIT
            assert action.side is Side.BID
            assert 96 <= action.price <= 100
            assert action.price == 100 - (action.level - 1)
            assert action.quantity % 100 == 0 and 100 <= action.quantity <= 2_000

    def test_thin_levels_get_the_lower_bound_boost(self) -> None:
        stats = OrderStatsParams(market_order_fraction=0.0, inner_spread_prob=0.0)
        snapshot = _snapshot(101, 100, volume=100)

        action = attach_order_stats(
            EventType.ASK_SUBMISSION, snapshot, stats, np.random.default_rng(0), bt_orders={}, fallback_price=1_000
        )

        assert action.quantity >= 100 + stats.lower_bound_boost

    def test_market_orders_need_opposite_liquidity(self) -> None:
        # Arrange
        stats = OrderStatsParams(market_order_fraction=1.0)
        rng = np.random.default_rng(4)

        # Act
        market = attach_order_stats(EventType.BID_SUBMISSION, _snapshot(101, 100), stats, rng, bt_orders={}, fallback_price=1_000)
        no_asks = attach_order_stats(EventType.BID_SUBMISSION, _snapshot(None, 100), stats, rng, bt_orders={}, fallback_price=1_000)

        # Assert
        assert market.kind is ActionKind.MARKET and market.side is Side.BID and market.price is None
        assert no_asks.kind is ActionKind.LIMIT

    def test_inner_spread_orders_improve_the_quote(self) -> None:
        stats = OrderStatsParams(market_order_fraction=0.0, inner_spread_prob=1.0)
        snapshot = _snapshot(103, 100)
        rng = np.random.default_rng(1)

        bid = attach_order_stats(EventType.BID_SUBMISSION, snapshot, stats, rng, bt_orders={}, fallback_price=1_000)
        ask = attach_order_stats(EventType.ASK_SUBMISSION, snapshot, stats, rng, bt_orders={}, fallback_price=1_000)

        assert (bid.price, bid.level) == (101, 1)
        assert (ask.price, ask.level) == (102, 1)

    @pytest.mark.parametrize(
        "imbalance, bid, ask",
        [(0.0, 0.1, 0.1), (0.5, 0.15, 0.05), (-1.0, 0.0, 0.2)],
    )
    def test_market_probability_tilts_with_the_imbalance(self, imbalance: float, bid: float, ask: float) -> None:
        stats = OrderStatsParams(market_order_fraction=0.1, market_imbalance=imbalance)

        assert stats.market_probability(Side.BID) == pytest.approx(bid)
        assert stats.market_probability(Side.ASK) == pytest.approx(ask)


class TestCancellations:
    def test_cancels_the_oldest_order_at_the_drawn_price(self) -> None:
        # Arrange
        orders = {7: (Side.BID, 100, 200), 5: (Side.BID, 100, 300), 9: (Side.ASK, 101, 100)}

        # Act
        action = attach_order_stats(
            EventType.BID_CANCELLATION,
            _snapshot(101, 100),
            OrderStatsParams(),
            np.random.default_rng(0),
            bt_orders=orders,
            fallback_price=1_000,
        )

        # Assert
        assert action.kind is ActionKind.CANCEL
        assert (action.order_id, action.price, action.quantity) == (5, 100, 300)

    def test_empty_side_triggers_an_emergency_refill(self) -> None:
        action = attach_order_stats(
            EventType.ASK_CANCELLATION,
            _snapshot(101, None),
            OrderStatsParams(),
            np.random.default_rng(0),
            bt_orders={9: (Side.ASK, 101, 100)},
            fallback_price=1_000,
        )

        assert action.kind is ActionKind.REFILL
        assert (action.side, action.price, action.quantity) == (Side.BID, 100, 100)

    def test_no_own_orders_refills_the_same_side(self) -> None:
        action = attach_order_stats(
            EventType.ASK_CANCELLATION,
            _snapshot(101, 100),
            OrderStatsParams(),
            np.random.default_rng(0),
            bt_orders={},
            fallback_price=1_000,
        )

        assert action.kind is ActionKind.REFILL
        assert (action.side, action.price) == (Side.ASK, 101)

    def test_refill_of_an_empty_book_uses_the_fallback(self) -> None:
        empty = _snapshot(None, None)

        action = emergency_refill(empty, Side.BID, OrderStatsParams(refill_volume=300), fallback_price=999)

        assert (action.price, action.quantity, action.level) == (999, 300, 1)


class TestLevelWindow:
    def test_prices_behind_a_full_window_are_outside(self) -> None:
        snapshot = _snapshot(101, 100)

        assert in_window(snapshot, Side.BID, 96)
        assert not in_window(snapshot, Side.BID, 95)
        assert not in_window(snapshot, Side.ASK, 106)
        assert in_window(_snapshot(101, 100, bid_levels=3), Side.BID, 50)

    def test_boundary_update_queues_each_order_once(self) -> None:
        # Arrange
        orders = {1: (Side.BID, 95, 100), 2: (Side.BID, 99, 100), 3: (Side.ASK, 110, 100)}
        queue: deque = deque()

        # Act
        first = level_boundary_update(orders, None, _snapshot(101, 100), queue)
        second = level_boundary_update(orders, _snapshot(101, 100), _snapshot(101, 100), queue)

        # Assert
        assert first == [1, 3]
        assert second == []
        assert list(queue) == [1, 3]


class TestPreOpen:
    def test_population_builds_a_one_tick_spread(self) -> None:
        # Arrange
        book = LimitOrderBook(n_levels=5)
        cfg = PreOpenConfig(levels=5, order_volume=(100, 1_000), level_target=(15_000, 20_000))

        # Act
        placed = initialize_book(book, np.random.default_rng(6), start_time=0, best_bid=1_000, config=cfg)

        # Assert
        snapshot = book.depth_snapshot(5)
        assert placed > 0
        assert snapshot.bid_prices == (1_000, 999, 998, 997, 996)
        assert snapshot.ask_prices == (1_001, 1_002, 1_003, 1_004, 1_005)
        assert all(15_000 <= v < 21_000 for v in snapshot.bid_volumes + snapshot.ask_volumes)

    def test_reference_price_too_low_is_rejected(self) -> None:
        with pytest.raises(ValueError):
            initialize_book(LimitOrderBook(), np.random.default_rng(0), start_time=0, best_bid=3)


class TestThinning:
    def test_constant_rate_gives_exponential_gaps(self) -> None:
        # Arrange
        model = UniformIntensity(rate=0.5, n_types=4)
        rng = np.random.default_rng(12)
        diagnostics = ThinningDiagnostics()

        # Act
        draws = [thinning_sample(model, None, 10.0, rng, diagnostics=diagnostics) for _ in range(20_000)]

        # Assert
        gaps = np.array([t for _, t in draws]) - 10.0
        types = np.array([event_type for event_type, _ in draws])
        assert np.all(gaps > 0)
        assert gaps.mean() == pytest.approx(0.5, rel=0.03)
        assert np.bincount(types, minlength=4) / types.size == pytest.approx([0.25] * 4, abs=0.02)
        assert diagnostics.rejections == 0
        assert diagnostics.acceptance_rate == 1.0

    def test_types_follow_the_intensity_share_at_acceptance(self) -> None:
        # Arrange: a type-0 event at t=0 leaves a decaying, lopsided intensity.
        params = HawkesParams(
            mu=np.array([0.5, 1.0, 1.5, 2.0]),
            alpha=np.diag([8.0, 1.0, 1.0, 1.0]),
            delta=np.full((4, 4), 10.0),
        )
        model = HawkesModel(params)
        state = model.update(model.new_state(), 0, 0.0)
        rng = np.random.default_rng(13)

        # Act
        draws = [thinning_sample(model, state, 0.0, rng) for _ in range(20_000)]

        # Assert
        types = np.array([event_type for event_type, _ in draws])
        shares = [model.intensity(state, t) / model.intensity(state, t).sum() for _, t in draws]
        observed = np.bincount(types, minlength=4) / types.size
        np.testing.assert_allclose(observed, np.mean(shares, axis=0), atol=0.02)

    def test_stationary_type_frequencies_match_the_rates(self) -> None:
        # Arrange
        params = HawkesParams(
            mu=np.array([0.5, 1.0, 1.5, 2.0]),
            alpha=np.full((4, 4), 0.5),
            delta=np.full((4, 4), 10.0),
        )

        # Act
        dataset = simulate_hawkes_dataset(params, horizon=500.0, n_sequences=4, seed=14)

        # Assert
        types = np.concatenate([sequence.types for sequence in dataset.sequences])
        rates = params.stationary_rates()
        np.testing.assert_allclose(np.bincount(types, minlength=4) / types.size, rates / rates.sum(), atol=0.02)
