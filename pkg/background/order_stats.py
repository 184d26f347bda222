"""Empirical order statistics the background trader attaches to sampled events."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from core.models import DepthSnapshot, EventType, Side

# Sensitivity symbol -> attribute name.
SYMBOLS: Dict[str, str] = {
    "P": "price_exponent",
    "V1": "top_volume_exponent",
    "V2": "deep_volume_exponent",
    "Mi": "market_imbalance",
    "Mv": "market_volume_exponent",
    "Lb": "level_lower_bound",
    "Ip": "inner_spread_prob",
}


@dataclass(frozen=True)
class OrderStatsParams:
    """Exponents are pdf exponents; pairs hold the (sp = 1, sp > 1) values."""

    price_exponent: Tuple[float, float] = (1.5, 4.7)
    top_volume_exponent: float = 1.05
    deep_volume_exponent: float = 0.9
    market_imbalance: float = 0.0
    market_volume_exponent: Tuple[float, float] = (1.2, 1.6)
    level_lower_bound: float = 12_500.0
    inner_spread_prob: float = 0.05
    market_order_fraction: float = 0.10
    lot_size: int = 100
    volume_cap_lots: int = 20
    lower_bound_boost: int = 1_000
    max_level_offset: int = 5
    refill_volume: int = 100

    def __post_init__(self) -> None:
        object.__setattr__(self, "price_exponent", tuple(float(v) for v in self.price_exponent))
        object.__setattr__(self, "market_volume_exponent", tuple(float(v) for v in self.market_volume_exponent))
        if len(self.price_exponent) != 2 or len(self.market_volume_exponent) != 2:
            raise ValueError("price_exponent and market_volume_exponent are (sp=1, sp>1) pairs.")
        if not 0.0 <= self.inner_spread_prob <= 1.0:
            raise ValueError("inner_spread_prob must lie in [0, 1].")
        if not -1.0 <= self.market_imbalance <= 1.0:
            raise ValueError("market_imbalance must lie in [-1, 1].")
        if not 0.0 <= self.market_order_fraction <= 1.0:
            raise ValueError("market_order_fraction must lie in [0, 1].")
        if self.level_lower_bound < 0:
            raise ValueError("level_lower_bound must be non-negative.")
        if self.lot_size < 1 or self.volume_cap_lots < 1 or self.max_level_offset < 1:
            raise ValueError("lot_size, volume_cap_lots and max_level_offset must be positive.")

    def price_exponent_for(self, spread: Optional[int]) -> float:
        return self.price_exponent[0 if spread is None or spread <= 1 else 1]

    def market_volume_exponent_for(self, spread: Optional[int]) -> float:
        return self.market_volume_exponent[0 if spread is None or spread <= 1 else 1]

    def market_probability(self, side: Side) -> float:
        """Share of submissions on ``side`` that are marketable, tilted by the imbalance."""
        tilt = 1.0 + self.market_imbalance if side is Side.BID else 1.0 - self.market_imbalance
        return float(np.clip(self.market_order_fraction * tilt, 0.0, 1.0))

    def perturbed(self, shifts: Mapping[str, float]) -> "OrderStatsParams":
        """Adds per-symbol shifts; pair-valued symbols shift both entries."""
        changes = {}
        for symbol, shift in shifts.items():
            if symbol not in SYMBOLS:
                raise KeyError(f"Unknown order statistic symbol: {symbol}")
            name = SYMBOLS[symbol]
            value = getattr(self, name)
            if isinstance(value, tuple):
                changes[name] = tuple(v + shift for v in value)
            else:
                changes[name] = value + shift
        if "market_imbalance" in changes:
            changes["market_imbalance"] = float(np.clip(changes["market_imbalance"], -1.0, 1.0))
        if "inner_spread_prob" in changes:
            changes["inner_spread_prob"] = float(np.clip(changes["inner_spread_prob"], 0.0, 1.0))
        if "level_lower_bound" in changes:
            changes["level_lower_bound"] = max(0.0, changes["level_lower_bound"])
        return replace(self, **changes)

    def symbol_value(self, symbol: str) -> float:
        """Returns the scalar a symbol perturbs (the sp = 1 entry for pairs)."""
        value = getattr(self, SYMBOLS[symbol])
        return float(value[0] if isinstance(value, tuple) else value)

    def to_dict(self) -> Dict[str, object]:
        return {item.name: getattr(self, item.name) for item in fields(self)}


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def sample_truncated_power_law(
    alpha: float,
    x_min: float,
    x_max: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> np.ndarray:
    """Inverse-CDF draws from the density proportional to x**-alpha on [x_min, x_max]."""
    if not 0 < x_min < x_max:
        raise ValueError("Expected 0 < x_min < x_max.")
    u = rng.uniform(size=size)
    if math.isclose(alpha, 1.0):
        return x_min * np.power(x_max / x_min, u)
    power = 1.0 - alpha
    lo, hi = x_min**power, x_max**power
    return np.power(lo + u * (hi - lo), 1.0 / power)


def sample_pareto(alpha: float, x_min: float, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Untruncated Pareto draws; requires alpha > 1."""
    if alpha <= 1.0:
        raise ValueError("An untruncated power law needs alpha > 1.")
    return x_min * np.power(1.0 - rng.uniform(size=size), -1.0 / (alpha - 1.0))


def discrete_power_law_pmf(exponent: float, support_max: int) -> np.ndarray:
    """Normalized k**-exponent over k = 1..support_max."""
    weights = np.arange(1, support_max + 1, dtype=float) ** -exponent
    return weights / weights.sum()


def sample_discrete_power_law(
    exponent: float,
    support_max: int,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> np.ndarray:
    pmf = discrete_power_law_pmf(exponent, support_max)
    return rng.choice(np.arange(1, support_max + 1), size=size, p=pmf)


def sample_volume(exponent: float, stats: OrderStatsParams, rng: np.random.Generator) -> int:
    """Whole lots from the truncated law on [1, volume_cap_lots], in shares."""
    lots = sample_truncated_power_law(exponent, 1.0, float(stats.volume_cap_lots) + 0.5, rng)
    return int(min(max(round(float(lots)), 1), stats.volume_cap_lots)) * stats.lot_size


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


class ActionKind(str, Enum):
    LIMIT = "limit"
    MARKET = "market"
    CANCEL = "cancel"
    REFILL = "refill"


@dataclass(frozen=True)
class OrderAction:
    kind: ActionKind
    side: Side
    quantity: int
    price: Optional[int] = None
    order_id: Optional[int] = None
    level: Optional[int] = None


BTOrders = Mapping[int, Tuple[Side, int, int]]


def _reference_best(snapshot: DepthSnapshot, side: Side, fallback: int) -> int:
    """Same-side best, else one tick away from the opposite best, else ``fallback``."""
    best = snapshot.best(side)
    if best is not None:
        return best
    opposite = snapshot.best(side.opposite)
    if opposite is not None:
        return max(1, opposite - 1) if side is Side.BID else opposite + 1
    return fallback


def _spread(snapshot: DepthSnapshot) -> Optional[int]:
    ask, bid = snapshot.best(Side.ASK), snapshot.best(Side.BID)
    return None if ask is None or bid is None else ask - bid


def _level_volume(snapshot: DepthSnapshot, side: Side, price: int) -> int:
    for level_price, volume in zip(snapshot.prices(side), snapshot.volumes(side)):
        if level_price == price:
            return volume
    return 0


def in_window(snapshot: DepthSnapshot, side: Side, price: int) -> bool:
    """True unless the side shows a full window and ``price`` lies behind it."""
    boundary = snapshot.prices(side)[-1]
    if boundary is None:
        return True
    return price >= boundary if side is Side.BID else price <= boundary


def emergency_refill(
    snapshot: DepthSnapshot, side: Side, stats: OrderStatsParams, *, fallback_price: int
) -> OrderAction:
    """Posts ``refill_volume`` at the top of ``side``; an empty side assumes a one-tick spread."""
    price = _reference_best(snapshot, side, fallback_price)
    return OrderAction(kind=ActionKind.REFILL, side=side, quantity=stats.refill_volume, price=price, level=1)


def attach_order_stats(
    event_type: EventType,
    snapshot: DepthSnapshot,
    stats: OrderStatsParams,
    rng: np.random.Generator,
    *,
    bt_orders: BTOrders,
    fallback_price: int,
) -> OrderAction:
    """Turns a sampled event type into a concrete order action."""
    event_type = EventType(event_type)
    side = event_type.side
    spread = _spread(snapshot)
    if event_type.is_submission:
        return _submission(side, snapshot, spread, stats, rng, fallback_price)
    return _cancellation(side, snapshot, stats, rng, bt_orders, fallback_price)


def _submission(
    side: Side,
    snapshot: DepthSnapshot,
    spread: Optional[int],
    stats: OrderStatsParams,
    rng: np.random.Generator,
    fallback_price: int,
) -> OrderAction:
    has_liquidity = snapshot.best(side.opposite) is not None
    if has_liquidity and rng.uniform() < stats.market_probability(side):
        volume = sample_volume(stats.market_volume_exponent_for(spread), stats, rng)
        return OrderAction(kind=ActionKind.MARKET, side=side, quantity=volume)

    best = _reference_best(snapshot, side, fallback_price)
    if spread is not None and spread > 1 and rng.uniform() < stats.inner_spread_prob:
        level = 1
        price = best + 1 if side is Side.BID else best - 1
    else:
        level = int(sample_discrete_power_law(stats.price_exponent_for(spread), stats.max_level_offset, rng))
        price = best - (level - 1) if side is Side.BID else best + (level - 1)
    price = max(1, price)
    exponent = stats.top_volume_exponent if level == 1 else stats.deep_volume_exponent
    volume = sample_volume(exponent, stats, rng)
    if _level_volume(snapshot, side, price) < stats.level_lower_bound:
        volume += stats.lower_bound_boost
    return OrderAction(kind=ActionKind.LIMIT, side=side, quantity=volume, price=price, level=level)


def _cancellation(
    side: Side,
    snapshot: DepthSnapshot,
    stats: OrderStatsParams,
    rng: np.random.Generator,
    bt_orders: BTOrders,
    fallback_price: int,
) -> OrderAction:
    for candidate_side in (side, side.opposite):
        if snapshot.best(candidate_side) is None:
            return emergency_refill(snapshot, candidate_side, stats, fallback_price=fallback_price)

    by_price: Dict[int, list] = {}
    for order_id, (order_side, price, remaining) in bt_orders.items():
        if order_side is side and remaining > 0 and in_window(snapshot, side, price):
            by_price.setdefault(price, []).append((order_id, remaining))
    if not by_price:
        return emergency_refill(snapshot, side, stats, fallback_price=fallback_price)

    prices = sorted(by_price)
    volumes = np.array([sum(remaining for _, remaining in by_price[price]) for price in prices], dtype=float)
    price = prices[int(rng.choice(len(prices), p=volumes / volumes.sum()))]
    order_id, remaining = min(by_price[price])
    return OrderAction(kind=ActionKind.CANCEL, side=side, quantity=remaining, price=price, order_id=order_id)
