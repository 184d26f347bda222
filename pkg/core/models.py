"""Shared data models for the market simulator."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Tuple


class Side(str, Enum):
    """Order side."""

    BID = "bid"
    ASK = "ask"

    @property
    def sign(self) -> int:
        """Returns +1 for bids and -1 for asks (LOBSTER direction convention)."""
        return 1 if self is Side.BID else -1

    @property
    def opposite(self) -> "Side":
        """Returns the other side of the book."""
        return Side.ASK if self is Side.BID else Side.BID

    @classmethod
    def from_sign(cls, sign: int) -> "Side":
        """Parses a LOBSTER direction value."""
        if sign == 1:
            return cls.BID
        if sign == -1:
            return cls.ASK
        raise ValueError(f"Unknown side sign: {sign}")


class EventType(IntEnum):
    """The four classes of book-update events the background trader models."""

    BID_SUBMISSION = 0
    BID_CANCELLATION = 1
    ASK_SUBMISSION = 2
    ASK_CANCELLATION = 3

    @property
    def side(self) -> Side:
        """Returns the book side the event acts on."""
        if self in (EventType.BID_SUBMISSION, EventType.BID_CANCELLATION):
            return Side.BID
        return Side.ASK

    @property
    def is_submission(self) -> bool:
        """Returns True for submission events."""
        return self in (EventType.BID_SUBMISSION, EventType.ASK_SUBMISSION)

    @classmethod
    def of(cls, side: Side, submission: bool) -> "EventType":
        """Builds the event type for a side/action pair."""
        if side is Side.BID:
            return cls.BID_SUBMISSION if submission else cls.BID_CANCELLATION
        return cls.ASK_SUBMISSION if submission else cls.ASK_CANCELLATION


NUM_EVENT_TYPES = len(EventType)


class MessageKind(IntEnum):
    """LOBSTER message-file event codes used by the exporter."""

    SUBMISSION = 1
    CANCELLATION = 2
    EXECUTION = 4


@dataclass
class Order:
    """A limit order resting in (or travelling to) the book."""

    order_id: int
    agent_id: int
    side: Side
    price: int
    quantity: int
    submit_time: int
    remaining: int = field(init=False)

    def __post_init__(self) -> None:
        self.remaining = self.quantity


@dataclass(frozen=True)
class Trade:
    """A fill between a resting maker order and an incoming taker order."""

    time: int
    price: int
    volume: int
    maker_order_id: int
    taker_order_id: int
    maker_agent_id: int
    taker_agent_id: int
    maker_side: Side


@dataclass(frozen=True)
class EventRecord:
    """A typed book-update event (submission or cancellation)."""

    time: int
    event_type: EventType
    price: int
    volume: int
    order_id: int
    is_marketable: bool = False
    agent_id: int = -1


@dataclass(frozen=True)
class JournalRow:
    """One row of the LOBSTER-style message file."""

    time: int
    kind: MessageKind
    order_id: int
    volume: int
    price: int
    side: Side


@dataclass(frozen=True)
class DepthSnapshot:
    """Aggregated top-of-book view; absent levels carry price None and volume 0."""

    ask_prices: Tuple[Optional[int], ...]
    ask_volumes: Tuple[int, ...]
    bid_prices: Tuple[Optional[int], ...]
    bid_volumes: Tuple[int, ...]

    @property
    def n_levels(self) -> int:
        """Returns the number of levels per side."""
        return len(self.ask_prices)

    def prices(self, side: Side) -> Tuple[Optional[int], ...]:
        """Returns the level prices of one side."""
        return self.bid_prices if side is Side.BID else self.ask_prices

    def volumes(self, side: Side) -> Tuple[int, ...]:
        """Returns the level volumes of one side."""
        return self.bid_volumes if side is Side.BID else self.ask_volumes

    def best(self, side: Side) -> Optional[int]:
        """Returns the best price of one side, or None when empty."""
        return self.prices(side)[0]

    def as_lobster_row(self) -> Tuple[int, ...]:
        """Flattens to ask_p1, ask_v1, bid_p1, bid_v1, ... with -1 for absent prices."""
        row = []
        for level in range(self.n_levels):
            ask_price = self.ask_prices[level]
            bid_price = self.bid_prices[level]
            row.extend(
                (
                    -1 if ask_price is None else ask_price,
                    self.ask_volumes[level],
                    -1 if bid_price is None else bid_price,
                    self.bid_volumes[level],
                )
            )
        return tuple(row)

    @classmethod
    def from_lobster_row(cls, row: Tuple[int, ...]) -> "DepthSnapshot":
        """Inverse of as_lobster_row."""
        levels = len(row) // 4
        ask_prices, ask_volumes, bid_prices, bid_volumes = [], [], [], []
        for level in range(levels):
            ask_p, ask_v, bid_p, bid_v = row[4 * level : 4 * level + 4]
            ask_prices.append(None if ask_p < 0 else int(ask_p))
            ask_volumes.append(int(ask_v))
            bid_prices.append(None if bid_p < 0 else int(bid_p))
            bid_volumes.append(int(bid_v))
        return cls(
            ask_prices=tuple(ask_prices),
            ask_volumes=tuple(ask_volumes),
            bid_prices=tuple(bid_prices),
            bid_volumes=tuple(bid_volumes),
        )


@dataclass(frozen=True)
class Quotes:
    """Best quotes; spread and mid are only defined for a two-sided book."""

    best_ask: Optional[int]
    best_bid: Optional[int]

    @property
    def two_sided(self) -> bool:
        """Returns True when both sides hold liquidity."""
        return self.best_ask is not None and self.best_bid is not None

    @property
    def spread(self) -> Optional[int]:
        """Returns best ask minus best bid in ticks."""
        if not self.two_sided:
            return None
        return self.best_ask - self.best_bid  # type: ignore[operator]

    @property
    def mid_x2(self) -> Optional[int]:
        """Returns twice the mid-price, an exact half-tick integer."""
        if not self.two_sided:
            return None
        return self.best_ask + self.best_bid  # type: ignore[operator]

    @property
    def mid(self) -> Optional[float]:
        """Returns the mid-price in ticks."""
        mid_x2 = self.mid_x2
        return None if mid_x2 is None else mid_x2 / 2.0
