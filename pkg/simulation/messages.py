"""Kernel messages and the payloads agents exchange through them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Type, Union

from core.models import DepthSnapshot, EventRecord, Quotes, Side


@dataclass(frozen=True)
class Wakeup:
    """Self-addressed timer; ``token`` lets an agent ignore stale wakeups."""

    reason: str = "wakeup"
    token: int = 0


@dataclass(frozen=True)
class SubmitLimit:
    side: Side
    price: int
    quantity: int
    tag: str = ""


@dataclass(frozen=True)
class SubmitMarket:
    side: Side
    quantity: int
    tag: str = ""


@dataclass(frozen=True)
class CancelOrder:
    """Cancellation request; silent cancellations are flagged on the broadcast."""

    order_id: int
    silent: bool = False


@dataclass(frozen=True)
class QuoteRequest:
    n_levels: int = 5
    n_trades: int = 0


@dataclass(frozen=True)
class QuoteResponse:
    quotes: Quotes
    snapshot: DepthSnapshot
    recent_trade_prices: Tuple[int, ...] = ()
    last_trade: Optional[Tuple[int, int, int]] = None


@dataclass(frozen=True)
class VolumeRequest:
    """Asks for the traded volume over the trailing ``lookback_ns``."""

    lookback_ns: int


@dataclass(frozen=True)
class VolumeResponse:
    lookback_ns: int
    volume: int


@dataclass(frozen=True)
class MarketDataUpdate:
    """Depth broadcast sent to subscribers after every accepted book update."""

    snapshot: DepthSnapshot
    last_trade: Optional[Tuple[int, int, int]]
    event: Optional[EventRecord]
    silent: bool = False


@dataclass(frozen=True)
class OrderAccepted:
    order_id: int
    side: Side
    price: int
    quantity: int
    remaining: int
    tag: str = ""


@dataclass(frozen=True)
class OrderCancelled:
    order_id: int
    side: Side
    price: int
    volume: int


@dataclass(frozen=True)
class OrderExecuted:
    order_id: int
    side: Side
    price: int
    volume: int
    is_maker: bool


Payload = Union[
    Wakeup,
    SubmitLimit,
    SubmitMarket,
    CancelOrder,
    QuoteRequest,
    QuoteResponse,
    VolumeRequest,
    VolumeResponse,
    MarketDataUpdate,
    OrderAccepted,
    OrderCancelled,
    OrderExecuted,
]

HANDLER_NAMES: Dict[Type, str] = {
    Wakeup: "on_wakeup",
    SubmitLimit: "on_submit_limit",
    SubmitMarket: "on_submit_market",
    CancelOrder: "on_cancel_order",
    QuoteRequest: "on_quote_request",
    QuoteResponse: "on_quote_response",
    VolumeRequest: "on_volume_request",
    VolumeResponse: "on_volume_response",
    MarketDataUpdate: "on_market_data",
    OrderAccepted: "on_order_accepted",
    OrderCancelled: "on_order_cancelled",
    OrderExecuted: "on_order_executed",
}


@dataclass(order=True)
class Message:
    """A timestamped delivery; ``(deliver_time, seq)`` totally orders the queue."""

    deliver_time: int
    seq: int
    sender: int = field(compare=False)
    recipient: int = field(compare=False)
    payload: Payload = field(compare=False)
    send_time: int = field(compare=False, default=0)

    def describe(self) -> str:
        """Returns a short description used in error reports."""
        return (
            f"{type(self.payload).__name__} #{self.seq} from {self.sender} to "
            f"{self.recipient} at {self.deliver_time}"
        )
