"""Tabular views of one session's message and order book logs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional

import numpy as np
import pandas as pd

from calibration.dataset import MESSAGE_COLUMNS, flag_marketable_rows, read_message_file, read_orderbook_file
from core.models import MessageKind
from simulation.kernel import NS_PER_SECOND

if TYPE_CHECKING:
    from simulation.session import SimulationResult

LOGGER = logging.getLogger(__name__)

UNKNOWN_AGENT = -1


class AnalyticsError(ValueError):
    """Raised when the logs cannot support a statistic."""


def book_columns(n_levels: int) -> List[str]:
    columns = []
    for level in range(1, n_levels + 1):
        columns.extend([f"ask_price_{level}", f"ask_size_{level}", f"bid_price_{level}", f"bid_size_{level}"])
    return columns


@dataclass
class MarketLogs:
    """Aligned message and book frames, times in seconds after midnight.

    ``messages`` carries the six LOBSTER columns plus ``agent_id`` and
    ``marketable``; row ``i`` of ``book`` is the depth right after message ``i``.
    """

    messages: pd.DataFrame
    book: pd.DataFrame
    open_s: float
    close_s: float

    def __post_init__(self) -> None:
        if len(self.messages) != len(self.book):
            raise AnalyticsError(
                f"Message and book logs differ in length ({len(self.messages)} vs {len(self.book)})."
            )
        if not self.close_s > self.open_s:
            raise AnalyticsError("Session close must follow the open.")

    @classmethod
    def from_result(cls, result: "SimulationResult", *, include_pre_open: bool = False) -> "MarketLogs":
        if len(result.depth_log) != len(result.journal):
            raise AnalyticsError("Depth recording was disabled for this run.")
        owners = {event.order_id: event.agent_id for event in result.events}
        marketable_ids = {event.order_id for event in result.events if event.is_marketable}
        rows = []
        depth = []
        for row, snapshot in zip(result.journal, result.depth_log):
            if row.time < result.market_open and not include_pre_open:
                continue
            rows.append(
                (
                    row.time / NS_PER_SECOND,
                    int(row.kind),
                    row.order_id,
                    row.volume,
                    row.price,
                    row.side.sign,
                    owners.get(row.order_id, UNKNOWN_AGENT),
                    row.kind == MessageKind.SUBMISSION and row.order_id in marketable_ids,
                )
            )
            depth.append(snapshot)
        n_levels = len(result.depth_log[0]) // 4 if result.depth_log else 1
        messages = pd.DataFrame(rows, columns=[*MESSAGE_COLUMNS, "agent_id", "marketable"])
        book = pd.DataFrame(depth, columns=book_columns(n_levels))
        return cls(
            messages=messages,
            book=book,
            open_s=result.market_open / NS_PER_SECOND,
            close_s=result.market_close / NS_PER_SECOND,
        )

    @classmethod
    def from_files(
        cls,
        message_path: Path,
        book_path: Path,
        *,
        open_s: Optional[float] = None,
        close_s: Optional[float] = None,
    ) -> "MarketLogs":
        """Loads a header-less LOBSTER pair; the session defaults to the logged span."""
        messages = read_message_file(Path(message_path))
        book = read_orderbook_file(Path(book_path))
        book.columns = book_columns(book.shape[1] // 4)
        if messages.empty:
            raise AnalyticsError(f"{message_path} holds no messages.")
        messages["agent_id"] = UNKNOWN_AGENT
        messages["marketable"] = flag_marketable_rows(messages)
        start = float(messages["time"].iloc[0]) if open_s is None else open_s
        end = float(messages["time"].iloc[-1]) + 1.0 if close_s is None else close_s
        keep = ((messages["time"] >= start) & (messages["time"] < end)).to_numpy()
        return cls(
            messages=messages.loc[keep].reset_index(drop=True),
            book=book.loc[keep].reset_index(drop=True),
            open_s=start,
            close_s=end,
        )

    @property
    def duration_s(self) -> float:
        return self.close_s - self.open_s

    @cached_property
    def quotes(self) -> pd.DataFrame:
        """Best quotes after every message; ``mid`` and ``spread`` are NaN when one-sided."""
        ask = self.book["ask_price_1"].to_numpy(dtype=float)
        bid = self.book["bid_price_1"].to_numpy(dtype=float)
        ask[ask < 0] = np.nan
        bid[bid < 0] = np.nan
        return pd.DataFrame(
            {
                "time": self.messages["time"].to_numpy(dtype=float),
                "best_ask": ask,
                "best_bid": bid,
                "mid": (ask + bid) / 2.0,
                "spread": ask - bid,
            }
        )

    @property
    def submissions(self) -> pd.DataFrame:
        return self.messages[self.messages["kind"] == MessageKind.SUBMISSION]

    @property
    def cancellations(self) -> pd.DataFrame:
        return self.messages[self.messages["kind"].isin([MessageKind.CANCELLATION, 3])]

    @property
    def executions(self) -> pd.DataFrame:
        return self.messages[self.messages["kind"].isin([MessageKind.EXECUTION, 5])]

    def mid_at(self, times: np.ndarray) -> np.ndarray:
        """Last two-sided mid at or before each time; NaN before the first one."""
        quotes = self.quotes.dropna(subset=["mid"])
        known = quotes["time"].to_numpy()
        mids = quotes["mid"].to_numpy()
        index = np.searchsorted(known, np.asarray(times, dtype=float), side="right") - 1
        values = np.full(index.shape, np.nan)
        valid = index >= 0
        values[valid] = mids[index[valid]]
        return values

    def last_mid(self) -> Optional[float]:
        mids = self.quotes["mid"].dropna()
        return None if mids.empty else float(mids.iloc[-1])
