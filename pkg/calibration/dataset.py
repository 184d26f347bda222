"""Event-stream datasets: synthetic Hawkes streams and LOBSTER-style log pairs."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from background.intensity import HawkesModel, HawkesParams
from background.order_stats import OrderStatsParams
from background.thinning import simulate_stream
from calibration.power_law import discrete_power_law_mle, truncated_power_law_mle
from core.models import DepthSnapshot, EventType, MessageKind, Side

LOGGER = logging.getLogger(__name__)

MESSAGE_COLUMNS = ("time", "kind", "order_id", "size", "price", "direction")
TIE_NUDGE_S = 1e-9


@dataclass
class EventSequence:
    """One stream; ``times`` are seconds from the stream start, strictly increasing."""

    times: np.ndarray
    types: np.ndarray
    horizon: float
    snapshots: Optional[List[DepthSnapshot]] = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.types = np.asarray(self.types, dtype=np.int64)
        if self.times.shape != self.types.shape:
            raise ValueError("times and types must have the same length.")
        if self.times.size and np.any(np.diff(self.times) <= 0):
            raise ValueError("Event times must be strictly increasing within a sequence.")
        if self.times.size and (self.times[0] < 0 or self.times[-1] >= self.horizon):
            raise ValueError("Event times must lie in [0, horizon).")
        if self.snapshots is not None and len(self.snapshots) != self.times.size:
            raise ValueError("snapshots must align with events.")

    def __len__(self) -> int:
        return int(self.times.size)

    def events(self) -> Iterator[Tuple[int, float, Optional[DepthSnapshot]]]:
        for index in range(len(self)):
            snapshot = self.snapshots[index] if self.snapshots is not None else None
            yield int(self.types[index]), float(self.times[index]), snapshot


@dataclass
class EventStreamDataset:
    sequences: List[EventSequence]
    train_indices: List[int] = field(default_factory=list)
    validation_indices: List[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.train_indices and not self.validation_indices:
            self.train_indices = list(range(len(self.sequences)))

    def split(self, validation_fraction: float, seed: int = 0) -> "EventStreamDataset":
        """Returns a copy with a seeded train/validation partition."""
        if not 0.0 <= validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1).")
        order = np.random.default_rng(seed).permutation(len(self.sequences))
        n_valid = int(round(validation_fraction * len(self.sequences)))
        if validation_fraction > 0 and n_valid == 0 and len(self.sequences) > 1:
            n_valid = 1
        return EventStreamDataset(
            sequences=self.sequences,
            train_indices=sorted(int(i) for i in order[n_valid:]),
            validation_indices=sorted(int(i) for i in order[:n_valid]),
        )

    def subset(self, indices: Sequence[int]) -> List[EventSequence]:
        return [self.sequences[index] for index in indices]

    @property
    def train(self) -> List[EventSequence]:
        return self.subset(self.train_indices)

    @property
    def validation(self) -> List[EventSequence]:
        return self.subset(self.validation_indices)

    @property
    def n_events(self) -> int:
        return sum(len(sequence) for sequence in self.sequences)


def simulate_hawkes_dataset(
    params: HawkesParams,
    horizon: float,
    n_sequences: int,
    seed: int,
) -> EventStreamDataset:
    """Draws independent Hawkes streams on ``[0, horizon)``, one seed per sequence."""
    model = HawkesModel(params)
    children = np.random.SeedSequence(seed).spawn(n_sequences)
    sequences = []
    for child in children:
        stream = simulate_stream(model, horizon, np.random.default_rng(child))
        sequences.append(
            EventSequence(
                times=np.array([t for _, t in stream]),
                types=np.array([k for k, _ in stream]),
                horizon=horizon,
            )
        )
    dataset = EventStreamDataset(sequences)
    LOGGER.info("Simulated %d Hawkes sequences with %d events.", n_sequences, dataset.n_events)
    return dataset


# ---------------------------------------------------------------------------
# LOBSTER-style logs
# ---------------------------------------------------------------------------


def read_message_file(path: Path) -> pd.DataFrame:
    """Reads a header-less LOBSTER message CSV (time in seconds after midnight)."""
    if not path.exists():
        raise FileNotFoundError(f"Message file not found: {path}")
    return pd.read_csv(path, header=None, names=list(MESSAGE_COLUMNS))


def read_orderbook_file(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise FileNotFoundError(f"Order book file not found: {path}")
    frame = pd.read_csv(path, header=None)
    if frame.shape[1] % 4:
        raise ValueError(f"{path} has {frame.shape[1]} columns; expected a multiple of four.")
    return frame


def _event_type(kind: int, direction: int) -> Optional[EventType]:
    if kind == MessageKind.SUBMISSION:
        return EventType.of(Side.from_sign(direction), submission=True)
    if kind in (MessageKind.CANCELLATION, 3):
        return EventType.of(Side.from_sign(direction), submission=False)
    return None


def load_lobster_dataset(
    message_paths: Sequence[Path],
    orderbook_paths: Sequence[Path],
    *,
    start_s: Optional[float] = None,
    end_s: Optional[float] = None,
) -> EventStreamDataset:
    """One sequence per log pair; executions are folded into their submission.

    Snapshots are the book rows *before* each event. Equal timestamps are
    nudged apart by one nanosecond to keep times strictly increasing.
    """
    if len(message_paths) != len(orderbook_paths):
        raise ValueError("Need one order book file per message file.")
    sequences = []
    for message_path, book_path in zip(message_paths, orderbook_paths):
        messages = read_message_file(Path(message_path))
        book = read_orderbook_file(Path(book_path))
        if len(messages) != len(book):
            raise ValueError(f"{message_path} and {book_path} differ in length.")
        origin = float(messages["time"].iloc[0]) if start_s is None else start_s
        close = float(messages["time"].iloc[-1]) + 1.0 if end_s is None else end_s
        times: List[float] = []
        types: List[int] = []
        snapshots: List[DepthSnapshot] = []
        previous = None
        for index, row in enumerate(messages.itertuples(index=False)):
            event_type = _event_type(int(row.kind), int(row.direction))
            t = float(row.time) - origin
            if event_type is None or t < 0 or t >= close - origin:
                continue
            if times and t <= times[-1]:
                t = times[-1] + TIE_NUDGE_S
            row_before = book.iloc[index - 1] if index > 0 else book.iloc[index]
            snapshots.append(DepthSnapshot.from_lobster_row(tuple(int(v) for v in row_before)))
            times.append(t)
            types.append(int(event_type))
            previous = t
        horizon = max(close - origin, (previous or 0.0) + TIE_NUDGE_S)
        sequences.append(EventSequence(times=np.array(times), types=np.array(types), horizon=horizon, snapshots=snapshots))
    return EventStreamDataset(sequences)


def _level_volume(snapshot: DepthSnapshot, side: Side, price: int) -> int:
    for level_price, volume in zip(snapshot.prices(side), snapshot.volumes(side)):
        if level_price == price:
            return volume
    return 0


def flag_marketable_rows(messages: pd.DataFrame) -> np.ndarray:
    """Flags type-1 rows directly preceded by executions at the same time."""
    kinds = messages["kind"].to_numpy()
    times = messages["time"].to_numpy()
    flags = np.zeros(len(messages), dtype=bool)
    for index in range(1, len(messages)):
        if kinds[index] == MessageKind.SUBMISSION and kinds[index - 1] == MessageKind.EXECUTION:
            flags[index] = times[index - 1] == times[index]
    return flags


def estimate_order_stats(
    messages: pd.DataFrame,
    book: pd.DataFrame,
    *,
    base: Optional[OrderStatsParams] = None,
) -> OrderStatsParams:
    """Fits P, V1, V2, Mv, Ip and the market-order fraction from a log pair.

    Prices are in ticks and sizes in shares; limit offsets are measured from
    the same-side best before the event. Statistics with no supporting rows
    keep their ``base`` values.
    """
    stats = base or OrderStatsParams()
    marketable = flag_marketable_rows(messages)
    cap = float(stats.volume_cap_lots) + 0.5
    offsets = {1: [], 2: []}
    market_volumes = {1: [], 2: []}
    top_volumes: List[float] = []
    deep_volumes: List[float] = []
    inner = wide_limits = 0
    n_market = n_submissions = 0
    for index in range(1, len(messages)):
        row = messages.iloc[index]
        if int(row["kind"]) != MessageKind.SUBMISSION:
            continue
        before = DepthSnapshot.from_lobster_row(tuple(int(v) for v in book.iloc[index - 1]))
        ask, bid = before.best(Side.ASK), before.best(Side.BID)
        if ask is None or bid is None:
            continue
        spread = ask - bid
        regime = 1 if spread <= 1 else 2
        lots = min(max(float(row["size"]) / stats.lot_size, 1.0), cap)
        n_submissions += 1
        if marketable[index]:
            n_market += 1
            market_volumes[regime].append(lots)
            continue
        side = Side.from_sign(int(row["direction"]))
        best = bid if side is Side.BID else ask
        price = int(row["price"])
        offset = (best - price) * side.sign + 1
        if _level_volume(before, side, price) < stats.level_lower_bound:
            lots = max(1.0, lots - stats.lower_bound_boost / stats.lot_size)
        if regime == 2:
            wide_limits += 1
            if offset == 0:
                inner += 1
                top_volumes.append(lots)
                continue
        if 1 <= offset <= stats.max_level_offset:
            offsets[regime].append(offset)
            (top_volumes if offset == 1 else deep_volumes).append(lots)

    def _fit_discrete(values: List[int], fallback: float) -> float:
        return discrete_power_law_mle(values, stats.max_level_offset).exponent if len(values) >= 2 else fallback

    def _fit_volume(values: List[float], fallback: float) -> float:
        return truncated_power_law_mle(values, 1.0, cap).exponent if len(values) >= 2 else fallback

    fitted = OrderStatsParams(
        price_exponent=(
            _fit_discrete(offsets[1], stats.price_exponent[0]),
            _fit_discrete(offsets[2], stats.price_exponent[1]),
        ),
        top_volume_exponent=_fit_volume(top_volumes, stats.top_volume_exponent),
        deep_volume_exponent=_fit_volume(deep_volumes, stats.deep_volume_exponent),
        market_imbalance=stats.market_imbalance,
        market_volume_exponent=(
            _fit_volume(market_volumes[1], stats.market_volume_exponent[0]),
            _fit_volume(market_volumes[2], stats.market_volume_exponent[1]),
        ),
        level_lower_bound=stats.level_lower_bound,
        inner_spread_prob=inner / wide_limits if wide_limits else stats.inner_spread_prob,
        market_order_fraction=n_market / n_submissions if n_submissions else stats.market_order_fraction,
        lot_size=stats.lot_size,
        volume_cap_lots=stats.volume_cap_lots,
        lower_bound_boost=stats.lower_bound_boost,
        max_level_offset=stats.max_level_offset,
        refill_volume=stats.refill_volume,
    )
    LOGGER.info("Estimated order statistics from %d submissions (%d marketable).", n_submissions, n_market)
    return fitted


def write_dataset_csv(dataset: EventStreamDataset, path: Path) -> Path:
    """Writes ``sequence,time,event_type`` rows."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["sequence", "time", "event_type"])
        for index, sequence in enumerate(dataset.sequences):
            for event_type, t, _ in sequence.events():
                writer.writerow([index, repr(t), event_type])
    return path
