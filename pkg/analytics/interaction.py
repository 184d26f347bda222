"""Criteria comparing markets with and without experimental agents."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from analytics.facts import sample_mid
from analytics.logs import AnalyticsError, MarketLogs
from background.trader import BACKGROUND_AGENT_ID
from core.models import EventType
from simulation.kernel import NS_PER_SECOND
from simulation.session import SimulationResult

LOGGER = logging.getLogger(__name__)

CRITERIA = ("profit", "volume_share", "mid_std", "bt_imbalance", "fundamental_correlation")
EVENT_SHARE_RANGE = (0.001, 0.05)


@dataclass(frozen=True)
class RunTag:
    """Which experimental agents a run carried."""

    agent_kind: str
    count: int
    flow_impact: bool = True

    @property
    def label(self) -> str:
        """Flow-impact-off conditions carry a parenthesized count, e.g. 'MM (15)'."""
        if self.count == 0:
            return "BT only" if self.flow_impact else "BT only (no impact)"
        count = str(self.count) if self.flow_impact else f"({self.count})"
        return f"{self.agent_kind} {count}"


@dataclass(frozen=True)
class InteractionCriteria:
    profit: float
    volume_share: float
    mid_std: float
    bt_imbalance: float
    fundamental_correlation: float
    event_share: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def order_imbalance(ask_sub: int, bid_cancel: int, bid_sub: int, ask_cancel: int) -> float:
    """max(AS+BC, BS+AC) / min(AS+BC, BS+AC) - 1; infinite when one flow is absent."""
    selling = ask_sub + bid_cancel
    buying = bid_sub + ask_cancel
    low, high = min(selling, buying), max(selling, buying)
    if low == 0:
        return math.inf if high > 0 else 0.0
    return high / low - 1.0


def bt_order_imbalance(result: SimulationResult, agent_id: int = BACKGROUND_AGENT_ID) -> float:
    counts = {event_type: 0 for event_type in EventType}
    for event in result.events_by([agent_id]):
        counts[event.event_type] += 1
    return order_imbalance(
        ask_sub=counts[EventType.ASK_SUBMISSION],
        bid_cancel=counts[EventType.BID_CANCELLATION],
        bid_sub=counts[EventType.BID_SUBMISSION],
        ask_cancel=counts[EventType.ASK_CANCELLATION],
    )


def _profit(result: SimulationResult, agent_ids: Sequence[int], final_mid: Optional[float]) -> float:
    """Mean mark-to-market profit at the final mid; agents never filled count as zero."""
    if not agent_ids:
        return 0.0
    profits = []
    for agent_id in agent_ids:
        history = result.accounts.get(agent_id) or []
        if not history:
            profits.append(0.0)
            continue
        _, holdings, cash, _ = history[-1]
        initial = result.initial_cash.get(agent_id, 0)
        profits.append(cash - initial + (holdings * final_mid if final_mid is not None else 0.0))
    return float(np.mean(profits))


def _volume_share(result: SimulationResult, agent_ids: Sequence[int]) -> float:
    wanted = set(agent_ids)
    session = [trade for trade in result.trades if trade.time >= result.market_open]
    total = sum(trade.volume for trade in session)
    if total == 0:
        return 0.0
    involved = sum(
        trade.volume * ((trade.maker_agent_id in wanted) + (trade.taker_agent_id in wanted)) for trade in session
    )
    return involved / (2.0 * total)


def _fundamental_correlation(result: SimulationResult, logs: MarketLogs) -> float:
    """Pearson correlation of queried fundamental values and the mid at the same times."""
    trace = [(t, value) for t, value in result.oracle_trace if result.market_open <= t <= result.market_close]
    if len(trace) < 2:
        return 0.0
    times = np.array([t for t, _ in trace], dtype=float) / NS_PER_SECOND
    values = np.array([value for _, value in trace], dtype=float)
    mids = logs.mid_at(times)
    valid = np.isfinite(mids)
    if valid.sum() < 2 or np.ptp(values[valid]) == 0 or np.ptp(mids[valid]) == 0:
        return 0.0
    return float(stats.pearsonr(values[valid], mids[valid])[0])


def interaction_criteria(
    result: SimulationResult,
    agent_ids: Optional[Sequence[int]] = None,
    *,
    mid_dt: float = 1.0,
) -> InteractionCriteria:
    """Criteria (i)-(v) for one run; ``agent_ids`` default to every strategic agent."""
    if agent_ids is None:
        agent_ids = sorted(agent_id for agent_id, kind in result.agent_kinds.items() if kind != "BT")
    logs = MarketLogs.from_result(result)
    _, mids = sample_mid(logs, mid_dt)
    mids = mids[np.isfinite(mids)]
    if mids.size < 2:
        raise AnalyticsError("Mid-price path has fewer than two samples.")
    n_events = len(result.session_events)
    event_share = len(result.events_by(agent_ids)) / n_events if n_events else 0.0
    if agent_ids and not EVENT_SHARE_RANGE[0] <= event_share <= EVENT_SHARE_RANGE[1]:
        LOGGER.warning(
            "Experimental agents produced %.3f%% of events, outside %.1f%%-%.0f%%.",
            100 * event_share,
            100 * EVENT_SHARE_RANGE[0],
            100 * EVENT_SHARE_RANGE[1],
        )
    return InteractionCriteria(
        profit=_profit(result, agent_ids, logs.last_mid()),
        volume_share=_volume_share(result, agent_ids),
        mid_std=float(np.std(mids, ddof=1)),
        bt_imbalance=bt_order_imbalance(result),
        fundamental_correlation=_fundamental_correlation(result, logs),
        event_share=event_share,
    )


@dataclass(frozen=True)
class WilcoxonResult:
    criterion: str
    first: str
    second: str
    statistic: float
    p_value: float

    @property
    def significant(self) -> bool:
        return math.isfinite(self.p_value) and self.p_value < 0.05


def wilcoxon_compare(first: Sequence[float], second: Sequence[float]) -> Tuple[float, float]:
    """Paired signed-rank test; identical samples give p = 1."""
    a = np.asarray(first, dtype=float)
    b = np.asarray(second, dtype=float)
    if a.size != b.size:
        raise AnalyticsError(f"Paired test needs equal group sizes, got {a.size} and {b.size}.")
    if a.size == 0:
        raise AnalyticsError("Paired test needs at least one pair.")
    differences = a - b
    if not np.any(differences[np.isfinite(differences)]):
        return 0.0, 1.0
    result = stats.wilcoxon(a, b, nan_policy="omit")
    return float(result.statistic), float(result.pvalue)


@dataclass
class InteractionReport:
    table: pd.DataFrame
    tests: List[WilcoxonResult]

    def test_rows(self) -> List[Dict[str, object]]:
        return [
            {
                "criterion": test.criterion,
                "first": test.first,
                "second": test.second,
                "statistic": test.statistic,
                "p_value": test.p_value,
                "significant": test.significant,
            }
            for test in self.tests
        ]


def interaction_stats(
    groups: Mapping[str, Sequence[InteractionCriteria]],
    comparisons: Sequence[Tuple[str, str]] = (),
) -> InteractionReport:
    """Per-group means of each criterion plus Wilcoxon tests on the requested pairs."""
    rows = []
    for label, runs in groups.items():
        frame = pd.DataFrame([run.as_dict() for run in runs])
        means = frame.replace([np.inf, -np.inf], np.nan).mean() if not frame.empty else pd.Series(dtype=float)
        rows.append({"group": label, "runs": len(runs), **{name: float(means.get(name, math.nan)) for name in CRITERIA}})
    table = pd.DataFrame(rows, columns=["group", "runs", *CRITERIA]).set_index("group")

    tests = []
    for first, second in comparisons:
        if first not in groups or second not in groups:
            raise KeyError(f"Unknown group in comparison {first!r} vs {second!r}.")
        for criterion in CRITERIA:
            statistic, p_value = wilcoxon_compare(
                [getattr(run, criterion) for run in groups[first]],
                [getattr(run, criterion) for run in groups[second]],
            )
            tests.append(WilcoxonResult(criterion, first, second, statistic, p_value))
    return InteractionReport(table=table, tests=tests)
