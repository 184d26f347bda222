"""Builds one simulated trading session and collects its logs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from agents.base import TradingAgent
from agents.pov import POVAgent, POVConfig
from agents.trend import TrendAgent, TrendConfig
from agents.value import ValueAgent, ValueConfig
from background.trader import BACKGROUND_AGENT_ID, BackgroundConfig, BackgroundTrader, initialize_book
from core.model_registry import ModelRegistry
from core.models import EventRecord, JournalRow, Side, Trade
from matching.order_book import LimitOrderBook
from simulation.exchange import ExchangeAgent
from simulation.kernel import NS_PER_SECOND, Kernel, LatencyModel
from simulation.oracle import OUParams, SparseMeanRevertingOracle, load_fundamental_series

LOGGER = logging.getLogger(__name__)

FIRST_STRATEGIC_ID = BACKGROUND_AGENT_ID + 1
ORACLE_STREAM = 10**6


def _trend_agent(agent_id: int, kind: str, group: "AgentGroup") -> TradingAgent:
    config = TrendConfig(kind=kind, **group.params)
    return TrendAgent(agent_id, config, mean_wakeup_s=group.mean_wakeup_s, initial_cash=group.initial_cash)


def _value_agent(agent_id: int, kind: str, group: "AgentGroup") -> TradingAgent:
    config = ValueConfig(kind=kind, **group.params)
    return ValueAgent(agent_id, config, mean_wakeup_s=group.mean_wakeup_s, initial_cash=group.initial_cash)


def _pov_agent(agent_id: int, kind: str, group: "AgentGroup") -> TradingAgent:
    params = dict(group.params)
    if "side" in params:
        params["side"] = Side(params["side"])
    return POVAgent(agent_id, POVConfig(**params), initial_cash=group.initial_cash)


AGENT_KINDS = ModelRegistry(
    {"MM": _trend_agent, "MR": _trend_agent, "ZI": _value_agent, "HBL": _value_agent, "POV": _pov_agent}
)


@dataclass(frozen=True)
class SessionConfig:
    """Session clock in seconds after midnight; the book is populated before the open."""

    seed: int = 0
    market_open_s: float = 34_200.0
    duration_s: float = 3_600.0
    pre_open_s: float = 1.0
    book_levels: int = 5
    record_depth: bool = True

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive.")
        if not 0 < self.pre_open_s <= self.market_open_s:
            raise ValueError("pre_open_s must be positive and not exceed market_open_s.")
        if self.book_levels < 1:
            raise ValueError("book_levels must be positive.")

    @property
    def market_open(self) -> int:
        return int(round(self.market_open_s * NS_PER_SECOND))

    @property
    def market_close(self) -> int:
        return self.market_open + int(round(self.duration_s * NS_PER_SECOND))

    @property
    def start_time(self) -> int:
        return self.market_open - int(round(self.pre_open_s * NS_PER_SECOND))


@dataclass(frozen=True)
class AgentGroup:
    """``count`` identical strategic agents of one kind."""

    kind: str
    count: int = 1
    mean_wakeup_s: float = 30.0
    initial_cash: int = 0
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"Unknown agent type: {self.kind}")
        if self.count < 0:
            raise ValueError("count must be non-negative.")


@dataclass(frozen=True)
class SimulationSetup:
    """Everything a single session needs, independent of outputs."""

    session: SessionConfig = field(default_factory=SessionConfig)
    latency: LatencyModel = field(default_factory=LatencyModel)
    oracle: OUParams = field(default_factory=OUParams)
    fundamental_csv: Optional[Path] = None
    agents: Tuple[AgentGroup, ...] = ()
    background: BackgroundConfig = field(default_factory=BackgroundConfig)

    def with_seed(self, seed: int) -> "SimulationSetup":
        return replace(self, session=replace(self.session, seed=seed))


@dataclass
class SimulationResult:
    """Logs of one run; ``events`` include the pre-open population."""

    seed: int
    market_open: int
    market_close: int
    events: List[EventRecord]
    trades: List[Trade]
    journal: List[JournalRow]
    depth_log: List[Tuple[int, ...]]
    agent_kinds: Dict[int, str]
    accounts: Dict[int, List[Tuple[int, int, int, float]]]
    initial_cash: Dict[int, int]
    decisions: Dict[int, List[Tuple[int, Any]]]
    oracle_trace: List[Tuple[int, float]]
    bt_diagnostics: Dict[str, Any] = field(default_factory=dict)
    bt_memory_appended: int = 0
    pre_open_orders: int = 0
    delivered: int = 0
    rejections: int = 0

    @property
    def session_events(self) -> List[EventRecord]:
        return [event for event in self.events if event.time >= self.market_open]

    def events_by(self, agent_ids: Sequence[int]) -> List[EventRecord]:
        wanted = set(agent_ids)
        return [event for event in self.session_events if event.agent_id in wanted]

    def agents_of_kind(self, kind: str) -> List[int]:
        return sorted(agent_id for agent_id, agent_kind in self.agent_kinds.items() if agent_kind == kind)


@dataclass
class Session:
    kernel: Kernel
    exchange: ExchangeAgent
    background: Optional[BackgroundTrader]
    agents: List[TradingAgent]
    pre_open_orders: int


def build_agents(groups: Sequence[AgentGroup], first_id: int = FIRST_STRATEGIC_ID) -> List[TradingAgent]:
    """Instantiates the roster with consecutive ids in configuration order."""
    agents: List[TradingAgent] = []
    agent_id = first_id
    for group in groups:
        factory = AGENT_KINDS.get(group.kind)
        for _ in range(group.count):
            agents.append(factory(agent_id, group.kind, group))
            agent_id += 1
    return agents


def build_session(setup: SimulationSetup) -> Session:
    """Wires exchange, oracle, background trader and strategic agents into a kernel."""
    session = setup.session
    replay = None
    if setup.fundamental_csv is not None:
        replay = load_fundamental_series(Path(setup.fundamental_csv))
    kernel = Kernel(
        start_time=session.start_time,
        market_open=session.market_open,
        market_close=session.market_close,
        seed=session.seed,
        latency=setup.latency,
    )
    kernel.oracle = SparseMeanRevertingOracle(
        setup.oracle,
        start_time=session.start_time,
        rng=kernel.rng_for(ORACLE_STREAM),
        replay=replay,
    )
    book = LimitOrderBook(n_levels=session.book_levels, record_depth=session.record_depth)
    exchange = ExchangeAgent(book, broadcast_levels=session.book_levels)
    kernel.register(exchange)

    pre_open = initialize_book(
        book,
        kernel.rng_for(BACKGROUND_AGENT_ID, 1),
        start_time=session.start_time,
        best_bid=setup.background.reference_price,
        agent_id=BACKGROUND_AGENT_ID,
        config=setup.background.pre_open,
    )

    background = None
    if setup.background.enabled:
        background = BackgroundTrader(setup.background)
        kernel.register(background)
        exchange.subscribe(background.agent_id)

    agents = build_agents(setup.agents)
    kernel.register_all(agents)
    return Session(kernel=kernel, exchange=exchange, background=background, agents=agents, pre_open_orders=pre_open)


def run_simulation(setup: SimulationSetup) -> SimulationResult:
    """Runs one session to the close and returns its logs."""
    built = build_session(setup)
    kernel, exchange = built.kernel, built.exchange
    LOGGER.debug("Running seed %d with %d strategic agents.", setup.session.seed, len(built.agents))
    kernel.run(until=setup.session.market_close)

    book = exchange.book
    agent_kinds = {agent.agent_id: agent.kind for agent in built.agents}
    if built.background is not None:
        agent_kinds[built.background.agent_id] = "BT"
    return SimulationResult(
        seed=setup.session.seed,
        market_open=kernel.market_open,
        market_close=kernel.market_close,
        events=list(book.event_log),
        trades=list(book.trades),
        journal=list(book.journal),
        depth_log=list(book.depth_log),
        agent_kinds=agent_kinds,
        accounts={agent.agent_id: list(agent.account_history) for agent in built.agents},
        initial_cash={agent.agent_id: agent.state.initial_cash for agent in built.agents},
        decisions={agent.agent_id: list(agent.decisions) for agent in built.agents},
        oracle_trace=list(kernel.oracle.trace),
        bt_diagnostics=built.background.diagnostics.to_dict() if built.background else {},
        bt_memory_appended=built.background.memory.total_appended if built.background else 0,
        pre_open_orders=built.pre_open_orders,
        delivered=kernel.delivered,
        rejections=exchange.rejections,
    )
