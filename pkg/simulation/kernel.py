"""Discrete-event kernel: a clock, a message heap and seeded agent streams."""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from simulation.messages import Message, Payload

if TYPE_CHECKING:  # pragma: no cover
    from simulation.agent import Agent
    from simulation.oracle import SparseMeanRevertingOracle

NS_PER_SECOND = 1_000_000_000


class SchedulingError(ValueError):
    """Raised when a message is scheduled before the current clock."""


class SimulationError(RuntimeError):
    """Raised when a handler fails; names the message being delivered."""

    def __init__(self, message: Message, cause: BaseException) -> None:
        super().__init__(f"Handler failed on {message.describe()}: {cause!r}")
        self.failed_message = message


@dataclass
class LatencyModel:
    """Constant latency per (sender, recipient) pair, in nanoseconds."""

    default_ns: int = 0
    pairs: Dict[Tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.default_ns < 0 or any(value < 0 for value in self.pairs.values()):
            raise ValueError("Latencies must be non-negative.")

    def delay(self, sender: int, recipient: int) -> int:
        return self.pairs.get((sender, recipient), self.default_ns)


@dataclass(frozen=True)
class KernelClock:
    now: int
    market_open: int
    market_close: int


class Kernel:
    """Delivers messages in ``(deliver_time, seq)`` order until the queue drains.

    Every agent draws from its own ``numpy`` generator derived from the master
    seed and the agent id through ``SeedSequence`` spawn keys, so the streams
    do not depend on registration order.
    """

    def __init__(
        self,
        *,
        start_time: int,
        market_open: int,
        market_close: int,
        seed: int,
        latency: Optional[LatencyModel] = None,
        oracle: Optional["SparseMeanRevertingOracle"] = None,
    ) -> None:
        if not start_time <= market_open < market_close:
            raise ValueError("Expected start_time <= market_open < market_close.")
        self.now = start_time
        self.market_open = market_open
        self.market_close = market_close
        self.seed = seed
        self.latency = latency or LatencyModel()
        self.oracle = oracle
        self._agents: Dict[int, "Agent"] = {}
        self._queue: List[Message] = []
        self._seq = 0
        self.delivered = 0
        self.dropped_after_close = 0
        self._logger = logging.getLogger(self.__class__.__name__)

    # ----------------------------------------------------------- registration
    def register(self, agent: "Agent") -> None:
        """Adds an agent; ids must be unique."""
        if agent.agent_id in self._agents:
            raise ValueError(f"Agent id {agent.agent_id} is already registered.")
        self._agents[agent.agent_id] = agent
        agent.attach(self)

    def register_all(self, agents: Iterable["Agent"]) -> None:
        for agent in agents:
            self.register(agent)

    def has_agent(self, agent_id: int) -> bool:
        return agent_id in self._agents

    def agent(self, agent_id: int) -> "Agent":
        return self._agents[agent_id]

    @property
    def agents(self) -> Mapping[int, "Agent"]:
        return dict(self._agents)

    def rng_for(self, agent_id: int, *streams: int) -> np.random.Generator:
        """Returns the generator owned by ``agent_id`` (plus optional sub-streams)."""
        sequence = np.random.SeedSequence(self.seed, spawn_key=(agent_id, *streams))
        return np.random.default_rng(sequence)

    @property
    def clock(self) -> KernelClock:
        return KernelClock(now=self.now, market_open=self.market_open, market_close=self.market_close)

    # ------------------------------------------------------------- scheduling
    def schedule(self, message: Message) -> None:
        """Enqueues a fully-formed message; past deliveries are rejected."""
        if message.deliver_time < self.now:
            raise SchedulingError(
                f"Cannot schedule {message.describe()} before now={self.now}."
            )
        heapq.heappush(self._queue, message)

    def send(self, sender: int, recipient: int, payload: Payload, *, delay: int = 0) -> Message:
        """Builds and schedules a message with the pair latency applied."""
        if delay < 0:
            raise SchedulingError(f"Negative delay {delay} from agent {sender}.")
        deliver_time = self.now + delay + self.latency.delay(sender, recipient)
        message = Message(
            deliver_time=deliver_time,
            seq=self._next_seq(),
            sender=sender,
            recipient=recipient,
            payload=payload,
            send_time=self.now,
        )
        self.schedule(message)
        return message

    def send_at(self, sender: int, recipient: int, payload: Payload, time: int) -> Message:
        """Schedules delivery at an absolute time (latency not applied)."""
        message = Message(
            deliver_time=time,
            seq=self._next_seq(),
            sender=sender,
            recipient=recipient,
            payload=payload,
            send_time=self.now,
        )
        self.schedule(message)
        return message

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    # -------------------------------------------------------------------- run
    def run(self, until: Optional[int] = None) -> int:
        """Drains the queue; returns the number of delivered messages.

        Messages due after ``market_close`` (or ``until``) are dropped. A
        handler exception aborts the run as ``SimulationError``.
        """
        horizon = self.market_close if until is None else min(until, self.market_close)
        for agent in list(self._agents.values()):
            agent.kernel_starting(self.now)

        while self._queue:
            message = heapq.heappop(self._queue)
            if message.deliver_time > horizon:
                self.dropped_after_close += 1 + len(self._queue)
                self._queue.clear()
                break
            self.now = message.deliver_time
            recipient = self._agents.get(message.recipient)
            if recipient is None:
                raise SimulationError(message, KeyError(f"unknown recipient {message.recipient}"))
            try:
                recipient.receive(message)
            except SimulationError:
                raise
            except Exception as error:
                self._logger.error("Aborting run: %s", message.describe())
                raise SimulationError(message, error) from error
            self.delivered += 1

        for agent in list(self._agents.values()):
            agent.kernel_stopping(self.now)
        self._logger.debug(
            "Kernel delivered %d messages, dropped %d after close.",
            self.delivered,
            self.dropped_after_close,
        )
        return self.delivered
