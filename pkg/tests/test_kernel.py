from typing import List, Tuple

import pytest

from simulation.agent import Agent
from simulation.kernel import Kernel, LatencyModel, SchedulingError, SimulationError
from simulation.messages import Message, QuoteRequest, Wakeup


class RecordingAgent(Agent):
    def __init__(self, agent_id: int, log: List[Tuple[int, int, str]]) -> None:
        super().__init__(agent_id)
        self.log = log

    def on_wakeup(self, payload: Wakeup, message: Message) -> None:
        self.log.append((self.now, self.agent_id, payload.reason))

    def on_quote_request(self, payload: QuoteRequest, message: Message) -> None:
        self.log.append((self.now, self.agent_id, f"quote-from-{message.sender}"))


class FailingAgent(Agent):
    def on_wakeup(self, payload: Wakeup, message: Message) -> None:
        raise ZeroDivisionError("boom")


def _kernel(**kwargs) -> Kernel:
    return Kernel(start_time=0, market_open=10, market_close=1_000, seed=42, **kwargs)


class TestKernelOrdering:
    def test_delivers_by_time_then_send_order(self) -> None:
        # Arrange
        log: List[Tuple[int, int, str]] = []
        kernel = _kernel()
        first, second = RecordingAgent(1, log), RecordingAgent(2, log)
        kernel.register_all([first, second])
        second.wakeup_at(50, reason="late")
        first.wakeup_at(20, reason="a")
        second.wakeup_at(20, reason="b")

        # Act
        delivered = kernel.run()

        # Assert
        assert delivered == 3
        assert log == [(20, 1, "a"), (20, 2, "b"), (50, 2, "late")]

    def test_pair_latency_is_added_to_sends(self) -> None:
        log: List[Tuple[int, int, str]] = []
        kernel = _kernel(latency=LatencyModel(default_ns=5, pairs={(1, 2): 30}))
        kernel.register_all([RecordingAgent(1, log), RecordingAgent(2, log)])

        kernel.send(1, 2, QuoteRequest(), delay=10)
        kernel.send(2, 1, QuoteRequest())
        kernel.run()

        assert log == [(5, 1, "quote-from-2"), (40, 2, "quote-from-1")]

    def test_messages_after_close_are_dropped(self) -> None:
        log: List[Tuple[int, int, str]] = []
        kernel = _kernel()
        agent = RecordingAgent(1, log)
        kernel.register(agent)
        agent.wakeup_at(999)
        agent.wakeup_at(1_001)

        kernel.run()

        assert [entry[0] for entry in log] == [999]
        assert kernel.dropped_after_close == 1


class TestKernelErrors:
    def test_scheduling_in_the_past_is_rejected(self) -> None:
        kernel = _kernel()
        agent = RecordingAgent(1, [])
        kernel.register(agent)
        agent.wakeup_at(100)
        kernel.run(until=100)

        with pytest.raises(SchedulingError):
            agent.wakeup_at(50)

    def test_negative_delay_is_rejected(self) -> None:
        kernel = _kernel()
        kernel.register(RecordingAgent(1, []))

        with pytest.raises(SchedulingError):
            kernel.send(1, 1, Wakeup(), delay=-1)

    def test_handler_failure_names_the_message(self) -> None:
        kernel = _kernel()
        agent = FailingAgent(3)
        kernel.register(agent)
        agent.wakeup_at(15)

        with pytest.raises(SimulationError) as info:
            kernel.run()

        assert info.value.failed_message.deliver_time == 15
        assert "Wakeup" in str(info.value)

    def test_duplicate_agent_ids_are_rejected(self) -> None:
        kernel = _kernel()
        kernel.register(RecordingAgent(1, []))

        with pytest.raises(ValueError):
            kernel.register(RecordingAgent(1, []))


class TestRandomStreams:
    def test_agent_streams_do_not_depend_on_registration_order(self) -> None:
        # Arrange
        forward, backward = _kernel(), _kernel()
        a1, b1 = RecordingAgent(1, []), RecordingAgent(2, [])
        a2, b2 = RecordingAgent(1, []), RecordingAgent(2, [])

        # Act
        forward.register_all([a1, b1])
        backward.register_all([b2, a2])

        # Assert
        assert a1.rng.random() == a2.rng.random()
        assert b1.rng.random() == b2.rng.random()

    def test_different_seeds_give_different_streams(self) -> None:
        first = Kernel(start_time=0, market_open=1, market_close=2, seed=1).rng_for(5).random(4)
        second = Kernel(start_time=0, market_open=1, market_close=2, seed=2).rng_for(5).random(4)

        assert list(first) != list(second)
