"""Base class for anything the kernel delivers messages to."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Optional

import numpy as np

from simulation.messages import HANDLER_NAMES, Message, Payload, Wakeup

if TYPE_CHECKING:  # pragma: no cover
    from simulation.kernel import Kernel

EXCHANGE_ID = 0


class Agent:
    """Dispatches each payload to an ``on_<payload>`` hook; unknown hooks are no-ops."""

    def __init__(self, agent_id: int, name: Optional[str] = None) -> None:
        self.agent_id = agent_id
        self.name = name or f"{self.__class__.__name__}-{agent_id}"
        self.kernel: Optional["Kernel"] = None
        self.rng: Optional[np.random.Generator] = None
        self._logger = logging.getLogger(self.__class__.__name__)

    def attach(self, kernel: "Kernel") -> None:
        self.kernel = kernel
        self.rng = kernel.rng_for(self.agent_id)

    @property
    def now(self) -> int:
        return self._kernel.now

    @property
    def _kernel(self) -> "Kernel":
        if self.kernel is None:
            raise RuntimeError(f"{self.name} is not attached to a kernel.")
        return self.kernel

    def kernel_starting(self, start_time: int) -> None:
        """Called once before the first delivery."""

    def kernel_stopping(self, end_time: int) -> None:
        """Called once after the queue drains."""

    def receive(self, message: Message) -> None:
        handler = getattr(self, HANDLER_NAMES[type(message.payload)], None)
        if handler is not None:
            handler(message.payload, message)

    def send(self, recipient: int, payload: Payload, *, delay: int = 0) -> Message:
        return self._kernel.send(self.agent_id, recipient, payload, delay=delay)

    def send_to_exchange(self, payload: Payload, *, delay: int = 0) -> Message:
        return self.send(EXCHANGE_ID, payload, delay=delay)

    def wakeup_at(self, time: int, *, reason: str = "wakeup", token: int = 0) -> Message:
        """Schedules a self-addressed wakeup at an absolute time."""
        return self._kernel.send_at(
            self.agent_id, self.agent_id, Wakeup(reason=reason, token=token), time
        )
