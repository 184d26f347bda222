"""Held-out evaluation of intensity models."""

from __future__ import annotations

import logging
from typing import Any, Optional, Sequence

import numpy as np

from background.intensity import IntensityModel
from calibration.dataset import EventSequence, EventStreamDataset
from core.models import DepthSnapshot

LOGGER = logging.getLogger(__name__)


class UniformIntensity(IntensityModel):
    """Equal constant rate for every type; the 1/K accuracy baseline."""

    def __init__(self, rate: float = 1.0, n_types: int = 4) -> None:
        self.rate = rate
        self.n_types = n_types

    def new_state(self) -> None:
        return None

    def update(self, state: Any, event_type: int, t: float, snapshot: Optional[DepthSnapshot] = None) -> None:
        return None

    def intensity(self, state: Any, t: float) -> np.ndarray:
        return np.full(self.n_types, self.rate)

    def upper_bound(self, state: Any, t: float) -> float:
        return self.rate * self.n_types


def eval_type_accuracy(
    model: IntensityModel,
    dataset: EventStreamDataset,
    *,
    sequences: Optional[Sequence[EventSequence]] = None,
) -> float:
    """Share of events whose argmax-intensity type at arrival equals the true type.

    Ties resolve to the lowest type index. Defaults to the validation split,
    falling back to every sequence when no split was made.
    """
    targets = sequences if sequences is not None else (dataset.validation or dataset.sequences)
    hits = total = 0
    for sequence in targets:
        state = model.new_state()
        for event_type, t, snapshot in sequence.events():
            hits += int(np.argmax(model.intensity(state, t)) == event_type)
            total += 1
            state = model.update(state, event_type, t, snapshot)
    if total == 0:
        LOGGER.warning("No events to evaluate type accuracy on.")
        return float("nan")
    return hits / total


def sequence_log_likelihood(model: IntensityModel, sequence: EventSequence, *, step: float = 0.01) -> float:
    """Log-likelihood through the model's own compensator (exact for Hawkes)."""
    state = model.new_state()
    previous = 0.0
    total = 0.0
    for event_type, t, snapshot in sequence.events():
        total -= model.compensator(state, previous, t, step=step)
        total += float(np.log(model.intensity(state, t)[event_type]))
        state = model.update(state, event_type, t, snapshot)
        previous = t
    total -= model.compensator(state, previous, sequence.horizon, step=step)
    return total


def per_event_nll(model: IntensityModel, sequences: Sequence[EventSequence], *, step: float = 0.01) -> float:
    n_events = sum(len(sequence) for sequence in sequences)
    total = sum(sequence_log_likelihood(model, sequence, step=step) for sequence in sequences)
    return -total / max(n_events, 1)
