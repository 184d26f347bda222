"""Ogata thinning for the background trader's next event."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

import numpy as np

from background.intensity import IntensityModel

LOGGER = logging.getLogger(__name__)
BOUND_TOLERANCE = 1e-9


@dataclass
class ThinningDiagnostics:
    proposals: int = 0
    rejections: int = 0
    bound_refreshes: int = 0

    @property
    def acceptance_rate(self) -> float:
        return 0.0 if self.proposals == 0 else 1.0 - self.rejections / self.proposals


def thinning_sample(
    model: IntensityModel,
    state: Any,
    t_prev: float,
    rng: np.random.Generator,
    *,
    diagnostics: Optional[ThinningDiagnostics] = None,
    max_proposals: int = 1_000_000,
) -> Tuple[int, float]:
    """Draws ``(event_type, t_next)`` with ``t_next > t_prev``.

    Candidates are exponential with the current bound's rate and accepted with
    probability ``lambda_total / bound``; the bound is refreshed after every
    rejection. A candidate whose intensity exceeds the bound is counted and
    restarts sampling from that candidate time with a fresh bound.
    """
    stats = diagnostics if diagnostics is not None else ThinningDiagnostics()
    t = t_prev
    bound = model.upper_bound(state, t)
    for _ in range(max_proposals):
        if not np.isfinite(bound) or bound <= 0.0:
            raise ValueError(f"Invalid intensity bound {bound} at t={t}.")
        candidate = t + rng.exponential(1.0 / bound)
        if candidate <= t_prev:
            continue
        stats.proposals += 1
        rates = model.intensity(state, candidate)
        total = float(rates.sum())
        if total > bound * (1.0 + BOUND_TOLERANCE):
            stats.bound_refreshes += 1
            LOGGER.debug("Intensity %.6g exceeded bound %.6g; refreshing.", total, bound)
            t = candidate
            bound = model.upper_bound(state, t)
            continue
        if rng.uniform() * bound <= total:
            event_type = int(rng.choice(len(rates), p=rates / total))
            return event_type, candidate
        stats.rejections += 1
        t = candidate
        bound = model.upper_bound(state, t)
    raise RuntimeError(f"Thinning gave up after {max_proposals} proposals.")


def simulate_stream(
    model: IntensityModel,
    horizon: float,
    rng: np.random.Generator,
    *,
    diagnostics: Optional[ThinningDiagnostics] = None,
) -> List[Tuple[int, float]]:
    """Samples a full event stream on ``[0, horizon)`` by repeated thinning."""
    state = model.new_state()
    events: List[Tuple[int, float]] = []
    t = 0.0
    while True:
        event_type, t = thinning_sample(model, state, t, rng, diagnostics=diagnostics)
        if t >= horizon:
            return events
        events.append((event_type, t))
        state = model.update(state, event_type, t)
