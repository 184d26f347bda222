"""Sparse mean-reverting fundamental value with Bayesian agent estimates.

The realized fundamental follows a continuous-decay Ornstein-Uhlenbeck
update while agent estimates use the discrete ``(1 - gamma) ** delta``
decay. Both forms are kept as written; the discrete time unit is one
nanosecond.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class OUParams:
    """Oracle parameters; rates are per nanosecond, prices in ticks."""

    mu: float = 1_000.0
    gamma: float = 1e-12
    sigma2: float = 2e-10
    sigma_o2: float = 100.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1].")
        if self.sigma2 < 0.0:
            raise ValueError("sigma2 must be non-negative.")
        if self.sigma_o2 <= 0.0:
            raise ValueError("sigma_o2 must be positive.")

    @property
    def stationary_variance(self) -> float:
        """Returns sigma2 / (2 gamma), or infinity for gamma = 0."""
        return math.inf if self.gamma == 0.0 else self.sigma2 / (2.0 * self.gamma)


@dataclass(frozen=True)
class OracleState:
    p_last: float
    t_last: int


@dataclass(frozen=True)
class AgentEstimate:
    p_tilde: float
    var_tilde: float
    t_last_obs: int


def advance(
    state: OracleState,
    params: OUParams,
    t: int,
    rng: Optional[np.random.Generator],
) -> Tuple[float, OracleState]:
    """Draws the fundamental at ``t``; ``rng=None`` forces zero noise."""
    if t < state.t_last:
        raise ValueError(f"Oracle queried at {t} before its last time {state.t_last}.")
    delta = t - state.t_last
    if delta == 0:
        return state.p_last, state
    decay = math.exp(-params.gamma * delta)
    if params.gamma == 0.0:
        variance = params.sigma2 * delta
    else:
        variance = params.sigma2 * -math.expm1(-2.0 * params.gamma * delta) / (2.0 * params.gamma)
    noise = 0.0 if rng is None or variance == 0.0 else rng.normal(0.0, math.sqrt(variance))
    value = params.mu + (state.p_last - params.mu) * decay + noise
    return value, OracleState(p_last=value, t_last=t)


def _discrete_decay(gamma: float, steps: float) -> float:
    """Returns (1 - gamma) ** steps computed through log1p."""
    if steps == 0:
        return 1.0
    if gamma >= 1.0:
        return 0.0
    return math.exp(steps * math.log1p(-gamma))


def prior_update(est: AgentEstimate, params: OUParams, t: int) -> AgentEstimate:
    """Rolls the posterior forward to ``t`` under the discrete decay."""
    delta = t - est.t_last_obs
    if delta < 0:
        raise ValueError("prior_update cannot move an estimate backwards in time.")
    if delta == 0:
        return est
    decay = _discrete_decay(params.gamma, delta)
    decay_sq = _discrete_decay(params.gamma, 2 * delta)
    if params.gamma == 0.0:
        accumulated = float(delta)
    elif params.gamma >= 1.0:
        accumulated = 1.0
    else:
        log_step = math.log1p(-params.gamma)
        accumulated = math.expm1(2.0 * delta * log_step) / math.expm1(2.0 * log_step)
    p_tilde = (1.0 - decay) * params.mu + decay * est.p_tilde
    var_tilde = accumulated * params.sigma2 + decay_sq * est.var_tilde
    return AgentEstimate(p_tilde=p_tilde, var_tilde=var_tilde, t_last_obs=t)


def bayes_observe(est: AgentEstimate, params: OUParams, observation: float) -> AgentEstimate:
    """Fuses one noisy observation into the estimate."""
    total = params.sigma_o2 + est.var_tilde
    p_tilde = (params.sigma_o2 * est.p_tilde + est.var_tilde * observation) / total
    var_tilde = est.var_tilde * params.sigma_o2 / total
    return replace(est, p_tilde=p_tilde, var_tilde=var_tilde)


def project(est: AgentEstimate, params: OUParams, horizon: float) -> float:
    """Projects the posterior mean ``horizon`` time units ahead."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative.")
    decay = _discrete_decay(params.gamma, horizon)
    return (1.0 - decay) * params.mu + decay * est.p_tilde


def initial_estimate(params: OUParams, t: int) -> AgentEstimate:
    """Starts an agent from the stationary belief of the process."""
    variance = params.stationary_variance
    if math.isinf(variance):
        variance = params.sigma_o2
    return AgentEstimate(p_tilde=params.mu, var_tilde=variance, t_last_obs=t)


class SparseMeanRevertingOracle:
    """Lazily advanced fundamental; every query is kept in ``trace``.

    When ``replay`` is given the oracle serves that series (step-wise, last
    value at or before the query time) instead of simulating it.
    """

    def __init__(
        self,
        params: OUParams,
        *,
        start_time: int,
        rng: np.random.Generator,
        replay: Optional[Sequence[Tuple[int, float]]] = None,
    ) -> None:
        self.params = params
        self._state = OracleState(p_last=params.mu, t_last=start_time)
        self._rng = rng
        self._replay_times: List[int] = []
        self._replay_values: List[float] = []
        if replay is not None:
            if not replay:
                raise ValueError("Replay series is empty.")
            ordered = sorted(replay)
            self._replay_times = [int(time) for time, _ in ordered]
            self._replay_values = [float(value) for _, value in ordered]
        self.trace: List[Tuple[int, float]] = []
        self._logger = logging.getLogger(self.__class__.__name__)

    @property
    def is_replay(self) -> bool:
        return bool(self._replay_times)

    def fundamental(self, t: int) -> float:
        """Returns the fundamental at ``t`` and records it in the trace."""
        if self.is_replay:
            index = int(np.searchsorted(self._replay_times, t, side="right")) - 1
            value = self._replay_values[max(index, 0)]
        else:
            value, self._state = advance(self._state, self.params, t, self._rng)
        self.trace.append((t, value))
        return value

    def observe(self, t: int, rng: np.random.Generator) -> float:
        """Returns a noisy observation drawn with the observer's generator."""
        value = self.fundamental(t)
        return value + rng.normal(0.0, math.sqrt(self.params.sigma_o2))


def load_fundamental_series(path: Path) -> List[Tuple[int, float]]:
    """Reads a (time_ns, fundamental) CSV for replay, sorted by time."""
    if not path.exists():
        raise FileNotFoundError(f"Fundamental series not found: {path}")
    frame = pd.read_csv(path)
    missing = {"time_ns", "fundamental"} - set(frame.columns)
    if missing:
        raise ValueError(f"{path} is missing columns: {', '.join(sorted(missing))}")
    frame = frame.sort_values("time_ns", kind="stable")
    series = list(zip(frame["time_ns"].astype("int64").tolist(), frame["fundamental"].astype(float).tolist()))
    LOGGER.info("Loaded %d fundamental values from %s.", len(series), path)
    return series
