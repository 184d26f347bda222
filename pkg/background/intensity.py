"""Event-intensity models for the background trader.

Two implementations share the ``IntensityModel`` interface: a multivariate
Hawkes process with exponential kernels and a bank of continuous-time LSTM
units (one per event type) decoded through a scaled softplus. Model time is
in seconds; states are updated in place once per appended event.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from core.models import NUM_EVENT_TYPES, DepthSnapshot

GATES = ("input", "forget", "cell", "output", "input_bar", "forget_bar", "decay")
N_GATES = len(GATES)
FEATURE_LEVELS = 5
FEATURE_DIM = NUM_EVENT_TYPES + 2 * FEATURE_LEVELS + 1
VOLUME_SCALE = 1e4


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def event_features(event_type: Optional[int], snapshot: Optional[DepthSnapshot]) -> np.ndarray:
    """One-hot event type, scaled top-level volumes and the excess spread."""
    features = np.zeros(FEATURE_DIM)
    if event_type is not None:
        features[int(event_type)] = 1.0
    if snapshot is not None:
        levels = min(FEATURE_LEVELS, snapshot.n_levels)
        offset = NUM_EVENT_TYPES
        features[offset : offset + levels] = np.asarray(snapshot.ask_volumes[:levels]) / VOLUME_SCALE
        offset += FEATURE_LEVELS
        features[offset : offset + levels] = np.asarray(snapshot.bid_volumes[:levels]) / VOLUME_SCALE
        ask, bid = snapshot.ask_prices[0], snapshot.bid_prices[0]
        if ask is not None and bid is not None:
            features[-1] = float(ask - bid - 1)
    return features


class IntensityModel(ABC):
    """Conditional intensity over the four event types."""

    n_types: int = NUM_EVENT_TYPES

    @abstractmethod
    def new_state(self) -> Any:
        """Returns the state before any event."""

    @abstractmethod
    def update(
        self, state: Any, event_type: int, t: float, snapshot: Optional[DepthSnapshot] = None
    ) -> Any:
        """Folds one event at time ``t`` into the state."""

    @abstractmethod
    def intensity(self, state: Any, t: float) -> np.ndarray:
        """Returns the per-type intensity at ``t`` (no event since the last update)."""

    @abstractmethod
    def upper_bound(self, state: Any, t: float) -> float:
        """Returns a bound on the total intensity over ``[t, inf)``."""

    def compensator(self, state: Any, t0: float, t1: float, *, step: float = 0.01) -> float:
        """Integrates the total intensity over ``[t0, t1]`` by the trapezoid rule."""
        if t1 <= t0:
            return 0.0
        points = max(2, int(math.ceil((t1 - t0) / step)) + 1)
        grid = np.linspace(t0, t1, points)
        values = np.array([self.intensity(state, t).sum() for t in grid])
        return float(trapezoid(values, grid))

    def replay(self, events: Iterable[Tuple[int, float, Optional[DepthSnapshot]]]) -> Any:
        """Builds the state after a chronological event sequence."""
        state = self.new_state()
        for event_type, t, snapshot in events:
            state = self.update(state, event_type, t, snapshot)
        return state


# ---------------------------------------------------------------------------
# Hawkes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HawkesParams:
    """``alpha[k, j]`` is the jump in type-k intensity caused by a type-j event."""

    mu: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray

    def __post_init__(self) -> None:
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        dim = mu.shape[0]
        alpha = np.asarray(self.alpha, dtype=float).reshape(dim, dim)
        delta = np.broadcast_to(np.asarray(self.delta, dtype=float), (dim, dim)).copy()
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta", delta)
        self.validate()

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    def validate(self) -> None:
        if np.any(self.mu <= 0):
            raise ValueError("Hawkes base rates must be positive.")
        if np.any(self.delta <= 0):
            raise ValueError("Hawkes decays must be positive.")
        if np.any(self.alpha < 0):
            raise ValueError("Hawkes excitations must be non-negative.")
        radius = self.spectral_radius
        if radius >= 1.0:
            raise ValueError(f"Hawkes parameters are not stationary (spectral radius {radius:.4f}).")

    @property
    def branching_matrix(self) -> np.ndarray:
        return self.alpha / self.delta

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.branching_matrix))))

    def stationary_rates(self) -> np.ndarray:
        """Returns the long-run per-type event rates (I - alpha/delta)^-1 mu."""
        return np.linalg.solve(np.eye(self.dim) - self.branching_matrix, self.mu)

    def to_dict(self) -> Dict[str, Any]:
        return {"mu": self.mu.tolist(), "alpha": self.alpha.tolist(), "delta": self.delta.tolist()}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "HawkesParams":
        return cls(mu=np.asarray(payload["mu"]), alpha=np.asarray(payload["alpha"]), delta=np.asarray(payload["delta"]))


def default_hawkes_params() -> HawkesParams:
    """Moderately self-exciting four-type process, branching ratio 0.55."""
    alpha = np.full((NUM_EVENT_TYPES, NUM_EVENT_TYPES), 1.0)
    np.fill_diagonal(alpha, 6.0)
    # Submissions and cancellations on the same side excite each other.
    alpha[0, 1] = alpha[1, 0] = 3.0
    alpha[2, 3] = alpha[3, 2] = 3.0
    return HawkesParams(mu=np.array([2.0, 1.5, 2.0, 1.5]), alpha=alpha, delta=np.full_like(alpha, 20.0))


@dataclass
class HawkesState:
    last_time: float
    excitation: np.ndarray


def hawkes_intensity(
    params: HawkesParams, history: Sequence[Tuple[int, float]], t: float
) -> np.ndarray:
    """Direct evaluation of mu + sum over past events of alpha * exp(-delta * age)."""
    rates = params.mu.copy()
    for event_type, time in history:
        if time >= t:
            raise ValueError("History must precede the query time.")
        rates += params.alpha[:, event_type] * np.exp(-params.delta[:, event_type] * (t - time))
    return rates


class HawkesModel(IntensityModel):
    """Recursive exponential-kernel Hawkes intensity."""

    def __init__(self, params: HawkesParams) -> None:
        self.params = params
        self.n_types = params.dim

    def new_state(self) -> HawkesState:
        return HawkesState(last_time=0.0, excitation=np.zeros((self.n_types, self.n_types)))

    def update(
        self, state: HawkesState, event_type: int, t: float, snapshot: Optional[DepthSnapshot] = None
    ) -> HawkesState:
        if t < state.last_time:
            raise ValueError("Events must be appended in time order.")
        state.excitation *= np.exp(-self.params.delta * (t - state.last_time))
        state.excitation[:, event_type] += self.params.alpha[:, event_type]
        state.last_time = t
        return state

    def intensity(self, state: HawkesState, t: float) -> np.ndarray:
        decay = np.exp(-self.params.delta * max(t - state.last_time, 0.0))
        return self.params.mu + (state.excitation * decay).sum(axis=1)

    def upper_bound(self, state: HawkesState, t: float) -> float:
        return float(self.intensity(state, t).sum())

    def compensator(self, state: HawkesState, t0: float, t1: float, *, step: float = 0.01) -> float:
        """Exact integral for exponential kernels."""
        if t1 <= t0:
            return 0.0
        age0 = max(t0 - state.last_time, 0.0)
        age1 = max(t1 - state.last_time, 0.0)
        kernel = (np.exp(-self.params.delta * age0) - np.exp(-self.params.delta * age1)) / self.params.delta
        return float(self.params.mu.sum() * (t1 - t0) + (state.excitation * kernel).sum())


# ---------------------------------------------------------------------------
# Continuous-time LSTM
# ---------------------------------------------------------------------------


@dataclass
class CTLSTMParams:
    """Weights of ``n_types`` parallel CT-LSTM units.

    Shapes: ``weights`` (K, 7, d, n_in), ``recurrent`` (K, 7, d, d), ``bias``
    (K, 7, d), ``decoder`` (K, d), ``decoder_bias`` (K,), ``scale`` (K,).
    Gate order follows ``GATES``.
    """

    weights: np.ndarray
    recurrent: np.ndarray
    bias: np.ndarray
    decoder: np.ndarray
    decoder_bias: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        for name in ("weights", "recurrent", "bias", "decoder", "decoder_bias", "scale"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n_types, n_gates, hidden, _ = self.weights.shape
        if n_gates != N_GATES:
            raise ValueError(f"Expected {N_GATES} gates, got {n_gates}.")
        if self.recurrent.shape != (n_types, N_GATES, hidden, hidden):
            raise ValueError("Recurrent weights do not match the declared hidden size.")
        if self.bias.shape != (n_types, N_GATES, hidden) or self.decoder.shape != (n_types, hidden):
            raise ValueError("Bias or decoder shapes do not match the declared hidden size.")
        if np.any(self.scale <= 0):
            raise ValueError("Decoder scales must be positive.")

    @property
    def n_types(self) -> int:
        return int(self.weights.shape[0])

    @property
    def hidden_size(self) -> int:
        return int(self.weights.shape[2])

    @property
    def input_dim(self) -> int:
        return int(self.weights.shape[3])

    @classmethod
    def zeros(cls, hidden_size: int = 16, *, n_types: int = NUM_EVENT_TYPES, input_dim: int = FEATURE_DIM) -> "CTLSTMParams":
        return cls(
            weights=np.zeros((n_types, N_GATES, hidden_size, input_dim)),
            recurrent=np.zeros((n_types, N_GATES, hidden_size, hidden_size)),
            bias=np.zeros((n_types, N_GATES, hidden_size)),
            decoder=np.zeros((n_types, hidden_size)),
            decoder_bias=np.zeros(n_types),
            scale=np.ones(n_types),
        )

    @classmethod
    def random(
        cls,
        rng: np.random.Generator,
        hidden_size: int = 16,
        *,
        n_types: int = NUM_EVENT_TYPES,
        input_dim: int = FEATURE_DIM,
        weight_scale: float = 0.1,
    ) -> "CTLSTMParams":
        return cls(
            weights=rng.normal(0.0, weight_scale, (n_types, N_GATES, hidden_size, input_dim)),
            recurrent=rng.normal(0.0, weight_scale, (n_types, N_GATES, hidden_size, hidden_size)),
            bias=rng.normal(0.0, weight_scale, (n_types, N_GATES, hidden_size)),
            decoder=rng.normal(0.0, weight_scale, (n_types, hidden_size)),
            decoder_bias=rng.normal(0.0, weight_scale, n_types),
            scale=np.exp(rng.normal(0.0, weight_scale, n_types)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hidden_size": self.hidden_size,
            "weights": self.weights.tolist(),
            "recurrent": self.recurrent.tolist(),
            "bias": self.bias.tolist(),
            "decoder": self.decoder.tolist(),
            "decoder_bias": self.decoder_bias.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "CTLSTMParams":
        params = cls(
            weights=np.asarray(payload["weights"]),
            recurrent=np.asarray(payload["recurrent"]),
            bias=np.asarray(payload["bias"]),
            decoder=np.asarray(payload["decoder"]),
            decoder_bias=np.asarray(payload["decoder_bias"]),
            scale=np.asarray(payload["scale"]),
        )
        declared = payload.get("hidden_size")
        if declared is not None and int(declared) != params.hidden_size:
            raise ValueError(f"Declared hidden size {declared} != weights {params.hidden_size}.")
        return params


@dataclass
class CTLSTMState:
    """Cell values right after the last event plus the decay targets."""

    last_time: float
    cell: np.ndarray
    cell_bar: np.ndarray
    decay: np.ndarray
    output: np.ndarray
    n_events: int = field(default=0)


class CTLSTMModel(IntensityModel):
    """Parallel CT-LSTM intensity; unit k drives the type-k intensity."""

    def __init__(self, params: CTLSTMParams) -> None:
        self.params = params
        self.n_types = params.n_types

    def hidden(self, state: CTLSTMState, t: float) -> np.ndarray:
        age = max(t - state.last_time, 0.0)
        cell = state.cell_bar + (state.cell - state.cell_bar) * np.exp(-state.decay * age)
        return state.output * np.tanh(cell)

    def _step(self, state: Optional[CTLSTMState], features: np.ndarray, t: float) -> CTLSTMState:
        p = self.params
        hidden_size = p.hidden_size
        if state is None:
            hidden = np.zeros((self.n_types, hidden_size))
            cell_now = np.zeros((self.n_types, hidden_size))
            cell_bar = np.zeros((self.n_types, hidden_size))
        else:
            age = max(t - state.last_time, 0.0)
            cell_now = state.cell_bar + (state.cell - state.cell_bar) * np.exp(-state.decay * age)
            hidden = state.output * np.tanh(cell_now)
            cell_bar = state.cell_bar
        pre = (
            np.einsum("kgdi,i->kgd", p.weights, features)
            + np.einsum("kgde,ke->kgd", p.recurrent, hidden)
            + p.bias
        )
        gate_in = sigmoid(pre[:, 0])
        gate_forget = sigmoid(pre[:, 1])
        candidate = np.tanh(pre[:, 2])
        gate_out = sigmoid(pre[:, 3])
        gate_in_bar = sigmoid(pre[:, 4])
        gate_forget_bar = sigmoid(pre[:, 5])
        decay = softplus(pre[:, 6])
        return CTLSTMState(
            last_time=t,
            cell=gate_forget * cell_now + gate_in * candidate,
            cell_bar=gate_forget_bar * cell_bar + gate_in_bar * candidate,
            decay=decay,
            output=gate_out,
            n_events=0 if state is None else state.n_events + 1,
        )

    def new_state(self) -> CTLSTMState:
        """Starts from a beginning-of-stream step with an all-zero input."""
        return self._step(None, np.zeros(self.params.input_dim), 0.0)

    def update(
        self, state: CTLSTMState, event_type: int, t: float, snapshot: Optional[DepthSnapshot] = None
    ) -> CTLSTMState:
        if t < state.last_time:
            raise ValueError("Events must be appended in time order.")
        features = event_features(event_type, snapshot)[: self.params.input_dim]
        return self._step(state, features, t)

    def _decode(self, hidden: np.ndarray) -> np.ndarray:
        p = self.params
        return p.scale * softplus((p.decoder * hidden).sum(axis=1) + p.decoder_bias)

    def intensity(self, state: CTLSTMState, t: float) -> np.ndarray:
        return self._decode(self.hidden(state, t))

    def upper_bound(self, state: CTLSTMState, t: float) -> float:
        """Each cell moves monotonically towards ``cell_bar``, bounding every hidden unit."""
        p = self.params
        now = self.hidden(state, t) * p.decoder
        limit = state.output * np.tanh(state.cell_bar) * p.decoder
        logits = np.maximum(now, limit).sum(axis=1) + p.decoder_bias
        return float((p.scale * softplus(logits)).sum())


def ctlstm_intensity(
    params: CTLSTMParams,
    memory: Sequence[Tuple[int, float, Optional[DepthSnapshot]]],
    t: float,
) -> np.ndarray:
    """Replays ``memory`` through the units and decodes the intensity at ``t``."""
    model = CTLSTMModel(params)
    return model.intensity(model.replay(memory), t)


def next_event_density(
    model: IntensityModel,
    state: Any,
    t_prev: float,
    t: float,
    *,
    event_type: Optional[int] = None,
    step: float = 0.01,
) -> float:
    """Density of the next arrival at ``t`` given no event in ``(t_prev, t)``."""
    if t <= t_prev:
        raise ValueError("t must exceed t_prev.")
    rates = model.intensity(state, t)
    rate = rates.sum() if event_type is None else rates[event_type]
    return float(rate * math.exp(-model.compensator(state, t_prev, t, step=step)))
