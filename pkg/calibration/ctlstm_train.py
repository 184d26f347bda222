"""Desk-scale training of the CT-LSTM intensity with torch (CPU, float64)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from background.intensity import FEATURE_DIM, N_GATES, CTLSTMParams, event_features
from calibration.dataset import EventSequence, EventStreamDataset
from core.models import NUM_EVENT_TYPES

LOGGER = logging.getLogger(__name__)

DTYPE = torch.float64


class GradientCheckError(RuntimeError):
    """Analytic and finite-difference gradients disagree."""


@dataclass(frozen=True)
class TrainingConfig:
    hidden_size: int = 16
    epochs: int = 20
    learning_rate: float = 0.05
    momentum: float = 0.9
    lr_step_epochs: int = 8
    lr_decay: float = 0.5
    mc_points: int = 10
    eval_mc_points: int = 50
    weight_scale: float = 0.1
    max_grad_norm: float = 10.0
    seed: int = 0
    gradient_tolerance: float = 1e-4
    gradient_check: bool = True

    def __post_init__(self) -> None:
        if self.hidden_size < 1 or self.epochs < 0 or self.mc_points < 1:
            raise ValueError("hidden_size and mc_points must be positive, epochs non-negative.")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive.")


@dataclass
class TrainingResult:
    params: CTLSTMParams
    train_nll: List[float] = field(default_factory=list)
    validation_nll: float = math.nan
    poisson_nll: float = math.nan
    gradient_error: float = math.nan


class CTLSTMNetwork(nn.Module):
    """Autograd mirror of ``background.intensity.CTLSTMModel``."""

    def __init__(self, n_types: int = NUM_EVENT_TYPES, hidden_size: int = 16, input_dim: int = FEATURE_DIM) -> None:
        super().__init__()
        self.n_types = n_types
        self.hidden_size = hidden_size
        self.input_dim = input_dim
        self.weights = nn.Parameter(torch.zeros(n_types, N_GATES, hidden_size, input_dim, dtype=DTYPE))
        self.recurrent = nn.Parameter(torch.zeros(n_types, N_GATES, hidden_size, hidden_size, dtype=DTYPE))
        self.bias = nn.Parameter(torch.zeros(n_types, N_GATES, hidden_size, dtype=DTYPE))
        self.decoder = nn.Parameter(torch.zeros(n_types, hidden_size, dtype=DTYPE))
        self.decoder_bias = nn.Parameter(torch.zeros(n_types, dtype=DTYPE))
        self.log_scale = nn.Parameter(torch.zeros(n_types, dtype=DTYPE))

    @classmethod
    def from_params(cls, params: CTLSTMParams) -> "CTLSTMNetwork":
        network = cls(params.n_types, params.hidden_size, params.input_dim)
        with torch.no_grad():
            network.weights.copy_(torch.as_tensor(params.weights, dtype=DTYPE))
            network.recurrent.copy_(torch.as_tensor(params.recurrent, dtype=DTYPE))
            network.bias.copy_(torch.as_tensor(params.bias, dtype=DTYPE))
            network.decoder.copy_(torch.as_tensor(params.decoder, dtype=DTYPE))
            network.decoder_bias.copy_(torch.as_tensor(params.decoder_bias, dtype=DTYPE))
            network.log_scale.copy_(torch.log(torch.as_tensor(params.scale, dtype=DTYPE)))
        return network

    def to_params(self) -> CTLSTMParams:
        with torch.no_grad():
            return CTLSTMParams(
                weights=self.weights.numpy().copy(),
                recurrent=self.recurrent.numpy().copy(),
                bias=self.bias.numpy().copy(),
                decoder=self.decoder.numpy().copy(),
                decoder_bias=self.decoder_bias.numpy().copy(),
                scale=torch.exp(self.log_scale).numpy().copy(),
            )

    # ------------------------------------------------------------- forward
    def step(self, state: Optional[Tuple[torch.Tensor, ...]], features: torch.Tensor, t: float) -> Tuple:
        if state is None:
            zeros = torch.zeros(self.n_types, self.hidden_size, dtype=DTYPE)
            hidden, cell_now, cell_bar = zeros, zeros, zeros
        else:
            cell_now = self._cell(state, torch.tensor([t], dtype=DTYPE))[0]
            hidden = state[4] * torch.tanh(cell_now)
            cell_bar = state[2]
        pre = (
            torch.einsum("kgdi,i->kgd", self.weights, features)
            + torch.einsum("kgde,ke->kgd", self.recurrent, hidden)
            + self.bias
        )
        gate_in = torch.sigmoid(pre[:, 0])
        gate_forget = torch.sigmoid(pre[:, 1])
        candidate = torch.tanh(pre[:, 2])
        gate_out = torch.sigmoid(pre[:, 3])
        gate_in_bar = torch.sigmoid(pre[:, 4])
        gate_forget_bar = torch.sigmoid(pre[:, 5])
        decay = nn.functional.softplus(pre[:, 6])
        return (
            t,
            gate_forget * cell_now + gate_in * candidate,
            gate_forget_bar * cell_bar + gate_in_bar * candidate,
            decay,
            gate_out,
        )

    @staticmethod
    def _cell(state: Tuple, times: torch.Tensor) -> torch.Tensor:
        last_time, cell, cell_bar, decay, _ = state
        age = torch.clamp(times - last_time, min=0.0).reshape(-1, 1, 1)
        return cell_bar + (cell - cell_bar) * torch.exp(-decay * age)

    def intensity(self, state: Tuple, times: torch.Tensor) -> torch.Tensor:
        """Per-type intensity at each of ``times``; shape ``(len(times), K)``."""
        hidden = state[4] * torch.tanh(self._cell(state, times))
        logits = (self.decoder * hidden).sum(dim=-1) + self.decoder_bias
        return torch.exp(self.log_scale) * nn.functional.softplus(logits)

    def bos_state(self) -> Tuple:
        return self.step(None, torch.zeros(self.input_dim, dtype=DTYPE), 0.0)

    def sequence_nll(
        self,
        times: torch.Tensor,
        types: torch.Tensor,
        features: torch.Tensor,
        horizon: float,
        uniforms: torch.Tensor,
    ) -> torch.Tensor:
        """Negative log-likelihood with a Monte-Carlo compensator.

        ``uniforms`` has one row of points per interval, including the final
        interval up to ``horizon``.
        """
        state = self.bos_state()
        previous = 0.0
        nll = torch.zeros((), dtype=DTYPE)
        for index in range(times.shape[0]):
            t = float(times[index])
            width = t - previous
            grid = previous + uniforms[index] * width
            nll = nll + width * self.intensity(state, grid).sum(dim=1).mean()
            nll = nll - torch.log(self.intensity(state, times[index : index + 1])[0, types[index]])
            state = self.step(state, features[index], t)
            previous = t
        width = horizon - previous
        grid = previous + uniforms[-1] * width
        return nll + width * self.intensity(state, grid).sum(dim=1).mean()


def _tensors(sequence: EventSequence, input_dim: int) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    features = np.stack(
        [event_features(event_type, snapshot)[:input_dim] for event_type, _, snapshot in sequence.events()]
    ) if len(sequence) else np.zeros((0, input_dim))
    return (
        torch.as_tensor(sequence.times, dtype=DTYPE),
        torch.as_tensor(sequence.types, dtype=torch.long),
        torch.as_tensor(features, dtype=DTYPE),
    )


def _uniforms(n_events: int, points: int, generator: torch.Generator) -> torch.Tensor:
    return torch.rand(n_events + 1, points, generator=generator, dtype=DTYPE)


def evaluate_nll(
    network: CTLSTMNetwork,
    sequences: Sequence[EventSequence],
    *,
    mc_points: int = 50,
    seed: int = 0,
) -> float:
    """Per-event NLL over ``sequences``."""
    generator = torch.Generator().manual_seed(seed)
    total, n_events = 0.0, 0
    with torch.no_grad():
        for sequence in sequences:
            times, types, features = _tensors(sequence, network.input_dim)
            uniforms = _uniforms(len(sequence), mc_points, generator)
            total += float(network.sequence_nll(times, types, features, sequence.horizon, uniforms))
            n_events += len(sequence)
    return total / max(n_events, 1)


def poisson_baseline_nll(train: Sequence[EventSequence], validation: Sequence[EventSequence]) -> float:
    """Per-event NLL of per-type constant rates fitted on ``train``."""
    exposure = sum(sequence.horizon for sequence in train)
    counts = np.zeros(NUM_EVENT_TYPES)
    for sequence in train:
        counts += np.bincount(sequence.types, minlength=NUM_EVENT_TYPES)[:NUM_EVENT_TYPES]
    rates = np.maximum(counts, 0.5) / exposure
    total, n_events = 0.0, 0
    for sequence in validation:
        total += rates.sum() * sequence.horizon - np.log(rates[sequence.types]).sum()
        n_events += len(sequence)
    return float(total / max(n_events, 1))


def gradient_check(
    seed: int,
    *,
    hidden_size: int = 4,
    n_events: int = 8,
    n_coordinates: int = 24,
    epsilon: float = 1e-6,
    tolerance: float = 1e-4,
) -> float:
    """Compares autograd with central differences on a random small network.

    Returns the largest relative error; raises ``GradientCheckError`` when it
    exceeds ``tolerance``.
    """
    rng = np.random.default_rng(seed)
    params = CTLSTMParams.random(rng, hidden_size, weight_scale=0.5)
    network = CTLSTMNetwork.from_params(params)
    times = np.cumsum(rng.exponential(0.5, size=n_events))
    sequence = EventSequence(
        times=times,
        types=rng.integers(0, NUM_EVENT_TYPES, size=n_events),
        horizon=float(times[-1] + 1.0),
    )
    tensors = _tensors(sequence, network.input_dim)
    uniforms = _uniforms(n_events, 5, torch.Generator().manual_seed(seed))

    def loss() -> torch.Tensor:
        return network.sequence_nll(*tensors, sequence.horizon, uniforms)

    network.zero_grad()
    loss().backward()
    analytic = torch.cat([p.grad.reshape(-1) for p in network.parameters()]).detach().clone()
    vector = nn.utils.parameters_to_vector(network.parameters()).detach().clone()
    coordinates = rng.choice(vector.numel(), size=min(n_coordinates, vector.numel()), replace=False)

    worst = 0.0
    with torch.no_grad():
        for index in coordinates:
            values = []
            for sign in (1.0, -1.0):
                shifted = vector.clone()
                shifted[index] += sign * epsilon
                nn.utils.vector_to_parameters(shifted, network.parameters())
                values.append(float(loss()))
            numeric = (values[0] - values[1]) / (2.0 * epsilon)
            exact = float(analytic[index])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-4)
            worst = max(worst, error)
        nn.utils.vector_to_parameters(vector, network.parameters())
    if worst > tolerance:
        raise GradientCheckError(f"Gradient check failed for seed {seed}: relative error {worst:.3e}.")
    return worst


def ctlstm_train(
    dataset: EventStreamDataset,
    config: Optional[TrainingConfig] = None,
    *,
    n_types: int = NUM_EVENT_TYPES,
    input_dim: int = FEATURE_DIM,
) -> TrainingResult:
    """Fits CT-LSTM weights by SGD with step decay on the training split."""
    cfg = config or TrainingConfig()
    torch.manual_seed(cfg.seed)
    gradient_error = gradient_check(cfg.seed, tolerance=cfg.gradient_tolerance) if cfg.gradient_check else math.nan

    train = dataset.train
    if not train:
        raise ValueError("Training split is empty.")
    validation = dataset.validation or train
    exposure = sum(sequence.horizon for sequence in train)
    counts = np.zeros(n_types)
    for sequence in train:
        counts += np.bincount(sequence.types, minlength=n_types)[:n_types]

    rng = np.random.default_rng(cfg.seed)
    params = CTLSTMParams.random(rng, cfg.hidden_size, weight_scale=cfg.weight_scale, n_types=n_types, input_dim=input_dim)
    params = CTLSTMParams(
        weights=params.weights,
        recurrent=params.recurrent,
        bias=params.bias,
        decoder=params.decoder,
        decoder_bias=params.decoder_bias,
        scale=np.maximum(counts, 0.5) / exposure / math.log(2.0),
    )
    network = CTLSTMNetwork.from_params(params)
    optimizer = torch.optim.SGD(network.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum)
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=max(1, cfg.lr_step_epochs), gamma=cfg.lr_decay)
    generator = torch.Generator().manual_seed(cfg.seed)
    prepared = [(_tensors(sequence, input_dim), sequence) for sequence in train]

    result = TrainingResult(params=params, gradient_error=gradient_error)
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(prepared))
        epoch_total, epoch_events = 0.0, 0
        for index in order:
            tensors, sequence = prepared[index]
            if len(sequence) == 0:
                continue
            uniforms = _uniforms(len(sequence), cfg.mc_points, generator)
            optimizer.zero_grad()
            loss = network.sequence_nll(*tensors, sequence.horizon, uniforms) / len(sequence)
            loss.backward()
            nn.utils.clip_grad_norm_(network.parameters(), cfg.max_grad_norm)
            optimizer.step()
            epoch_total += float(loss) * len(sequence)
            epoch_events += len(sequence)
        scheduler.step()
        result.train_nll.append(epoch_total / max(epoch_events, 1))
        LOGGER.info("Epoch %d: train NLL %.5f per event.", epoch + 1, result.train_nll[-1])

    result.params = network.to_params()
    result.validation_nll = evaluate_nll(network, validation, mc_points=cfg.eval_mc_points, seed=cfg.seed)
    result.poisson_nll = poisson_baseline_nll(train, validation)
    if result.validation_nll > result.poisson_nll:
        LOGGER.warning(
            "CT-LSTM validation NLL %.5f exceeds the Poisson baseline %.5f.",
            result.validation_nll,
            result.poisson_nll,
        )
    return result
