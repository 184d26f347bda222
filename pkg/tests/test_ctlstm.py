import math

import numpy as np
import pytest
import torch

from background.intensity import CTLSTMModel, CTLSTMParams, event_features
from calibration.ctlstm_train import (
    CTLSTMNetwork,
    GradientCheckError,
    TrainingConfig,
    ctlstm_train,
    gradient_check,
)
from calibration.dataset import EventSequence, EventStreamDataset
from core.models import DepthSnapshot


class TestGradientCheck:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_autograd_matches_central_differences(self, seed: int) -> None:
        assert gradient_check(seed) < 1e-4

    def test_impossible_tolerance_raises(self) -> None:
        with pytest.raises(GradientCheckError):
            gradient_check(0, tolerance=0.0)


class TestNetworkMirror:
    def test_torch_and_numpy_intensities_agree(self) -> None:
        # Arrange
        params = CTLSTMParams.random(np.random.default_rng(12), 6, weight_scale=0.3)
        model = CTLSTMModel(params)
        network = CTLSTMNetwork.from_params(params)

        # Act
        expected = model.intensity(model.new_state(), 0.4)
        with torch.no_grad():
            actual = network.intensity(network.bos_state(), torch.tensor([0.4], dtype=torch.float64))[0].numpy()

        # Assert
        np.testing.assert_allclose(actual, expected, rtol=1e-10)

    def test_intensities_agree_after_a_stream_of_events(self) -> None:
        # Arrange
        params = CTLSTMParams.random(np.random.default_rng(31), 5, weight_scale=0.5)
        model = CTLSTMModel(params)
        network = CTLSTMNetwork.from_params(params)
        book = DepthSnapshot(
            ask_prices=(101, 102), ask_volumes=(300, 500), bid_prices=(99, 98), bid_volumes=(400, 200)
        )
        events = [(0, 0.10, None), (2, 0.35, book), (1, 0.36, None), (3, 0.90, book), (0, 1.70, None), (2, 1.71, book)]
        queries = np.linspace(1.72, 4.0, 10)

        # Act
        state = model.new_state()
        with torch.no_grad():
            torch_state = network.bos_state()
            for event_type, t, snapshot in events:
                state = model.update(state, event_type, t, snapshot)
                features = torch.as_tensor(event_features(event_type, snapshot)[: params.input_dim], dtype=torch.float64)
                torch_state = network.step(torch_state, features, t)
            actual = network.intensity(torch_state, torch.as_tensor(queries, dtype=torch.float64)).numpy()
        expected = np.stack([model.intensity(state, t) for t in queries])

        # Assert
        np.testing.assert_allclose(actual, expected, rtol=1e-10, atol=1e-10)

    def test_zero_weights_give_scaled_log_two(self) -> None:
        # Arrange
        params = CTLSTMParams.zeros(4)
        params.scale = np.array([0.5, 1.0, 2.0, 3.0])
        model = CTLSTMModel(params)

        # Act
        state = model.update(model.new_state(), 1, 0.3)

        # Assert
        np.testing.assert_allclose(model.intensity(state, 0.8), params.scale * math.log(2.0), rtol=1e-12)
        np.testing.assert_allclose(model.intensity(model.new_state(), 0.1), params.scale * math.log(2.0), rtol=1e-12)

    def test_params_survive_a_network_round_trip(self) -> None:
        params = CTLSTMParams.random(np.random.default_rng(2), 3)

        restored = CTLSTMNetwork.from_params(params).to_params()

        np.testing.assert_allclose(restored.weights, params.weights)
        np.testing.assert_allclose(restored.scale, params.scale)


class TestTraining:
    def test_short_training_run_reports_finite_losses(self) -> None:
        # Arrange
        rng = np.random.default_rng(1)
        sequences = []
        for _ in range(4):
            times = np.cumsum(rng.exponential(0.2, size=30))
            sequences.append(EventSequence(times=times, types=rng.integers(0, 4, size=30), horizon=float(times[-1] + 0.5)))
        dataset = EventStreamDataset(sequences).split(0.25, seed=0)
        config = TrainingConfig(hidden_size=4, epochs=2, mc_points=4, eval_mc_points=8, gradient_check=False)

        # Act
        result = ctlstm_train(dataset, config)

        # Assert
        assert len(result.train_nll) == 2
        assert all(math.isfinite(value) for value in result.train_nll)
        assert math.isfinite(result.validation_nll)
        assert math.isfinite(result.poisson_nll)
        assert math.isnan(result.gradient_error)

    def test_invalid_training_config_is_rejected(self) -> None:
        with pytest.raises(ValueError):
            TrainingConfig(learning_rate=0.0)

    @pytest.mark.slow
    def test_constant_rate_stream_is_learned_as_constant(self) -> None:
        # Arrange: four independent Poisson types at 0.5 events per second each.
        rng = np.random.default_rng(8)
        sequences = []
        for _ in range(4):
            times = np.sort(rng.uniform(0.0, 1_000.0, rng.poisson(2_000)))
            sequences.append(EventSequence(times=times, types=rng.integers(0, 4, size=times.size), horizon=1_000.0))
        dataset = EventStreamDataset(sequences)
        exposure = sum(sequence.horizon for sequence in sequences)
        empirical = np.bincount(np.concatenate([s.types for s in sequences]), minlength=4) / exposure
        config = TrainingConfig(hidden_size=4, epochs=6, mc_points=5, eval_mc_points=5, gradient_check=False)

        # Act
        result = ctlstm_train(dataset, config)

        # Assert
        model = CTLSTMModel(result.params)
        sequence = sequences[0]
        state = model.new_state()
        samples = []
        for (event_type, t, snapshot), t_next in zip(sequence.events(), np.append(sequence.times[1:], sequence.horizon)):
            state = model.update(state, event_type, t, snapshot)
            samples.append(model.intensity(state, 0.5 * (t + t_next)))
        np.testing.assert_allclose(np.mean(samples, axis=0), empirical, rtol=0.05)
        assert empirical.sum() == pytest.approx(2.0, rel=0.05)
