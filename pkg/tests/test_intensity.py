import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from background.intensity import (
    CTLSTMModel,
    CTLSTMParams,
    HawkesModel,
    HawkesParams,
    ctlstm_intensity,
    default_hawkes_params,
    hawkes_intensity,
    next_event_density,
)
from background.memory import BTMemory
from calibration.dataset import simulate_hawkes_dataset
from calibration.evaluation import UniformIntensity


class TestHawkesIntensity:
    def test_direct_sum_matches_recursive_state(self) -> None:
        # Arrange
        params = default_hawkes_params()
        model = HawkesModel(params)
        history = [(0, 0.10), (2, 0.15), (0, 0.31), (3, 0.32), (1, 0.70)]
        state = model.replay((event_type, time, None) for event_type, time in history)

        # Act
        direct = hawkes_intensity(params, history, 0.9)

        # Assert
        np.testing.assert_allclose(model.intensity(state, 0.9), direct, rtol=1e-12)

    def test_empty_history_is_the_base_rate(self) -> None:
        params = default_hawkes_params()

        np.testing.assert_array_equal(hawkes_intensity(params, [], 3.0), params.mu)

    def test_history_after_the_query_raises(self) -> None:
        with pytest.raises(ValueError):
            hawkes_intensity(default_hawkes_params(), [(0, 2.0)], 1.0)


class TestStationaryRates:
    def test_no_excitation_leaves_the_base_rate(self) -> None:
        params = HawkesParams(mu=np.array([1.0, 3.0]), alpha=np.zeros((2, 2)), delta=np.ones((2, 2)))

        np.testing.assert_allclose(params.stationary_rates(), [1.0, 3.0])

    def test_single_type_rate_is_mu_over_one_minus_branching(self) -> None:
        params = HawkesParams(mu=np.array([2.0]), alpha=np.array([[3.0]]), delta=np.array([[4.0]]))

        assert params.stationary_rates()[0] == pytest.approx(2.0 / (1.0 - 0.75))

    @pytest.mark.slow
    def test_simulated_event_rate_matches_stationary_rate(self) -> None:
        # Arrange
        params = default_hawkes_params()
        horizon = 200.0

        # Act
        dataset = simulate_hawkes_dataset(params, horizon=horizon, n_sequences=4, seed=8)

        # Assert
        empirical = sum(seq.times.size for seq in dataset.sequences) / (4 * horizon)
        assert empirical == pytest.approx(params.stationary_rates().sum(), rel=0.1)


class TestCTLSTMIntensity:
    def test_replay_of_memory_matches_incremental_updates(self) -> None:
        # Arrange
        params = CTLSTMParams.random(np.random.default_rng(5), hidden_size=6)
        model = CTLSTMModel(params)
        memory = BTMemory(length=3)
        state = model.new_state()
        events = [(0, 0.2), (1, 0.5), (2, 0.9), (3, 1.4), (0, 1.5)]
        for event_type, time in events:
            memory.append(event_type, time, None)

        # Act
        for event_type, time, snapshot in memory.as_events():
            state = model.update(state, event_type, time, snapshot)
        replayed = ctlstm_intensity(params, memory.as_events(), 2.0)

        # Assert
        assert [time for _, time, _ in memory.as_events()] == [0.9, 1.4, 1.5]
        np.testing.assert_allclose(replayed, model.intensity(state, 2.0), rtol=1e-12)
        assert np.all(replayed > 0)


class TestNextEventDensity:
    def test_constant_rate_gives_exponential_density(self) -> None:
        # Arrange
        model = UniformIntensity(rate=0.5, n_types=4)

        # Act
        total = next_event_density(model, None, 1.0, 1.5)
        typed = next_event_density(model, None, 1.0, 1.5, event_type=1)

        # Assert: total rate 2.0 over half a second.
        assert total == pytest.approx(2.0 * math.exp(-1.0), rel=1e-9)
        assert typed == pytest.approx(0.5 * math.exp(-1.0), rel=1e-9)

    def test_density_integrates_to_one(self) -> None:
        params = HawkesParams(mu=np.array([1.0]), alpha=np.array([[0.5]]), delta=np.array([[2.0]]))
        model = HawkesModel(params)
        state = model.update(model.new_state(), 0, 0.0)
        grid = np.linspace(0.0005, 12.0, 600)

        densities = [next_event_density(model, state, 0.0, t, step=0.005) for t in grid]

        assert trapezoid(densities, grid) == pytest.approx(1.0, abs=0.02)

    def test_non_increasing_time_raises(self) -> None:
        with pytest.raises(ValueError):
            next_event_density(UniformIntensity(), None, 2.0, 2.0)
