import math

import numpy as np
import pytest

from simulation.oracle import (
    AgentEstimate,
    OUParams,
    OracleState,
    SparseMeanRevertingOracle,
    advance,
    bayes_observe,
    initial_estimate,
    load_fundamental_series,
    prior_update,
    project,
)


class TestAdvance:
    def test_noiseless_advance_decays_towards_mean(self) -> None:
        # Arrange
        params = OUParams(mu=100.0, gamma=0.1, sigma2=1.0, sigma_o2=1.0)
        state = OracleState(p_last=110.0, t_last=0)

        # Act
        value, new_state = advance(state, params, 5, None)

        # Assert
        assert value == pytest.approx(100.0 + 10.0 * math.exp(-0.5), abs=1e-12)
        assert new_state == OracleState(p_last=value, t_last=5)

    def test_zero_elapsed_time_returns_last_value(self) -> None:
        params = OUParams(mu=100.0, gamma=0.1, sigma2=1.0)
        state = OracleState(p_last=104.0, t_last=7)

        value, new_state = advance(state, params, 7, np.random.default_rng(0))

        assert value == 104.0
        assert new_state is state

    def test_querying_the_past_raises(self) -> None:
        with pytest.raises(ValueError):
            advance(OracleState(p_last=1.0, t_last=10), OUParams(), 9, None)

    @pytest.mark.slow
    def test_stationary_variance_matches_theory(self) -> None:
        # Arrange
        params = OUParams(mu=0.0, gamma=0.5, sigma2=2.0, sigma_o2=1.0)
        rng = np.random.default_rng(11)
        state = OracleState(p_last=0.0, t_last=0)
        values = np.empty(100_000)

        # Act
        for step in range(values.size):
            values[step], state = advance(state, params, step + 1, rng)

        # Assert
        burned = values[1_000:]
        assert np.var(burned) == pytest.approx(params.stationary_variance, rel=0.05)


class TestBeliefUpdates:
    def test_prior_update_hand_values(self) -> None:
        # Arrange
        params = OUParams(mu=100.0, gamma=0.5, sigma2=1.0, sigma_o2=4.0)
        estimate = AgentEstimate(p_tilde=120.0, var_tilde=2.0, t_last_obs=0)

        # Act
        updated = prior_update(estimate, params, 2)

        # Assert: decay (1 - 0.5) ** 2 = 0.25, variance accumulates 1 + 0.25.
        assert updated.p_tilde == pytest.approx(0.75 * 100.0 + 0.25 * 120.0, abs=1e-12)
        assert updated.var_tilde == pytest.approx(1.25 * 1.0 + 0.0625 * 2.0, abs=1e-12)
        assert updated.t_last_obs == 2

    def test_bayes_observe_hand_values(self) -> None:
        params = OUParams(mu=100.0, gamma=0.5, sigma2=1.0, sigma_o2=4.0)
        estimate = AgentEstimate(p_tilde=100.0, var_tilde=4.0, t_last_obs=3)

        fused = bayes_observe(estimate, params, 110.0)

        assert fused.p_tilde == pytest.approx(105.0, abs=1e-12)
        assert fused.var_tilde == pytest.approx(2.0, abs=1e-12)

    def test_projection_reverts_towards_mean(self) -> None:
        params = OUParams(mu=100.0, gamma=0.5, sigma2=1.0, sigma_o2=4.0)
        estimate = AgentEstimate(p_tilde=108.0, var_tilde=1.0, t_last_obs=0)

        assert project(estimate, params, 1) == pytest.approx(104.0, abs=1e-12)
        assert project(estimate, params, 0) == pytest.approx(108.0, abs=1e-12)

    def test_initial_estimate_uses_stationary_belief(self) -> None:
        params = OUParams(mu=50.0, gamma=0.25, sigma2=1.0, sigma_o2=9.0)
        still = OUParams(mu=50.0, gamma=0.0, sigma2=1.0, sigma_o2=9.0)

        assert initial_estimate(params, 0).var_tilde == pytest.approx(2.0)
        assert initial_estimate(still, 0).var_tilde == pytest.approx(9.0)


class TestOracle:
    def test_trace_records_every_query(self) -> None:
        oracle = SparseMeanRevertingOracle(OUParams(), start_time=0, rng=np.random.default_rng(3))

        first = oracle.fundamental(100)
        oracle.observe(200, np.random.default_rng(4))

        assert [t for t, _ in oracle.trace] == [100, 200]
        assert oracle.trace[0][1] == first

    def test_replay_serves_the_last_value_at_or_before_the_query(self, tmp_path) -> None:
        # Arrange
        path = tmp_path / "fundamental.csv"
        path.write_text("time_ns,fundamental\n0,100.0\n50,101.5\n", encoding="utf-8")
        series = load_fundamental_series(path)

        # Act
        oracle = SparseMeanRevertingOracle(OUParams(), start_time=0, rng=np.random.default_rng(0), replay=series)

        # Assert
        assert oracle.is_replay
        assert oracle.fundamental(49) == 100.0
        assert oracle.fundamental(50) == 101.5
        assert oracle.fundamental(10_000) == 101.5

    def test_replay_file_is_sorted_by_time(self, tmp_path) -> None:
        path = tmp_path / "fundamental.csv"
        path.write_text("fundamental,time_ns\n101.5,50\n100.0,0\n", encoding="utf-8")

        assert load_fundamental_series(path) == [(0, 100.0), (50, 101.5)]

    def test_replay_file_without_times_is_rejected(self, tmp_path) -> None:
        path = tmp_path / "fundamental.csv"
        path.write_text("t,fundamental\n0,100.0\n", encoding="utf-8")

        with pytest.raises(ValueError, match="time_ns"):
            load_fundamental_series(path)
