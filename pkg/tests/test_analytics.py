import math

import numpy as np
import pytest

from analytics.facts import (
    ReturnSeries,
    autocorrelation,
    dfa,
    interarrival_fit,
    ols,
    price_impact_fit,
    return_distribution,
    sign_acf,
    vol_volume_corr,
    volatility_clustering,
)
from analytics.interaction import (
    InteractionCriteria,
    RunTag,
    interaction_stats,
    order_imbalance,
    wilcoxon_compare,
)
from analytics.logs import AnalyticsError


class TestAutocorrelation:
    def test_alternating_signs_are_anti_correlated(self) -> None:
        signs = [1.0, -1.0] * 500

        assert autocorrelation(signs, 1) == pytest.approx(-1.0, abs=1e-2)

    def test_constant_series_is_undefined(self) -> None:
        assert math.isnan(autocorrelation([3.0] * 10, 1))

    def test_lag_beyond_series_is_undefined(self) -> None:
        assert math.isnan(autocorrelation([1.0, 2.0], 2))

    def test_persistent_signs_are_significant(self) -> None:
        signs = np.repeat([1.0, -1.0], 50)

        result = sign_acf(signs)

        assert result.coefficient > 0.9
        assert result.significant


class TestOrderImbalance:
    def test_balanced_flow_has_zero_imbalance(self) -> None:
        assert order_imbalance(10, 0, 10, 0) == 0.0

    def test_one_sided_pressure(self) -> None:
        assert order_imbalance(20, 10, 5, 5) == pytest.approx(2.0)

    def test_missing_flow_is_infinite(self) -> None:
        assert order_imbalance(0, 0, 3, 0) == math.inf
        assert order_imbalance(0, 0, 0, 0) == 0.0


class TestRegression:
    def test_planted_line_has_unit_r_squared(self) -> None:
        x = np.arange(10, dtype=float)

        fit = ols(x, 3.0 * x - 2.0)

        assert fit.slope == pytest.approx(3.0)
        assert fit.intercept == pytest.approx(-2.0)
        assert fit.r_squared == pytest.approx(1.0)

    def test_constant_regressor_is_degenerate(self) -> None:
        fit = ols([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

        assert fit.degenerate
        assert math.isnan(fit.slope)

    def test_price_impact_recovers_planted_exponent(self) -> None:
        # Arrange
        volumes = np.tile(np.arange(1, 21, dtype=float), 10)
        changes = 0.1 * volumes**0.5

        # Act
        fit = price_impact_fit(volumes, changes, n_bins=20, min_trades=100)

        # Assert
        assert fit.beta == pytest.approx(0.5, abs=1e-9)
        assert fit.n_bins == 20
        assert fit.bin_volumes.size == fit.bin_changes.size == 20

    def test_price_impact_without_moves_is_degenerate(self) -> None:
        fit = price_impact_fit([10.0, 20.0, 30.0], [0.0, 0.0, 0.0])

        assert fit.degenerate
        assert fit.n_trades == 0

    def test_price_impact_needs_enough_trades(self) -> None:
        with pytest.raises(AnalyticsError):
            price_impact_fit([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], min_trades=100)


class TestDetrendedFluctuation:
    def test_white_noise_has_half_hurst(self) -> None:
        noise = np.random.default_rng(6).normal(size=20_000)

        assert dfa(noise).hurst == pytest.approx(0.5, abs=0.1)

    def test_random_walk_is_strongly_persistent(self) -> None:
        walk = np.cumsum(np.random.default_rng(6).normal(size=20_000))

        assert dfa(walk).hurst > 1.2

    def test_short_series_is_rejected(self) -> None:
        with pytest.raises(AnalyticsError):
            dfa(np.zeros(100))


class TestInteractionStats:
    def test_identical_samples_give_unit_p_value(self) -> None:
        _, p_value = wilcoxon_compare([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])

        assert p_value == 1.0

    def test_unpaired_sizes_are_rejected(self) -> None:
        with pytest.raises(AnalyticsError):
            wilcoxon_compare([1.0, 2.0], [1.0])

    @pytest.mark.parametrize(
        ("tag", "label"),
        [
            (RunTag("MM", 0), "BT only"),
            (RunTag("MM", 0, flow_impact=False), "BT only (no impact)"),
            (RunTag("MM", 15), "MM 15"),
            (RunTag("HBL", 15, flow_impact=False), "HBL (15)"),
        ],
    )
    def test_run_labels(self, tag: RunTag, label: str) -> None:
        assert tag.label == label

    def test_group_means_and_requested_comparisons(self) -> None:
        # Arrange
        def run(mid_std: float, imbalance: float) -> InteractionCriteria:
            return InteractionCriteria(
                profit=0.0, volume_share=0.1, mid_std=mid_std, bt_imbalance=imbalance, fundamental_correlation=0.0
            )

        groups = {
            "BT only": [run(1.0, 0.1), run(2.0, 0.2), run(3.0, 0.3)],
            "MM 15": [run(2.0, 0.2), run(4.0, math.inf), run(6.0, 0.4)],
        }

        # Act
        report = interaction_stats(groups, [("BT only", "MM 15")])

        # Assert
        assert report.table.loc["BT only", "mid_std"] == pytest.approx(2.0)
        assert report.table.loc["MM 15", "bt_imbalance"] == pytest.approx(0.3)
        assert {row["criterion"] for row in report.test_rows()} == {
            "profit",
            "volume_share",
            "mid_std",
            "bt_imbalance",
            "fundamental_correlation",
        }

    def test_unknown_group_in_comparison_raises(self) -> None:
        with pytest.raises(KeyError):
            interaction_stats({"BT only": []}, [("BT only", "MM 1")])


def _series(returns: np.ndarray, dt: float = 1.0) -> ReturnSeries:
    return ReturnSeries(dt=dt, times=dt * np.arange(1, returns.size + 1), returns=returns)


class TestReturnStatistics:
    def test_gaussian_returns_have_no_excess_kurtosis(self) -> None:
        returns = np.random.default_rng(1).normal(0.0, 1e-3, 50_000)

        result = return_distribution(_series(returns))

        assert result.excess_kurtosis == pytest.approx(0.0, abs=0.1)
        assert result.std == pytest.approx(1e-3, rel=0.02)
        assert result.n == 50_000

    def test_heavy_tails_show_positive_kurtosis(self) -> None:
        returns = np.random.default_rng(2).standard_t(5, 50_000) * 1e-3

        assert return_distribution(_series(returns)).excess_kurtosis > 1.0

    def test_too_few_returns_raise(self) -> None:
        with pytest.raises(AnalyticsError):
            return_distribution(_series(np.array([0.1, -0.1, 0.2])))

    def test_volatility_regimes_cluster(self) -> None:
        # Arrange: blocks of calm and turbulent returns.
        rng = np.random.default_rng(3)
        scales = np.repeat(np.tile([1e-3, 1e-2], 25), 200)
        returns = rng.normal(0.0, 1.0, scales.size) * scales

        # Act
        curve = volatility_clustering(_series(returns))

        # Assert
        assert curve.positive
        assert curve.values[0] > 0.1

    def test_independent_returns_do_not_cluster(self) -> None:
        returns = np.random.default_rng(4).normal(0.0, 1e-3, 10_000)

        curve = volatility_clustering(_series(returns))

        assert abs(curve.values[0]) < 0.05


class TestVolatilityVolume:
    def _returns_and_trades(self, volumes: np.ndarray):
        rng = np.random.default_rng(5)
        scales = np.repeat(1e-3 * np.arange(1, volumes.size + 1), 60)
        returns = rng.normal(0.0, 1.0, scales.size) * scales
        trade_times = 60.0 * np.arange(volumes.size) + 30.0
        return _series(returns), trade_times, volumes

    def test_volume_tracks_volatility(self) -> None:
        # Arrange
        series, trade_times, volumes = self._returns_and_trades(100.0 * np.arange(1, 21))

        # Act
        result = vol_volume_corr(series, trade_times, volumes)

        # Assert
        assert result.n_bins == 20
        assert not result.degenerate
        assert result.rho > 0.8

    def test_constant_volume_is_degenerate(self) -> None:
        series, trade_times, volumes = self._returns_and_trades(np.full(20, 100.0))

        result = vol_volume_corr(series, trade_times, volumes)

        assert result.degenerate
        assert math.isnan(result.rho)

    def test_too_few_bins_raise(self) -> None:
        series, trade_times, volumes = self._returns_and_trades(100.0 * np.arange(1, 6))

        with pytest.raises(AnalyticsError):
            vol_volume_corr(series, trade_times, volumes)


class TestInterarrivalFit:
    def test_exponential_gaps_are_recovered(self) -> None:
        # Arrange
        times = np.cumsum(np.random.default_rng(6).exponential(0.2, 20_000))

        # Act
        result = interarrival_fit(times)

        # Assert
        fits = result.fits
        assert fits["exponential"].log_likelihood <= fits["weibull"].log_likelihood <= fits["exponweib"].log_likelihood
        assert fits["weibull"].params[0] == pytest.approx(1.0, abs=0.05)
        assert fits["exponential"].params[1] == pytest.approx(0.2, rel=0.03)
        assert result.js_divergence < 0.02
        assert result.n_samples == 19_999
        assert result.dropped_ties == 0

    def test_simultaneous_events_are_dropped(self) -> None:
        times = np.cumsum(np.random.default_rng(7).exponential(0.2, 12_000))

        result = interarrival_fit(np.concatenate([times, times[:5]]))

        assert result.dropped_ties == 5
        assert result.n_samples == 11_999

    def test_too_few_gaps_raise(self) -> None:
        with pytest.raises(AnalyticsError):
            interarrival_fit(np.arange(100, dtype=float))
