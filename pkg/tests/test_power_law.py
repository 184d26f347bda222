import numpy as np
import pytest

from background.order_stats import sample_discrete_power_law, sample_pareto, sample_truncated_power_law
from calibration.power_law import (
    discrete_power_law_mle,
    power_law_ks,
    power_law_mle,
    truncated_power_law_mle,
)


class TestPowerLawMLE:
    @pytest.mark.parametrize("alpha", [1.5, 4.7, 1.2, 1.6])
    def test_recovers_exponent_from_large_sample(self, alpha: float) -> None:
        # Arrange
        samples = sample_pareto(alpha, 1.0, np.random.default_rng(17), size=100_000)

        # Act
        fit = power_law_mle(samples, 1.0)

        # Assert
        assert fit.exponent == pytest.approx(alpha, abs=0.05)
        assert fit.n == 100_000
        assert not fit.degenerate

    def test_all_samples_at_x_min_are_degenerate(self) -> None:
        fit = power_law_mle([2.0, 2.0, 2.0], 2.0)

        assert fit.degenerate
        assert fit.exponent == float("inf")

    def test_rejects_samples_below_x_min(self) -> None:
        with pytest.raises(ValueError):
            power_law_mle([0.5, 2.0, 3.0], 1.0)

    def test_rejects_a_single_sample(self) -> None:
        with pytest.raises(ValueError):
            power_law_mle([3.0], 1.0)

    def test_ks_accepts_the_generating_law(self) -> None:
        samples = sample_pareto(2.5, 1.0, np.random.default_rng(5), size=5_000)

        _, p_value = power_law_ks(samples, power_law_mle(samples, 1.0))

        assert p_value > 0.01


class TestTruncatedAndDiscrete:
    def test_truncated_fit_recovers_shallow_exponent(self) -> None:
        # Arrange
        samples = sample_truncated_power_law(0.8, 1.0, 100.0, np.random.default_rng(3), size=50_000)

        # Act
        fit = truncated_power_law_mle(samples, 1.0, 100.0)

        # Assert
        assert fit.exponent == pytest.approx(0.8, abs=0.05)
        assert fit.x_max == 100.0

    def test_truncated_fit_needs_an_ordered_range(self) -> None:
        with pytest.raises(ValueError):
            truncated_power_law_mle([1.0, 2.0], 5.0, 5.0)

    def test_discrete_fit_recovers_exponent(self) -> None:
        samples = sample_discrete_power_law(1.6, 50, np.random.default_rng(8), size=50_000)

        fit = discrete_power_law_mle(samples, 50)

        assert fit.exponent == pytest.approx(1.6, abs=0.05)

    def test_discrete_fit_rejects_fractional_samples(self) -> None:
        with pytest.raises(ValueError):
            discrete_power_law_mle([1.0, 2.5, 3.0], 10)
