import numpy as np
import pytest

from sensitivity.sobol import (
    SensitivityParameter,
    SensitivitySpace,
    column_swapped,
    order_stats_space,
    sobol_total_indices,
)


def _unit_square(criteria=("y",)) -> SensitivitySpace:
    return SensitivitySpace(
        parameters=(SensitivityParameter("x1", 0.5, 0.5), SensitivityParameter("x2", 0.5, 0.5)),
        criteria=tuple(criteria),
    )


class TestSobolIndices:
    def test_additive_model_splits_variance_by_weight(self) -> None:
        # Arrange
        space = _unit_square()

        # Act
        indices = sobol_total_indices(
            space, None, 50_000, np.random.default_rng(0), evaluate=lambda m: m[:, 0] + 2.0 * m[:, 1]
        )

        # Assert
        assert indices.total[0, 0] == pytest.approx(0.2, abs=0.02)
        assert indices.total[1, 0] == pytest.approx(0.8, abs=0.02)
        assert not indices.undefined.any()

    def test_pure_interaction_has_no_first_order_effect(self) -> None:
        space = _unit_square()

        indices = sobol_total_indices(
            space,
            lambda row: [(row[0] - 0.5) * (row[1] - 0.5)],
            5_000,
            np.random.default_rng(1),
            first_order=True,
        )

        assert indices.first_order is not None
        np.testing.assert_allclose(indices.first_order[:, 0], 0.0, atol=0.1)
        np.testing.assert_allclose(indices.total[:, 0], 1.0, atol=0.1)

    def test_constant_criterion_is_undefined(self) -> None:
        space = _unit_square(criteria=("moving", "flat"))

        indices = sobol_total_indices(
            space, None, 200, np.random.default_rng(2), evaluate=lambda m: np.column_stack([m[:, 0], np.ones(len(m))])
        )

        assert list(indices.undefined) == [False, True]
        assert np.isnan(indices.total[:, 1]).all()
        assert np.isnan(indices.standardized[:, 1]).all()
        assert len(indices.rows()) == 4

    def test_fewer_than_two_samples_is_rejected(self) -> None:
        with pytest.raises(ValueError):
            sobol_total_indices(_unit_square(), lambda row: [row[0]], 1, np.random.default_rng(0))

    def test_wrong_response_shape_is_rejected(self) -> None:
        with pytest.raises(ValueError):
            sobol_total_indices(
                _unit_square(criteria=("a", "b")), None, 10, np.random.default_rng(0), evaluate=lambda m: m[:, 0]
            )


class TestSpace:
    def test_column_swap_takes_one_column_from_b(self) -> None:
        a = np.zeros((3, 2))
        b = np.ones((3, 2))

        swapped = column_swapped(a, b, 1)

        np.testing.assert_array_equal(swapped, [[0.0, 1.0]] * 3)
        assert not a.any()

    def test_order_stats_space_covers_all_symbols(self) -> None:
        space = order_stats_space(fluctuations={"P": 0.1})

        assert space.symbols == ["P", "V1", "V2", "Mi", "Mv", "Lb", "Ip"]
        assert space.parameters[0].fluctuation == 0.1
        assert len(space.criteria) == 6

    def test_negative_fluctuation_is_rejected(self) -> None:
        with pytest.raises(ValueError):
            SensitivitySpace(parameters=(SensitivityParameter("x", 0.0, -1.0),), criteria=("y",))
