import json
from pathlib import Path

import pytest

from background.intensity import default_hawkes_params
from config import ConfigValidationError, load_run_config, parse_run_config
from core.recipe_repository import ExperimentRecipe, RecipeRepository
from pipeline.recipes import InteractionParams, POVParams, parse_recipe_params

RECIPES_DIR = Path(__file__).resolve().parents[1] / "recipes"


class TestRunConfig:
    def test_valid_config_parses_every_section(self) -> None:
        # Arrange
        payload = {
            "session": {"duration_s": 60.0, "seed": 3},
            "latency": {"default_ns": 1000, "pairs": [[2, 0, 5000]]},
            "oracle": {"mu": 1000.0, "gamma": 1e-12, "sigma2": 2e-10, "sigma_o2": 100.0},
            "agents": [{"kind": "MM", "count": 2, "params": {"l1": 10, "l2": 30}}],
            "background": {"intensity": "hawkes", "hawkes": default_hawkes_params().to_dict()},
            "order_stats": {},
            "outputs": {"oracle_trace": True},
        }

        # Act
        config = parse_run_config(payload)

        # Assert
        setup = config.simulation
        assert setup.session.duration_s == 60.0
        assert setup.latency.pairs == {(2, 0): 5000}
        assert setup.agents[0].count == 2
        assert setup.background.hawkes is not None
        assert config.outputs.oracle_trace

    def test_every_problem_is_reported_together(self) -> None:
        payload = {
            "bogus": {},
            "session": {"duration_s": -1.0},
            "latency": {"jitter": 3},
        }

        with pytest.raises(ConfigValidationError) as info:
            parse_run_config(payload)

        messages = "\n".join(info.value.errors)
        assert len(info.value.errors) >= 3
        assert "unknown section 'bogus'" in messages
        assert "duration_s" in messages
        assert "jitter" in messages

    def test_order_stats_inside_background_is_rejected(self) -> None:
        with pytest.raises(ConfigValidationError) as info:
            parse_run_config({"background": {"order_stats": {}}})

        assert any("top-level 'order_stats'" in error for error in info.value.errors)

    def test_unknown_agent_kind_is_rejected(self) -> None:
        with pytest.raises(ConfigValidationError) as info:
            parse_run_config({"agents": [{"kind": "XX"}]})

        assert "unknown agent type 'XX'" in info.value.errors[0]

    def test_bad_agent_params_are_rejected(self) -> None:
        with pytest.raises(ConfigValidationError) as info:
            parse_run_config({"agents": [{"kind": "MR", "params": {"l1": 50, "l2": 20}}]})

        assert info.value.errors[0].startswith("agents[0].params")

    def test_fitted_parameters_resolve_relative_to_the_config(self, tmp_path: Path) -> None:
        # Arrange
        (tmp_path / "hawkes.json").write_text(json.dumps(default_hawkes_params().to_dict()), encoding="utf-8")
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps({"background": {"hawkes": "hawkes.json"}}), encoding="utf-8")

        # Act
        config = load_run_config(config_path)

        # Assert
        assert config.simulation.background.hawkes.dim == 4

    def test_missing_parameter_file_is_an_error(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigValidationError):
            parse_run_config({"background": {"hawkes": "absent.json"}}, base_dir=tmp_path)


class TestRecipes:
    def test_stored_recipes_load_and_validate(self) -> None:
        repository = RecipeRepository(RECIPES_DIR)

        for name in ("solo_bt", "interaction", "pov_impact", "sobol", "calibrate", "facts"):
            recipe = repository.load(name)
            parse_recipe_params(name, recipe.params)
            parse_run_config(recipe.run, base_dir=RECIPES_DIR)

    def test_overrides_merge_params_and_change_the_digest(self) -> None:
        # Arrange
        recipe = ExperimentRecipe(name="pov_impact", params={"window_s": 600.0}, repetitions=2, seed=5)

        # Act
        changed = recipe.with_overrides(seed=6, params={"lams": [0.1]})

        # Assert
        assert changed.params == {"window_s": 600.0, "lams": [0.1]}
        assert changed.seed == 6
        assert changed.repetitions == 2
        assert changed.digest() != recipe.digest()
        assert ExperimentRecipe.from_dict(changed.to_dict()).digest() == changed.digest()

    def test_unknown_recipe_name_is_rejected(self) -> None:
        with pytest.raises(ValueError):
            ExperimentRecipe(name="everything")

    def test_zero_participation_rate_is_rejected(self) -> None:
        with pytest.raises(ConfigValidationError):
            parse_recipe_params("pov_impact", {"lams": [0.0, 0.1]})

    def test_interaction_params_parse_with_defaults(self) -> None:
        params = parse_recipe_params("interaction", {"agent_types": ["MM", "ZI"], "counts": [1, 15]})

        assert isinstance(params, InteractionParams)
        assert params.counts == (1, 15)
        assert params.pairs == (("MM", "MR"), ("ZI", "HBL"))

    def test_pov_side_must_be_a_book_side(self) -> None:
        with pytest.raises(ConfigValidationError):
            parse_recipe_params("pov_impact", {"side": "up"})

        assert POVParams(side="ask").side == "ask"
