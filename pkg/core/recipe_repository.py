"""Experiment recipes stored as JSON files on disk."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from core.parser import load_json, unknown_keys

RECIPE_NAMES = ("solo_bt", "interaction", "pov_impact", "sobol", "calibrate", "facts")
RECIPE_KEYS = ["name", "params", "repetitions", "seed", "run"]


@dataclass(frozen=True)
class ExperimentRecipe:
    """One experiment: its parameter block, repetitions, master seed and run config."""

    name: str
    params: Mapping[str, Any] = field(default_factory=dict)
    repetitions: int = 1
    seed: int = 0
    run: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in RECIPE_NAMES:
            raise ValueError(f"Unknown recipe '{self.name}'; expected one of {', '.join(RECIPE_NAMES)}.")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1.")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "params": json.loads(json.dumps(self.params)),
            "repetitions": self.repetitions,
            "seed": self.seed,
            "run": json.loads(json.dumps(self.run)),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], *, default_repetitions: int = 1) -> "ExperimentRecipe":
        stray = unknown_keys(payload, RECIPE_KEYS)
        if stray:
            raise ValueError(f"Recipe has unknown keys: {', '.join(stray)}.")
        if "name" not in payload:
            raise ValueError("Recipe needs a name.")
        return cls(
            name=str(payload["name"]),
            params=dict(payload.get("params") or {}),
            repetitions=int(payload.get("repetitions", default_repetitions)),
            seed=int(payload.get("seed", 0)),
            run=dict(payload.get("run") or {}),
        )

    def with_overrides(
        self,
        *,
        seed: Optional[int] = None,
        repetitions: Optional[int] = None,
        run: Optional[Mapping[str, Any]] = None,
        params: Optional[Mapping[str, Any]] = None,
    ) -> "ExperimentRecipe":
        """Copy with the given fields replaced; ``params`` entries merge into the existing block."""
        return ExperimentRecipe(
            name=self.name,
            params=self.params if params is None else {**self.params, **params},
            repetitions=self.repetitions if repetitions is None else repetitions,
            seed=self.seed if seed is None else seed,
            run=self.run if run is None else run,
        )

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RecipeRepository:
    """Loads recipes stored in the recipes directory."""

    def __init__(self, base_dir: Path, *, default_repetitions: int = 1) -> None:
        self._base_dir = base_dir
        self._default_repetitions = default_repetitions
        self._cache: Dict[str, ExperimentRecipe] = {}

    def load(self, name: str) -> ExperimentRecipe:
        """Returns the recipe for the given name, caching the result."""
        if name in self._cache:
            return self._cache[name]
        file_path = self._base_dir / f"{name}.json"
        if not file_path.exists():
            raise FileNotFoundError(f"Recipe file not found: {file_path}")
        recipe = ExperimentRecipe.from_dict(load_json(file_path), default_repetitions=self._default_repetitions)
        self._cache[name] = recipe
        return recipe
