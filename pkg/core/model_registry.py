"""Registry mapping configuration selectors to implementation classes."""

from __future__ import annotations

from typing import Any, Iterator, Mapping


class ModelRegistry:
    """Simple registry that maps semantic names to classes."""

    def __init__(self, models: Mapping[str, Any]) -> None:
        self._models = dict(models)

    def get(self, name: str) -> Any:
        """Returns the class registered under ``name``."""
        try:
            return self._models[name]
        except KeyError as exc:
            known = ", ".join(sorted(self._models))
            raise KeyError(f"Unknown selector '{name}'; expected one of: {known}") from exc

    def names(self) -> list[str]:
        return sorted(self._models)

    def __contains__(self, name: object) -> bool:
        return name in self._models

    def __iter__(self) -> Iterator[str]:
        return iter(self._models)
