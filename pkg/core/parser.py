"""Strict parsing of JSON configuration payloads into dataclasses."""

from __future__ import annotations

import json
from dataclasses import fields, is_dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Type, TypeVar

T = TypeVar("T")


def load_json(path: Path) -> Any:
    """Reads a JSON document, naming the file in every failure."""
    if not path.exists():
        raise FileNotFoundError(f"JSON file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not valid JSON: {exc}") from exc


def field_names(cls: Type[Any]) -> List[str]:
    if not is_dataclass(cls):
        raise TypeError(f"{cls!r} is not a dataclass.")
    return [item.name for item in fields(cls) if item.init]


def unknown_keys(payload: Mapping[str, Any], allowed: List[str]) -> List[str]:
    return sorted(key for key in payload if key not in allowed)


def _tuplify(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tuplify(item) for item in value)
    return value


def parse_section(
    cls: Type[T],
    payload: Any,
    section: str,
    errors: List[str],
    *,
    converters: Optional[Mapping[str, Callable[[Any], Any]]] = None,
    extra_keys: tuple[str, ...] = (),
) -> Optional[T]:
    """Builds ``cls`` from ``payload`` or records why it cannot.

    Unknown keys are errors. JSON lists become tuples unless a converter
    handles the key. Returns None when any problem was recorded.
    """
    if payload is None:
        payload = {}
    if not isinstance(payload, Mapping):
        errors.append(f"{section}: expected an object, got {type(payload).__name__}.")
        return None
    allowed = field_names(cls)
    stray = [key for key in unknown_keys(payload, allowed) if key not in extra_keys]
    for key in stray:
        errors.append(f"{section}: unknown key '{key}'.")
    converters = converters or {}
    kwargs: Dict[str, Any] = {}
    failed = bool(stray)
    for key, value in payload.items():
        if key not in allowed:
            continue
        try:
            kwargs[key] = converters[key](value) if key in converters else _tuplify(value)
        except (TypeError, ValueError, KeyError, FileNotFoundError) as exc:
            errors.append(f"{section}.{key}: {exc}")
            failed = True
    if failed:
        return None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{section}: {exc}")
        return None
