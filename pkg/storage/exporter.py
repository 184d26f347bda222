"""CSV, LOBSTER and JSON export utilities."""

from __future__ import annotations

import csv
import json
import logging
import platform
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Tuple

from core import __version__
from core.recipe_repository import ExperimentRecipe
from simulation.kernel import NS_PER_SECOND
from simulation.session import SimulationResult


def format_time(time_ns: int) -> str:
    """Seconds after midnight with nanosecond digits, exact."""
    return f"{time_ns // NS_PER_SECOND}.{time_ns % NS_PER_SECOND:09d}"


class CSVExporter:
    """Writes run artifacts into one run-scoped directory.

    File names are fixed so a repeated run overwrites rather than accumulates.
    """

    def __init__(self, export_dir: Path) -> None:
        self._export_dir = export_dir
        self._export_dir.mkdir(parents=True, exist_ok=True)
        self._logger = logging.getLogger(self.__class__.__name__)

    @property
    def export_dir(self) -> Path:
        return self._export_dir

    def path(self, filename: str) -> Path:
        file_path = self._export_dir / filename
        file_path.parent.mkdir(parents=True, exist_ok=True)
        return file_path

    def export_dicts(
        self,
        records: Iterable[Mapping[str, object]],
        columns: Sequence[str],
        *,
        filename: str,
    ) -> Path:
        """Exports mapping records to CSV with a header row."""
        file_path = self.path(filename)
        with file_path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(columns))
            writer.writeheader()
            for record in records:
                writer.writerow({column: _stringify(record.get(column, "")) for column in columns})
        self._logger.debug("Wrote %s.", file_path)
        return file_path

    def export_lobster(self, result: SimulationResult, *, prefix: str) -> Tuple[Path, Path]:
        """Writes the header-less message and order book files of the session.

        Row ``i`` of the book file is the depth after message ``i``.
        """
        if len(result.depth_log) != len(result.journal):
            raise ValueError("Depth recording was disabled for this run.")
        message_path = self.path(f"{prefix}_message.csv")
        book_path = self.path(f"{prefix}_orderbook.csv")
        with message_path.open("w", encoding="utf-8", newline="") as messages, book_path.open(
            "w", encoding="utf-8", newline=""
        ) as books:
            message_writer = csv.writer(messages)
            book_writer = csv.writer(books)
            for row, depth in zip(result.journal, result.depth_log):
                if row.time < result.market_open:
                    continue
                message_writer.writerow(
                    [format_time(row.time), int(row.kind), row.order_id, row.volume, row.price, row.side.sign]
                )
                book_writer.writerow(depth)
        self._logger.info("Wrote LOBSTER pair %s / %s.", message_path.name, book_path.name)
        return message_path, book_path

    def export_oracle_trace(self, result: SimulationResult, *, prefix: str) -> Path:
        file_path = self.path(f"{prefix}_fundamental.csv")
        with file_path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["time_ns", "fundamental"])
            writer.writerows((t, repr(value)) for t, value in result.oracle_trace)
        return file_path

    def write_json(self, payload: Any, *, filename: str) -> Path:
        file_path = self.path(filename)
        file_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return file_path

    def write_manifest(
        self,
        recipe: ExperimentRecipe,
        *,
        seeds: Sequence[int],
        extra: Optional[Mapping[str, Any]] = None,
    ) -> Path:
        """Records everything needed to reproduce the run's outputs."""
        manifest = {
            "recipe": recipe.to_dict(),
            "recipe_sha256": recipe.digest(),
            "seeds": list(seeds),
            "code_version": __version__,
            "python": platform.python_version(),
        }
        if extra:
            manifest.update(extra)
        return self.write_json(manifest, filename="manifest.json")


def _stringify(value: object) -> str:
    """Converts a mapping value into a safe string for CSV export."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)
