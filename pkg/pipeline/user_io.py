"""Console output helpers."""

from __future__ import annotations

import math
from typing import Any, Mapping, Optional, Sequence

from rich.console import Console
from rich.table import Table


class ConsoleIO:
    """Prints run progress, result tables and gate verdicts. Runs are batch; nothing is read back."""

    def __init__(self, console: Optional[Console] = None) -> None:
        self._console = console or Console()

    def display_status(self, message: str) -> None:
        """Prints a status message."""
        self._console.print(f"[bold cyan][status][/] {message}")

    def display_table(self, title: str, columns: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> None:
        table = Table(title=title)
        for column in columns:
            table.add_column(column)
        for row in rows:
            table.add_row(*(self._format(row.get(column, "")) for column in columns))
        self._console.print(table)

    def display_gates(self, recipe: str, gates: Mapping[str, bool]) -> None:
        """Prints one line per acceptance gate and a closing verdict."""
        if not gates:
            self._console.print(f"[yellow]{recipe}: no acceptance gates configured.[/]")
            return
        table = Table(title=f"{recipe} gates")
        table.add_column("gate")
        table.add_column("result")
        for name, passed in gates.items():
            table.add_row(name, "[green]pass[/]" if passed else "[red]FAIL[/]")
        self._console.print(table)
        failed = sum(not passed for passed in gates.values())
        if failed:
            self._console.print(f"[bold red]{failed} of {len(gates)} gates failed.[/]")
        else:
            self._console.print(f"[bold green]All {len(gates)} gates passed.[/]")

    @staticmethod
    def _format(value: Any) -> str:
        if isinstance(value, float):
            return "nan" if math.isnan(value) else f"{value:.4g}"
        return str(value)
