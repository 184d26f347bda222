import csv
import json
from pathlib import Path

import pytest

from analytics.logs import MarketLogs
from analytics.report import FACT_NAMES, compute_facts
from main import EXIT_INVALID_CONFIG, main
from simulation.session import AgentGroup, SessionConfig, SimulationSetup, run_simulation
from storage.exporter import CSVExporter

RECIPES_DIR = Path(__file__).resolve().parents[1] / "recipes"


def _setup(seed: int) -> SimulationSetup:
    return SimulationSetup(
        session=SessionConfig(seed=seed, duration_s=60.0),
        agents=(
            AgentGroup(kind="ZI", count=2, mean_wakeup_s=5.0),
            AgentGroup(kind="MM", count=1, mean_wakeup_s=5.0),
        ),
    )


@pytest.mark.slow
class TestSession:
    def test_same_seed_reproduces_the_session(self) -> None:
        first = run_simulation(_setup(7))
        second = run_simulation(_setup(7))

        assert first.journal == second.journal
        assert first.trades == second.trades
        assert first.oracle_trace == second.oracle_trace

    def test_different_seeds_diverge(self) -> None:
        assert run_simulation(_setup(7)).journal != run_simulation(_setup(8)).journal

    def test_session_logs_export_and_analyze(self, tmp_path: Path) -> None:
        # Arrange
        result = run_simulation(_setup(3))
        exporter = CSVExporter(tmp_path)

        # Act
        message_path, book_path = exporter.export_lobster(result, prefix="session")
        report = compute_facts(MarketLogs.from_result(result))

        # Assert
        with message_path.open(encoding="utf-8", newline="") as handle:
            messages = list(csv.reader(handle))
        with book_path.open(encoding="utf-8", newline="") as handle:
            books = list(csv.reader(handle))
        assert messages and len(messages) == len(books)
        assert all(float(row[0]) >= 34_200.0 for row in messages)
        assert result.agent_kinds[1] == "BT"
        assert sorted(kind for agent, kind in result.agent_kinds.items() if agent > 1) == ["MM", "ZI", "ZI"]
        assert [entry.name for entry in report] == list(FACT_NAMES)


class TestCommandLine:
    def test_invalid_run_config_exits_with_code_two(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        # Arrange
        monkeypatch.setenv("RECIPES_DIR", str(RECIPES_DIR))
        monkeypatch.setenv("EXPORT_DIR", str(tmp_path))
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"session": {"duration_s": -5}}), encoding="utf-8")

        # Act
        code = main(["simulate", "--config", str(bad), "--out", str(tmp_path / "out")])

        # Assert
        assert code == EXIT_INVALID_CONFIG

    def test_out_of_range_participation_rate_exits_with_code_two(
        self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        monkeypatch.setenv("RECIPES_DIR", str(RECIPES_DIR))
        monkeypatch.setenv("EXPORT_DIR", str(tmp_path))

        code = main(["pov", "--lams", "1.5", "--out", str(tmp_path / "out")])

        assert code == EXIT_INVALID_CONFIG
