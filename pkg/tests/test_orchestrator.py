from pathlib import Path
from typing import Any, Dict, List

import pytest

from config import Config, FlagsConfig, LimitsConfig, PathsConfig
from pipeline.orchestrator import ExperimentError, ExperimentOrchestrator, _pov_gates
from pipeline.recipes import POVParams
from pipeline.user_io import ConsoleIO
from storage.database import RunStore


def _summary(rows: List[tuple]) -> List[Dict[str, float]]:
    return [
        {"lam": lam, "plain_mean": plain, "order_flow_mean": flow, "order_flow_p10": p10, "order_flow_p90": p90}
        for lam, plain, flow, p10, p90 in rows
    ]


def _config(tmp_path: Path, workers: int = 2) -> Config:
    return Config(
        limits=LimitsConfig(worker_pool_size=workers, default_repetitions=1),
        paths=PathsConfig(recipes_dir=tmp_path, export_dir=tmp_path, runs_dir=tmp_path / "runs"),
        flags=FlagsConfig(write_charts=False),
    )


class TestPovGates:
    def test_well_behaved_buy_impact_passes_every_gate(self) -> None:
        # Arrange
        params = POVParams(lams=(0.1, 0.5), order_flow_compare=(0.1, 0.5))
        summary = _summary([(0.1, 0.5, 0.0, -0.2, 0.3), (0.5, 2.0, 0.8, 0.1, 1.5)])

        # Act
        gates = _pov_gates(params, summary, sign=1)

        # Assert
        assert gates == {
            "pov:plain_impact_monotone": True,
            "pov:plain_impact_non_negative_0.1": True,
            "pov:plain_impact_non_negative_0.5": True,
            "pov:order_flow_negligible_0.1": True,
            "pov:order_flow_0.5_above_0.1": True,
        }

    def test_sell_side_is_oriented_by_sign(self) -> None:
        params = POVParams(lams=(0.1, 0.5), side="ask")
        summary = _summary([(0.1, -0.5, 0.0, -0.1, 0.1), (0.5, -2.0, -0.9, -1.5, -0.2)])

        gates = _pov_gates(params, summary, sign=-1)

        assert all(gates.values())

    def test_non_monotone_impact_fails(self) -> None:
        params = POVParams(lams=(0.1, 0.2))
        summary = _summary([(0.1, 1.0, 0.0, -1.0, 1.0), (0.2, 0.5, 0.0, -1.0, 1.0)])

        gates = _pov_gates(params, summary, sign=1)

        assert not gates["pov:plain_impact_monotone"]
        assert "pov:order_flow_0.5_above_0.1" not in gates


class TestFanOut:
    def test_results_are_stored_per_repetition(self, tmp_path: Path) -> None:
        orchestrator = ExperimentOrchestrator(_config(tmp_path), ConsoleIO())
        store: RunStore[Any] = RunStore()

        orchestrator._fan_out([("BT only", rep, lambda rep=rep: rep * 10) for rep in range(4)], store)

        assert store.values("BT only") == [0, 10, 20, 30]

    def test_every_failure_is_reported_after_all_jobs_finish(self, tmp_path: Path) -> None:
        # Arrange
        orchestrator = ExperimentOrchestrator(_config(tmp_path), ConsoleIO())
        store: RunStore[Any] = RunStore()

        def boom() -> None:
            raise RuntimeError("kernel failed")

        jobs = [("MM 1", 0, boom), ("MM 1", 1, lambda: "ok"), ("MM 1", 2, boom)]

        # Act
        with pytest.raises(ExperimentError) as info:
            orchestrator._fan_out(jobs, store)

        # Assert
        assert info.value.failures == ["MM 1#0: kernel failed", "MM 1#2: kernel failed"]
        assert store.values("MM 1") == ["ok"]
