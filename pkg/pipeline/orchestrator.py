"""Experiment orchestrator running recipes, fanning out repetitions and checking gates."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from analytics.facts import sample_mid
from analytics.interaction import CRITERIA, InteractionCriteria, RunTag, interaction_criteria, interaction_stats
from analytics.logs import MarketLogs
from analytics.report import FACT_NAMES, FactReport, FactSettings, compute_facts
from background.intensity import CTLSTMModel, HawkesModel, HawkesParams, default_hawkes_params
from background.order_stats import sample_pareto
from calibration.ctlstm_train import GradientCheckError, ctlstm_train, gradient_check
from calibration.dataset import (
    estimate_order_stats,
    load_lobster_dataset,
    read_message_file,
    read_orderbook_file,
    simulate_hawkes_dataset,
    write_dataset_csv,
)
from calibration.evaluation import UniformIntensity, eval_type_accuracy, per_event_nll
from calibration.hawkes_mle import hawkes_mle, relative_errors
from calibration.power_law import power_law_mle
from config import Config, RunConfig, parse_run_config
from core.models import Side
from core.recipe_repository import ExperimentRecipe
from pipeline.recipes import (
    CalibrateParams,
    FactsParams,
    InteractionParams,
    POVParams,
    SobolParams,
    SoloParams,
    parse_recipe_params,
)
from pipeline.user_io import ConsoleIO
from sensitivity.response import SimulationResponse
from sensitivity.sobol import order_stats_space, sobol_total_indices
from simulation.session import AgentGroup, SimulationResult, SimulationSetup, run_simulation
from storage import charts
from storage.database import RunStore
from storage.exporter import CSVExporter

Job = Tuple[str, int, Callable[[], Any]]

BASELINE = "BT only"


class ExperimentError(RuntimeError):
    """One or more repetitions failed; every failure is listed."""

    def __init__(self, failures: Sequence[str]) -> None:
        super().__init__("Experiment failed:\n  - " + "\n  - ".join(failures))
        self.failures = list(failures)


@dataclass
class ExperimentOutcome:
    """Gates and written files of one recipe run."""

    recipe: str
    run_dir: Path
    gates: Dict[str, bool] = field(default_factory=dict)
    outputs: List[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.gates.values())


class ExperimentOrchestrator:
    """Runs experiment recipes end to end."""

    def __init__(self, config: Config, io: ConsoleIO, *, run_base_dir: Optional[Path] = None) -> None:
        self._config = config
        self._io = io
        self._run_base_dir = run_base_dir or config.paths.recipes_dir
        self._logger = logging.getLogger(self.__class__.__name__)

    def run(
        self,
        recipe: ExperimentRecipe,
        *,
        out_dir: Optional[Path] = None,
        messages: Optional[Path] = None,
        book: Optional[Path] = None,
    ) -> ExperimentOutcome:
        """Validates the recipe, runs it into a run-scoped directory and writes its manifest."""
        params = parse_recipe_params(recipe.name, recipe.params)
        run_config = parse_run_config(recipe.run, base_dir=self._run_base_dir)
        run_dir = out_dir or self._config.paths.runs_dir / f"{recipe.name}-seed{recipe.seed}-{recipe.digest()[:8]}"
        exporter = CSVExporter(run_dir)
        outcome = ExperimentOutcome(recipe=recipe.name, run_dir=run_dir)
        self._io.display_status(f"Running {recipe.name} ({recipe.repetitions} repetitions, seed {recipe.seed}) into {run_dir}")

        if recipe.name == "solo_bt":
            self.run_solo_bt(recipe, params, run_config, exporter, outcome)
        elif recipe.name == "interaction":
            self.run_interaction(recipe, params, run_config, exporter, outcome)
        elif recipe.name == "pov_impact":
            self.run_pov(recipe, params, run_config, exporter, outcome)
        elif recipe.name == "sobol":
            self.run_sobol(recipe, params, run_config, exporter, outcome)
        elif recipe.name == "calibrate":
            self.run_calibrate(recipe, params, run_config, exporter, outcome, messages=messages, book=book)
        else:
            self.run_facts(recipe, params, run_config, exporter, outcome, messages=messages, book=book)

        extra: Dict[str, Any] = {"gates": outcome.gates}
        if messages is not None and book is not None:
            extra["inputs"] = {"messages": str(messages), "book": str(book)}
        outcome.outputs.append(
            exporter.write_manifest(recipe, seeds=self._seeds(recipe), extra=extra)
        )
        self._io.display_gates(recipe.name, outcome.gates)
        return outcome

    # ------------------------------------------------------------------
    # Recipes
    # ------------------------------------------------------------------

    def run_solo_bt(
        self,
        recipe: ExperimentRecipe,
        params: SoloParams,
        run_config: RunConfig,
        exporter: CSVExporter,
        outcome: ExperimentOutcome,
    ) -> None:
        """The background trader alone, with LOBSTER logs and the fact report per repetition."""
        setup = replace(run_config.simulation, agents=())
        store: RunStore[FactReport] = RunStore()
        jobs: List[Job] = [
            ("solo", rep, partial(self._solo_repetition, setup.with_seed(seed), rep, params.settings, run_config, exporter))
            for rep, seed in enumerate(self._seeds(recipe))
        ]
        self._fan_out(jobs, store)
        reports = store.values("solo")

        summary = []
        long_rows = []
        for rep, report in enumerate(reports):
            long_rows.extend({"repetition": rep, **row} for row in report.long_rows())
        for name in FACT_NAMES:
            entries = [report[name] for report in reports]
            passes = sum(entry.passed for entry in entries)
            values = np.array([entry.value for entry in entries], dtype=float)
            finite = values[np.isfinite(values)]
            gate = passes >= params.pass_fraction * len(entries)
            summary.append(
                {
                    "fact": name,
                    "mean_value": float(finite.mean()) if finite.size else math.nan,
                    "passes": passes,
                    "repetitions": len(entries),
                    "passed": gate,
                    "criterion": entries[0].criterion,
                }
            )
            if name in params.gated_facts:
                outcome.gates[f"fact:{name}"] = gate

        outcome.outputs.append(
            exporter.export_dicts(summary, ["fact", "mean_value", "passes", "repetitions", "passed", "criterion"], filename="facts.csv")
        )
        outcome.outputs.append(
            exporter.export_dicts(long_rows, ["repetition", "fact", "x", "y", "series"], filename="facts_long.csv")
        )
        if reports and self._charts(run_config):
            outcome.outputs.append(charts.facts_panels(reports[0], exporter.path("facts.svg")))
        self._io.display_table("Stylized facts", ["fact", "mean_value", "passes", "passed"], summary)

    def run_interaction(
        self,
        recipe: ExperimentRecipe,
        params: InteractionParams,
        run_config: RunConfig,
        exporter: CSVExporter,
        outcome: ExperimentOutcome,
    ) -> None:
        """Single-type conditions {n, (n)} and heterogeneous pairs against the BT-only market."""
        base = replace(run_config.simulation, agents=())
        conditions: List[Tuple[str, SimulationSetup, Tuple[str, ...]]] = [(BASELINE, base, ())]
        comparisons: List[Tuple[str, str]] = []
        for kind in params.agent_types:
            labels = []
            for count in sorted(set(params.counts)):
                tag = RunTag(kind, count)
                conditions.append((tag.label, self._with_agents(base, params, [(kind, count)]), (kind,)))
                labels.append(tag.label)
            comparisons.extend(zip(labels, labels[1:]))
            if params.no_impact_count > 0:
                off = RunTag(kind, params.no_impact_count, flow_impact=False)
                on = RunTag(kind, params.no_impact_count)
                setup = self._with_agents(base, params, [(kind, params.no_impact_count)], flow_impact=False)
                conditions.append((off.label, setup, (kind,)))
                if on.label not in labels:
                    conditions.append((on.label, self._with_agents(base, params, [(kind, on.count)]), (kind,)))
                comparisons.append((on.label, off.label))
        for first, second in params.pairs:
            label = f"{RunTag(first, params.pair_count).label} + {RunTag(second, params.pair_count).label}"
            setup = self._with_agents(base, params, [(first, params.pair_count), (second, params.pair_count)])
            conditions.append((label, setup, (first, second)))
            comparisons.append((f"{first} | {label}", f"{second} | {label}"))

        store: RunStore[Dict[str, InteractionCriteria]] = RunStore()
        jobs: List[Job] = []
        for label, setup, kinds in conditions:
            for rep, seed in enumerate(self._seeds(recipe)):
                jobs.append((label, rep, partial(self._interaction_repetition, setup.with_seed(seed), kinds, params.mid_dt)))
        self._fan_out(jobs, store)

        groups: Dict[str, List[InteractionCriteria]] = {}
        run_rows = []
        for label, _, kinds in conditions:
            for rep, per_kind in store.items(label):
                for kind, criteria in per_kind.items():
                    group = label if len(kinds) <= 1 else f"{kind} | {label}"
                    groups.setdefault(group, []).append(criteria)
                    run_rows.append({"group": group, "repetition": rep, **criteria.as_dict()})
        report = interaction_stats(groups, comparisons)
        table = report.table.reset_index()

        columns = ["group", "runs", *CRITERIA]
        outcome.outputs.append(exporter.export_dicts(table.to_dict("records"), columns, filename="interaction.csv"))
        outcome.outputs.append(
            exporter.export_dicts(
                run_rows, ["group", "repetition", *CRITERIA, "event_share"], filename="interaction_runs.csv"
            )
        )
        outcome.outputs.append(
            exporter.export_dicts(
                report.test_rows(),
                ["criterion", "first", "second", "statistic", "p_value", "significant"],
                filename="interaction_tests.csv",
            )
        )
        if self._charts(run_config):
            outcome.outputs.append(charts.interaction_bars(report.table, CRITERIA, exporter.path("interaction.svg")))
        outcome.gates.update(self._interaction_gates(params, report.table, report.tests))
        self._io.display_table("Interaction criteria", columns, table.to_dict("records"))

    def run_pov(
        self,
        recipe: ExperimentRecipe,
        params: POVParams,
        run_config: RunConfig,
        exporter: CSVExporter,
        outcome: ExperimentOutcome,
    ) -> None:
        """Plain and order-flow impact of a percent-of-volume execution per participation rate."""
        base = replace(run_config.simulation, agents=())
        if params.start_s + params.window_s > base.session.duration_s:
            raise ValueError(
                f"POV window ends at {params.start_s + params.window_s:g} s after the open "
                f"but the session lasts {base.session.duration_s:g} s."
            )
        conditions: List[Tuple[str, SimulationSetup]] = [(BASELINE, self._with_flow_impact(base, True))]
        for lam in params.lams:
            group = AgentGroup(
                kind="POV",
                count=1,
                params={
                    "side": params.side,
                    "lam": lam,
                    "window_s": params.window_s,
                    "start_s": params.start_s,
                    "child_interval_s": params.child_interval_s,
                },
            )
            for flow_impact in (False, True):
                setup = replace(self._with_flow_impact(base, flow_impact), agents=(group,))
                conditions.append((_pov_label(lam, flow_impact), setup))

        store: RunStore[np.ndarray] = RunStore()
        jobs: List[Job] = []
        for label, setup in conditions:
            for rep, seed in enumerate(self._seeds(recipe)):
                jobs.append((label, rep, partial(self._mid_path, setup.with_seed(seed), params.sample_dt)))
        self._fan_out(jobs, store)

        times = params.sample_dt * np.arange(len(store.values(BASELINE)[0]))
        after_start = times >= params.start_s
        baseline = np.vstack(store.values(BASELINE))
        sign = Side(params.side).sign
        band_rows: List[Dict[str, Any]] = []
        summary: List[Dict[str, Any]] = []
        for lam in sorted(params.lams):
            without = np.vstack(store.values(_pov_label(lam, False)))
            with_impact = np.vstack(store.values(_pov_label(lam, True)))
            averages: Dict[str, np.ndarray] = {}
            for kind, paths in (("plain", without - baseline), ("order_flow", with_impact - without)):
                band_rows.extend(_band_rows(kind, lam, times, paths))
                averages[kind] = np.nanmean(paths[:, after_start], axis=1)
            summary.append(
                {
                    "lam": lam,
                    "plain_mean": float(np.nanmean(averages["plain"])),
                    "plain_std": float(np.nanstd(averages["plain"])),
                    "order_flow_mean": float(np.nanmean(averages["order_flow"])),
                    "order_flow_p10": float(np.nanpercentile(averages["order_flow"], 10)),
                    "order_flow_p90": float(np.nanpercentile(averages["order_flow"], 90)),
                }
            )

        bands = pd.DataFrame(band_rows)
        outcome.outputs.append(
            exporter.export_dicts(band_rows, ["impact", "lam", "time_s", "mean", "p10", "p90", "std"], filename="pov_bands.csv")
        )
        outcome.outputs.append(
            exporter.export_dicts(
                summary,
                ["lam", "plain_mean", "plain_std", "order_flow_mean", "order_flow_p10", "order_flow_p90"],
                filename="pov_summary.csv",
            )
        )
        if self._charts(run_config):
            outcome.outputs.append(charts.pov_bands(bands, exporter.path("pov_bands.svg")))
        outcome.gates.update(_pov_gates(params, summary, sign))
        self._io.display_table("POV impact (time averages after start)", list(summary[0]), summary)

    def run_sobol(
        self,
        recipe: ExperimentRecipe,
        params: SobolParams,
        run_config: RunConfig,
        exporter: CSVExporter,
        outcome: ExperimentOutcome,
    ) -> None:
        """Total-effect indices of the seven order statistics on the six response statistics."""
        setup = replace(run_config.simulation, agents=())
        space = order_stats_space(setup.background.order_stats, fluctuations=params.fluctuations)
        response = SimulationResponse(
            setup=setup, symbols=tuple(space.symbols), base_seed=recipe.seed, settings=params.settings
        )
        evaluations = [0]

        def evaluate(matrix: np.ndarray) -> np.ndarray:
            store: RunStore[np.ndarray] = RunStore()
            jobs: List[Job] = [("row", row, partial(response, matrix[row], row)) for row in range(len(matrix))]
            self._fan_out(jobs, store)
            evaluations[0] += len(matrix)
            self._io.display_status(f"Sobol: {evaluations[0]} simulations done.")
            return np.vstack(store.values("row"))

        indices = sobol_total_indices(
            space,
            None,
            params.n,
            np.random.default_rng(recipe.seed),
            first_order=params.first_order,
            evaluate=evaluate,
        )
        rows = indices.rows()
        columns = ["parameter", "criterion", "raw_index", "standardized_index"]
        if params.first_order:
            columns.append("first_order_index")
        outcome.outputs.append(exporter.export_dicts(rows, columns, filename="sobol.csv"))
        if self._charts(run_config):
            outcome.outputs.append(charts.sobol_heatmap(indices, exporter.path("sobol.svg")))
        for criterion, undefined in zip(indices.criteria, indices.undefined):
            outcome.gates[f"sobol:{criterion}_defined"] = not bool(undefined)

    def run_calibrate(
        self,
        recipe: ExperimentRecipe,
        params: CalibrateParams,
        run_config: RunConfig,
        exporter: CSVExporter,
        outcome: ExperimentOutcome,
        *,
        messages: Optional[Path] = None,
        book: Optional[Path] = None,
    ) -> None:
        """Power-law, Hawkes and CT-LSTM round trips; fitted parameters land as JSON files."""
        rng = np.random.default_rng(recipe.seed)
        checks: List[Dict[str, Any]] = []

        for exponent in params.exponents:
            samples = sample_pareto(exponent, params.x_min, rng, size=params.power_law_samples)
            fitted = power_law_mle(samples, params.x_min).exponent
            passed = abs(fitted - exponent) <= params.exponent_tolerance
            checks.append(_check(f"power_law:{exponent:g}", fitted, exponent, passed))
            outcome.gates[f"power_law:{exponent:g}"] = passed

        if messages is not None and book is not None:
            stats = estimate_order_stats(
                read_message_file(messages), read_orderbook_file(book), base=run_config.simulation.background.order_stats
            )
            outcome.outputs.append(exporter.write_json(stats.to_dict(), filename="order_stats_fit.json"))
            dataset = load_lobster_dataset([messages], [book]).split(params.validation_fraction, recipe.seed)
            truth: Optional[HawkesParams] = None
        else:
            truth = run_config.simulation.background.hawkes or default_hawkes_params()
            dataset = simulate_hawkes_dataset(
                truth, params.hawkes_horizon, params.hawkes_sequences, recipe.seed
            ).split(params.validation_fraction, recipe.seed)
        outcome.outputs.append(write_dataset_csv(dataset, exporter.path("calibration_events.csv")))
        self._io.display_status(f"Calibrating on {dataset.n_events} events in {len(dataset.sequences)} sequences.")

        init = default_hawkes_params() if truth is None else truth
        init = HawkesParams(mu=init.mu * params.init_scale, alpha=init.alpha * params.init_scale, delta=init.delta)
        fit = hawkes_mle(dataset, init)
        outcome.outputs.append(exporter.write_json(fit.params.to_dict(), filename="hawkes_fit.json"))
        improves = fit.log_likelihood >= fit.initial_log_likelihood
        checks.append(_check("hawkes:log_likelihood", fit.log_likelihood, fit.initial_log_likelihood, improves))
        outcome.gates["hawkes:likelihood_improves"] = improves
        if truth is not None:
            # Reported only; the planted one-type stream below carries the gate.
            for name, error in relative_errors(truth, fit.params).items():
                within = error <= params.recovery_tolerance
                checks.append(_check(f"hawkes:max_relative_error_{name}", error, params.recovery_tolerance, within))

        mu, alpha, delta = params.recovery_truth
        planted = HawkesParams(mu=[mu], alpha=[[alpha]], delta=[[delta]])
        horizon = params.recovery_events / (float(planted.stationary_rates().sum()) * params.hawkes_sequences)
        planted_data = simulate_hawkes_dataset(planted, horizon, params.hawkes_sequences, recipe.seed + 1)
        start = HawkesParams(
            mu=planted.mu * params.init_scale,
            alpha=planted.alpha * params.init_scale,
            delta=planted.delta / params.init_scale,
        )
        recovered = hawkes_mle(planted_data, start)
        for name, error in relative_errors(planted, recovered.params).items():
            passed = error <= params.recovery_tolerance
            checks.append(_check(f"hawkes_recovery:max_relative_error_{name}", error, params.recovery_tolerance, passed))
            outcome.gates[f"hawkes_recovery:{name}"] = passed

        worst = 0.0
        failures = 0
        for offset in range(params.gradient_seeds):
            try:
                worst = max(worst, gradient_check(recipe.seed + offset, tolerance=params.training.gradient_tolerance))
            except GradientCheckError as exc:
                self._logger.warning("Gradient check failed for seed %d: %s", recipe.seed + offset, exc)
                failures += 1
        checks.append(_check("ctlstm:gradient_relative_error", worst, params.training.gradient_tolerance, failures == 0))
        outcome.gates["ctlstm:gradient_check"] = failures == 0

        validation = dataset.validation or dataset.train
        models: Dict[str, Any] = {"uniform": UniformIntensity(), "hawkes_fit": HawkesModel(fit.params)}
        if truth is not None:
            models["hawkes_true"] = HawkesModel(truth)
        if params.train_ctlstm:
            training = replace(params.training, gradient_check=False)
            trained = ctlstm_train(dataset, training)
            models["ctlstm"] = CTLSTMModel(trained.params)
            outcome.outputs.append(exporter.write_json(trained.params.to_dict(), filename="ctlstm_fit.json"))
            outcome.outputs.append(
                exporter.export_dicts(
                    [{"epoch": epoch + 1, "train_nll": nll} for epoch, nll in enumerate(trained.train_nll)],
                    ["epoch", "train_nll"],
                    filename="ctlstm_training.csv",
                )
            )
            reference = per_event_nll(models["hawkes_true"] if truth is not None else models["hawkes_fit"], validation)
            close = abs(trained.validation_nll - reference) <= params.nll_tolerance * abs(reference)
            checks.append(_check("ctlstm:validation_nll", trained.validation_nll, reference, close))
            checks.append(_check("poisson:validation_nll", trained.poisson_nll, reference, True))
            outcome.gates["ctlstm:validation_nll"] = close

        for name, model in models.items():
            accuracy = eval_type_accuracy(model, dataset, sequences=validation)
            checks.append(_check(f"type_accuracy:{name}", accuracy, math.nan, True))

        outcome.outputs.append(exporter.export_dicts(checks, ["check", "value", "target", "passed"], filename="calibration.csv"))
        self._io.display_table("Calibration", ["check", "value", "target", "passed"], checks)

    def run_facts(
        self,
        recipe: ExperimentRecipe,
        params: FactsParams,
        run_config: RunConfig,
        exporter: CSVExporter,
        outcome: ExperimentOutcome,
        *,
        messages: Optional[Path] = None,
        book: Optional[Path] = None,
    ) -> None:
        """Fact report of a given log pair, or of one fresh simulation when none is given."""
        if (messages is None) != (book is None):
            raise ValueError("Pass both the message file and the order book file, or neither.")
        if messages is not None and book is not None:
            logs = MarketLogs.from_files(messages, book, open_s=params.open_s, close_s=params.close_s)
        else:
            result = run_simulation(run_config.simulation.with_seed(recipe.seed))
            if run_config.outputs.lobster:
                outcome.outputs.extend(exporter.export_lobster(result, prefix="session"))
            logs = MarketLogs.from_result(result)
        report = compute_facts(logs, params.settings)
        outcome.outputs.append(
            exporter.export_dicts(
                report.rows(), ["fact", "value", "passed", "criterion", "details"], filename="facts.csv"
            )
        )
        outcome.outputs.append(exporter.export_dicts(report.long_rows(), ["fact", "x", "y", "series"], filename="facts_long.csv"))
        if self._charts(run_config):
            outcome.outputs.append(charts.facts_panels(report, exporter.path("facts.svg")))
        for name in params.gated_facts:
            outcome.gates[f"fact:{name}"] = report[name].passed
        self._io.display_table("Stylized facts", ["fact", "value", "passed"], report.rows())

    # ------------------------------------------------------------------
    # Workers
    # ------------------------------------------------------------------

    def _solo_repetition(
        self,
        setup: SimulationSetup,
        rep: int,
        settings: FactSettings,
        run_config: RunConfig,
        exporter: CSVExporter,
    ) -> FactReport:
        result = run_simulation(setup)
        if run_config.outputs.lobster:
            exporter.export_lobster(result, prefix=f"rep{rep:02d}")
        if run_config.outputs.oracle_trace:
            exporter.export_oracle_trace(result, prefix=f"rep{rep:02d}")
        return compute_facts(MarketLogs.from_result(result), settings)

    @staticmethod
    def _interaction_repetition(
        setup: SimulationSetup, kinds: Tuple[str, ...], mid_dt: float
    ) -> Dict[str, InteractionCriteria]:
        result = run_simulation(setup)
        if not kinds:
            return {BASELINE: interaction_criteria(result, [], mid_dt=mid_dt)}
        return {kind: interaction_criteria(result, result.agents_of_kind(kind), mid_dt=mid_dt) for kind in kinds}

    @staticmethod
    def _mid_path(setup: SimulationSetup, dt: float) -> np.ndarray:
        result: SimulationResult = run_simulation(setup)
        _, mids = sample_mid(MarketLogs.from_result(result), dt)
        return mids

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _fan_out(self, jobs: Sequence[Job], store: RunStore[Any]) -> None:
        """Runs jobs on the worker pool; failures are collected and raised once all finish."""
        failures: List[str] = []
        max_workers = max(1, min(self._config.limits.worker_pool_size, len(jobs)))
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            futures = {executor.submit(fn): (condition, rep) for condition, rep, fn in jobs}
            for future in as_completed(futures):
                condition, rep = futures[future]
                try:
                    store.insert(condition, rep, future.result())
                except Exception as error:
                    self._logger.error("Repetition %s#%d failed: %s", condition, rep, error)
                    failures.append(f"{condition}#{rep}: {error}")
                else:
                    self._logger.info("Finished %s#%d.", condition, rep)
        if failures:
            raise ExperimentError(sorted(failures))

    @staticmethod
    def _seeds(recipe: ExperimentRecipe) -> List[int]:
        return [recipe.seed + rep for rep in range(recipe.repetitions)]

    def _charts(self, run_config: RunConfig) -> bool:
        return self._config.flags.write_charts and run_config.outputs.charts

    @staticmethod
    def _with_flow_impact(setup: SimulationSetup, flow_impact: bool) -> SimulationSetup:
        return replace(setup, background=replace(setup.background, flow_impact=flow_impact))

    def _with_agents(
        self,
        base: SimulationSetup,
        params: InteractionParams,
        roster: Sequence[Tuple[str, int]],
        *,
        flow_impact: bool = True,
    ) -> SimulationSetup:
        groups = tuple(
            AgentGroup(
                kind=kind,
                count=count,
                mean_wakeup_s=params.mean_wakeup_s,
                params=dict(params.agent_params.get(kind, {})),
            )
            for kind, count in roster
        )
        return replace(self._with_flow_impact(base, flow_impact), agents=groups)

    @staticmethod
    def _interaction_gates(
        params: InteractionParams, table: pd.DataFrame, tests: Sequence[Any]
    ) -> Dict[str, bool]:
        gates: Dict[str, bool] = {}
        counts = sorted(set(params.counts))
        for kind in params.agent_types:
            if len(counts) >= 2:
                low = table.loc[RunTag(kind, counts[0]).label]
                high = table.loc[RunTag(kind, counts[-1]).label]
                if kind == "MM":
                    gates[f"{kind}:mid_std_increases"] = bool(high["mid_std"] > low["mid_std"])
                else:
                    gates[f"{kind}:mid_std_decreases"] = bool(high["mid_std"] < low["mid_std"])
                if kind in ("ZI", "HBL"):
                    gates[f"{kind}:fundamental_correlation_increases"] = bool(
                        high["fundamental_correlation"] > low["fundamental_correlation"]
                    )
            if kind in ("MM", "MR"):
                labels = [label for label in table.index if label.startswith(f"{kind} ")]
                gates[f"{kind}:fundamental_correlation_zero"] = bool(
                    (table.loc[labels, "fundamental_correlation"] == 0.0).all()
                )
            if params.no_impact_count > 0:
                on = RunTag(kind, params.no_impact_count).label
                off = RunTag(kind, params.no_impact_count, flow_impact=False).label
                test = next(
                    (t for t in tests if t.criterion == "bt_imbalance" and t.first == on and t.second == off), None
                )
                larger = bool(table.loc[on, "bt_imbalance"] > table.loc[off, "bt_imbalance"])
                gates[f"{kind}:flow_impact_raises_imbalance"] = larger and test is not None and test.significant
        return gates


def _pov_label(lam: float, flow_impact: bool) -> str:
    return f"POV {lam:g} {'impact' if flow_impact else 'no-impact'}"


def _band_rows(kind: str, lam: float, times: np.ndarray, paths: np.ndarray) -> List[Dict[str, Any]]:
    mean = np.nanmean(paths, axis=0)
    std = np.nanstd(paths, axis=0)
    p10 = np.nanpercentile(paths, 10, axis=0)
    p90 = np.nanpercentile(paths, 90, axis=0)
    return [
        {"impact": kind, "lam": lam, "time_s": float(t), "mean": float(m), "p10": float(lo), "p90": float(hi), "std": float(s)}
        for t, m, lo, hi, s in zip(times, mean, p10, p90, std)
    ]


def _pov_gates(params: POVParams, summary: Sequence[Mapping[str, float]], sign: int) -> Dict[str, bool]:
    """Directional checks on time-averaged impact; ``sign`` orients sells like buys."""
    by_lam = {row["lam"]: row for row in summary}
    lams = sorted(by_lam)
    plain = [sign * by_lam[lam]["plain_mean"] for lam in lams]
    gates = {"pov:plain_impact_monotone": all(b >= a for a, b in zip(plain, plain[1:]))}
    for lam, value in zip(lams, plain):
        gates[f"pov:plain_impact_non_negative_{lam:g}"] = value >= 0.0
    smallest = by_lam[lams[0]]
    gates[f"pov:order_flow_negligible_{lams[0]:g}"] = smallest["order_flow_p10"] <= 0.0 <= smallest["order_flow_p90"]
    low, high = params.order_flow_compare
    if low in by_lam and high in by_lam:
        gates[f"pov:order_flow_{high:g}_above_{low:g}"] = (
            sign * by_lam[high]["order_flow_mean"] > sign * by_lam[low]["order_flow_mean"]
        )
    return gates


def _check(name: str, value: float, target: float, passed: bool) -> Dict[str, Any]:
    return {"check": name, "value": value, "target": target, "passed": passed}
