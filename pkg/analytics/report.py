"""Assembles every stylized fact of one session into a single report."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from analytics import facts
from analytics.logs import AnalyticsError, MarketLogs
from core.models import MessageKind

LOGGER = logging.getLogger(__name__)

FACT_NAMES = (
    "mid_price_evolution",
    "return_autocorrelation",
    "aggregational_gaussianity",
    "volatility_clustering",
    "long_memory",
    "order_sign_submission",
    "order_sign_cancellation",
    "price_impact",
    "order_flow_imbalance",
    "interarrival_distribution",
    "volatility_volume_correlation",
    "spread",
    "incoming_volume",
    "time_to_first_fill",
)

CurvePoint = Tuple[float, float, str]


@dataclass(frozen=True)
class FactSettings:
    """Sampling and acceptance thresholds of the fact suite."""

    fine_dt: float = 1.0
    coarse_dt: float = 60.0
    ofi_window_s: float = 10.0
    ofi_weighted: bool = False
    max_lag: int = 30
    impact_bins: int = 20
    min_trades: int = 100
    min_interarrivals: int = 10_000
    return_acf_bound: float = 0.2
    impact_range: Tuple[float, float] = (0.1, 0.5)
    ofi_min_r_squared: float = 0.5
    min_volume_correlation: float = 0.3
    variance_ratio_range: Tuple[float, float] = (0.5, 2.0)


@dataclass
class FactEntry:
    name: str
    value: float
    passed: bool
    criterion: str
    details: Dict[str, Any] = field(default_factory=dict)
    curve: List[CurvePoint] = field(default_factory=list)


@dataclass
class FactReport:
    entries: List[FactEntry]

    def __post_init__(self) -> None:
        names = [entry.name for entry in self.entries]
        if sorted(names) != sorted(FACT_NAMES):
            raise ValueError(f"Report must hold each fact exactly once, got {names}.")

    def __iter__(self) -> Iterator[FactEntry]:
        return iter(self.entries)

    def __getitem__(self, name: str) -> FactEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    @property
    def n_passed(self) -> int:
        return sum(entry.passed for entry in self.entries)

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {
                "fact": entry.name,
                "value": entry.value,
                "passed": entry.passed,
                "criterion": entry.criterion,
                "details": "; ".join(f"{key}={value}" for key, value in entry.details.items()),
            }
            for entry in self.entries
        ]

    def long_rows(self) -> List[Dict[str, Any]]:
        """Plot-ready ``fact, x, y, series`` rows."""
        return [
            {"fact": entry.name, "x": x, "y": y, "series": series}
            for entry in self.entries
            for x, y, series in entry.curve
        ]


def _finite(value: float) -> bool:
    return value is not None and math.isfinite(value)


def _curve(xs: np.ndarray, ys: np.ndarray, series: str) -> List[CurvePoint]:
    return [(float(x), float(y), series) for x, y in zip(xs, ys) if math.isfinite(float(y))]


def _mid_price_evolution(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    evolution = facts.mid_price_evolution(logs, settings.fine_dt)
    low, high = settings.variance_ratio_range
    ratio = evolution.variance_ratio
    return FactEntry(
        name="mid_price_evolution",
        value=ratio,
        passed=_finite(ratio) and low < ratio < high,
        criterion=f"variance ratio VR({evolution.horizon}) in ({low}, {high})",
        details={"samples": evolution.mids.size},
        curve=_curve(evolution.times, evolution.mids, "mid"),
    )


def _return_autocorrelation(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    series = facts.log_returns(logs, settings.fine_dt)
    curve = facts.return_acf(series, settings.max_lag)
    bound = settings.return_acf_bound
    return FactEntry(
        name="return_autocorrelation",
        value=float(curve[0]),
        passed=bool(np.all(np.abs(curve[np.isfinite(curve)]) < bound)) and _finite(float(curve[0])),
        criterion=f"|acf(tau)| < {bound} for all lags",
        details={"returns": len(series)},
        curve=_curve(np.arange(1, curve.size + 1), curve, "acf"),
    )


def _aggregational_gaussianity(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    fine = facts.return_distribution(facts.log_returns(logs, settings.fine_dt))
    coarse = facts.return_distribution(facts.log_returns(logs, settings.coarse_dt))
    return FactEntry(
        name="aggregational_gaussianity",
        value=fine.excess_kurtosis,
        passed=_finite(fine.excess_kurtosis)
        and _finite(coarse.excess_kurtosis)
        and fine.excess_kurtosis > coarse.excess_kurtosis,
        criterion="excess kurtosis falls from fine to coarse sampling",
        details={
            "kurtosis_coarse": coarse.excess_kurtosis,
            "fine_mean": fine.mean,
            "fine_std": fine.std,
            "coarse_mean": coarse.mean,
            "coarse_std": coarse.std,
        },
    )


def _volatility_clustering(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    curve = facts.volatility_clustering(facts.log_returns(logs, settings.fine_dt), settings.max_lag)
    return FactEntry(
        name="volatility_clustering",
        value=float(curve.values[0]),
        passed=curve.positive and curve.decaying,
        criterion="f(tau) positive at small lags with a negative Spearman trend",
        details={"spearman_trend": curve.trend},
        curve=_curve(curve.lags, curve.values, "squared_return_acf"),
    )


def _long_memory(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    series = facts.log_returns(logs, settings.fine_dt)
    result = facts.dfa(np.abs(series.returns))
    return FactEntry(
        name="long_memory",
        value=result.hurst,
        passed=0.5 < result.hurst < 1.0,
        criterion="Hurst exponent of |returns| in (0.5, 1)",
        curve=_curve(np.log(result.windows), np.log(result.fluctuations), "log_fluctuation"),
    )


def _order_sign(action: str) -> Callable[[MarketLogs, FactSettings], FactEntry]:
    def compute(logs: MarketLogs, settings: FactSettings) -> FactEntry:
        signs = facts.order_signs(logs, action)
        result = facts.sign_acf(signs)
        curve = np.array([facts.autocorrelation(signs, lag) for lag in range(1, settings.max_lag + 1)])
        return FactEntry(
            name=f"order_sign_{action}",
            value=result.coefficient,
            passed=result.significant and result.coefficient > 0,
            criterion="lag-1 sign autocorrelation positive beyond the 1.96/sqrt(n) band",
            details={"band": result.band, "n": result.n},
            curve=_curve(np.arange(1, curve.size + 1), curve, "sign_acf"),
        )

    return compute


def _price_impact(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    volumes, changes = facts.market_order_impacts(logs)
    fit = facts.price_impact_fit(volumes, changes, n_bins=settings.impact_bins, min_trades=settings.min_trades)
    low, high = settings.impact_range
    return FactEntry(
        name="price_impact",
        value=fit.beta,
        passed=not fit.degenerate and low < fit.beta < high,
        criterion=f"impact exponent in ({low}, {high})",
        details={"trades": fit.n_trades, "bins": fit.n_bins, "degenerate": fit.degenerate},
        curve=_curve(fit.bin_volumes, fit.bin_changes, "bin_mean"),
    )


def _order_flow_imbalance(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    ofi, returns = facts.order_flow_imbalance(logs, settings.ofi_window_s, weighted=settings.ofi_weighted)
    fit = facts.ofi_regression(logs, settings.ofi_window_s, weighted=settings.ofi_weighted)
    return FactEntry(
        name="order_flow_imbalance",
        value=fit.r_squared,
        passed=not fit.degenerate and fit.slope > 0 and fit.r_squared >= settings.ofi_min_r_squared,
        criterion=f"positive slope and R^2 >= {settings.ofi_min_r_squared}",
        details={"slope": fit.slope, "windows": fit.n, "weighted": settings.ofi_weighted},
        curve=_curve(ofi, returns, "window"),
    )


def _interarrival_distribution(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    events = logs.messages[logs.messages["kind"] != MessageKind.EXECUTION]
    fit = facts.interarrival_fit(events["time"].to_numpy(), min_samples=settings.min_interarrivals)
    details: Dict[str, Any] = {"best_family": fit.best_family, "samples": fit.n_samples}
    for family, family_fit in fit.fits.items():
        details[f"js_{family}"] = family_fit.js_divergence
        details[f"loglik_{family}"] = family_fit.log_likelihood
    return FactEntry(
        name="interarrival_distribution",
        value=fit.js_divergence,
        passed=fit.best_family == "exponweib",
        criterion="exponentiated Weibull has the smallest JS divergence",
        details=details,
    )


def _volatility_volume(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    series = facts.log_returns(logs, settings.fine_dt)
    executions = logs.executions
    result = facts.vol_volume_corr(
        series,
        executions["time"].to_numpy(dtype=float),
        executions["size"].to_numpy(dtype=float),
        bin_s=settings.coarse_dt,
        origin=logs.open_s,
    )
    return FactEntry(
        name="volatility_volume_correlation",
        value=result.rho,
        passed=not result.degenerate and result.rho > settings.min_volume_correlation,
        criterion=f"Pearson correlation above {settings.min_volume_correlation}",
        details={"bins": result.n_bins, "degenerate": result.degenerate},
    )


def _spread(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    profile = facts.spread_profile(logs)
    return FactEntry(
        name="spread",
        value=profile.fraction_one_tick,
        passed=profile.modal_spread == 1,
        criterion="modal spread is one tick",
        details={"mean_spread": profile.mean_spread, "modal_spread": profile.modal_spread},
        curve=[(float(k), v, "time_share") for k, v in sorted(profile.shares.items())],
    )


def _incoming_volume(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    result = facts.incoming_volume(logs, settings.coarse_dt)
    return FactEntry(
        name="incoming_volume",
        value=result.mean,
        passed=result.mean > 0,
        criterion="limit volume keeps arriving",
        details={"cv": result.coefficient_of_variation, "intervals": result.per_interval.size},
        curve=_curve(np.arange(result.per_interval.size), result.per_interval, "volume"),
    )


def _time_to_first_fill(logs: MarketLogs, settings: FactSettings) -> FactEntry:
    result = facts.time_to_first_fill(logs)
    return FactEntry(
        name="time_to_first_fill",
        value=result.fraction_below_one_second,
        passed=_finite(result.fraction_below_one_second)
        and result.fraction_below_one_second > 0.5
        and _finite(result.p_value)
        and result.p_value < 0.05,
        criterion="most first fills within one second and KS p-value < 0.05",
        details={
            "filled": result.durations.size,
            "censored": result.censored,
            "exponent": result.fit.exponent if result.fit else math.nan,
            "ks_statistic": result.ks_statistic,
            "p_value": result.p_value,
        },
    )


FACTS: Dict[str, Callable[[MarketLogs, FactSettings], FactEntry]] = {
    "mid_price_evolution": _mid_price_evolution,
    "return_autocorrelation": _return_autocorrelation,
    "aggregational_gaussianity": _aggregational_gaussianity,
    "volatility_clustering": _volatility_clustering,
    "long_memory": _long_memory,
    "order_sign_submission": _order_sign("submission"),
    "order_sign_cancellation": _order_sign("cancellation"),
    "price_impact": _price_impact,
    "order_flow_imbalance": _order_flow_imbalance,
    "interarrival_distribution": _interarrival_distribution,
    "volatility_volume_correlation": _volatility_volume,
    "spread": _spread,
    "incoming_volume": _incoming_volume,
    "time_to_first_fill": _time_to_first_fill,
}


def compute_facts(logs: MarketLogs, settings: Optional[FactSettings] = None) -> FactReport:
    """Evaluates every fact; one that cannot be computed is reported as failed."""
    settings = settings or FactSettings()
    entries = []
    for name in FACT_NAMES:
        try:
            entries.append(FACTS[name](logs, settings))
        except AnalyticsError as exc:
            LOGGER.warning("Fact %s not computable: %s", name, exc)
            entries.append(
                FactEntry(name=name, value=math.nan, passed=False, criterion="computable", details={"error": str(exc)})
            )
    report = FactReport(entries)
    LOGGER.info("Stylized facts: %d of %d passed.", report.n_passed, len(FACT_NAMES))
    return report
