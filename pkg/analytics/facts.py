"""Stylized facts and numerical properties of a simulated or recorded market."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.spatial.distance import jensenshannon

from analytics.logs import AnalyticsError, MarketLogs
from calibration.power_law import PowerLawFit, power_law_ks, power_law_mle
from core.models import MessageKind

LOGGER = logging.getLogger(__name__)

DFA_MIN_LENGTH = 512
SIGNIFICANCE_Z = 1.96
INTERARRIVAL_FAMILIES = ("exponential", "weibull", "exponweib")


@dataclass(frozen=True)
class ReturnSeries:
    """Log mid-price returns at a fixed sampling interval ``dt`` (seconds)."""

    dt: float
    times: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return int(self.returns.size)


def sample_mid(logs: MarketLogs, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mid-price on the grid ``open, open + dt, ...`` up to the close."""
    if dt <= 0:
        raise AnalyticsError("Sampling interval must be positive.")
    steps = int(math.floor(logs.duration_s / dt + 1e-9))
    grid = logs.open_s + dt * np.arange(steps + 1)
    return grid, logs.mid_at(grid)


def log_returns(logs: MarketLogs, dt: float) -> ReturnSeries:
    grid, mids = sample_mid(logs, dt)
    with np.errstate(invalid="ignore", divide="ignore"):
        returns = np.diff(np.log(mids))
    finite = np.isfinite(returns)
    return ReturnSeries(dt=dt, times=grid[1:][finite], returns=returns[finite])


def autocorrelation(values: Sequence[float], lag: int) -> float:
    """Sample autocorrelation at ``lag`` with the full-sample mean and variance."""
    x = np.asarray(values, dtype=float)
    if lag < 1 or x.size <= lag:
        return math.nan
    centred = x - x.mean()
    denominator = float(np.dot(centred, centred))
    if denominator == 0.0:
        return math.nan
    return float(np.dot(centred[:-lag], centred[lag:]) / denominator)


# ---------------------------------------------------------------------------
# Long memory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DFAResult:
    hurst: float
    windows: np.ndarray
    fluctuations: np.ndarray


def dfa(series: Sequence[float], *, min_window: int = 16, max_window: Optional[int] = None, n_windows: int = 20) -> DFAResult:
    """First-order detrended fluctuation analysis.

    Windows are log-spaced between ``min_window`` and a quarter of the
    series; H is the slope of log F(n) against log n.
    """
    x = np.asarray(series, dtype=float)
    if x.size < DFA_MIN_LENGTH:
        raise AnalyticsError(f"DFA needs at least {DFA_MIN_LENGTH} points, got {x.size}.")
    if not np.all(np.isfinite(x)):
        raise AnalyticsError("DFA input contains non-finite values.")
    profile = np.cumsum(x - x.mean())
    upper = max_window or x.size // 4
    windows = np.unique(np.floor(np.logspace(np.log10(min_window), np.log10(upper), n_windows)).astype(int))
    fluctuations = np.empty(windows.size)
    for index, n in enumerate(windows):
        n_segments = profile.size // n
        segments = profile[: n_segments * n].reshape(n_segments, n)
        t = np.arange(n, dtype=float)
        slope, intercept = np.polyfit(t, segments.T, 1)
        residuals = segments - (np.outer(slope, t) + intercept[:, None])
        fluctuations[index] = math.sqrt(float(np.mean(residuals**2)))
    if np.any(fluctuations <= 0):
        raise AnalyticsError("DFA fluctuation vanished; the series is piecewise linear.")
    hurst = float(np.polyfit(np.log(windows), np.log(fluctuations), 1)[0])
    return DFAResult(hurst=hurst, windows=windows, fluctuations=fluctuations)


def dfa_hurst(series: Sequence[float]) -> float:
    return dfa(series).hurst


# ---------------------------------------------------------------------------
# Order flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AcfResult:
    coefficient: float
    band: float
    n: int

    @property
    def significant(self) -> bool:
        return math.isfinite(self.coefficient) and abs(self.coefficient) > self.band


def sign_acf(signs: Sequence[float], lag: int = 1) -> AcfResult:
    values = np.asarray(signs, dtype=float)
    band = SIGNIFICANCE_Z / math.sqrt(values.size) if values.size else math.inf
    return AcfResult(coefficient=autocorrelation(values, lag), band=band, n=int(values.size))


def order_signs(logs: MarketLogs, action: str) -> np.ndarray:
    """Signs of submissions or cancellations in log order; bid = +1, ask = -1."""
    if action == "submission":
        frame = logs.submissions
    elif action == "cancellation":
        frame = logs.cancellations
    else:
        raise ValueError(f"action must be 'submission' or 'cancellation', got {action!r}.")
    return frame["direction"].to_numpy(dtype=float)


def order_sign_acf(logs: MarketLogs, action: str) -> AcfResult:
    return sign_acf(order_signs(logs, action))


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    n: int
    degenerate: bool = False


def ols(x: Sequence[float], y: Sequence[float]) -> RegressionResult:
    """Simple least squares of ``y`` on ``x``; zero-variance ``x`` is flagged."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.size < 2 or np.ptp(xs) == 0.0:
        return RegressionResult(math.nan, math.nan, math.nan, int(xs.size), degenerate=True)
    fit = stats.linregress(xs, ys)
    r_squared = float(fit.rvalue) ** 2 if np.ptp(ys) > 0 else math.nan
    return RegressionResult(float(fit.slope), float(fit.intercept), r_squared, int(xs.size))


def order_flow_imbalance(logs: MarketLogs, window_s: float = 10.0, *, weighted: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Per-window OFI and log mid-price return.

    OFI = (bid submissions + ask cancellations) - (ask submissions + bid
    cancellations), counted in events or, when ``weighted``, in shares.
    """
    n_windows = int(math.floor(logs.duration_s / window_s + 1e-9))
    edges = logs.open_s + window_s * np.arange(n_windows + 1)
    messages = logs.messages
    events = messages[messages["kind"].isin([MessageKind.SUBMISSION, MessageKind.CANCELLATION, 3])]
    submission = (events["kind"] == MessageKind.SUBMISSION).to_numpy()
    direction = events["direction"].to_numpy()
    # Submissions push towards their own side; cancellations towards the other.
    push = np.where(submission, direction, -direction).astype(float)
    if weighted:
        push *= events["size"].to_numpy(dtype=float)
    window = np.searchsorted(edges, events["time"].to_numpy(dtype=float), side="right") - 1
    inside = (window >= 0) & (window < n_windows)
    ofi = np.bincount(window[inside], weights=push[inside], minlength=n_windows)
    mids = logs.mid_at(edges)
    with np.errstate(invalid="ignore", divide="ignore"):
        returns = np.diff(np.log(mids))
    finite = np.isfinite(returns)
    return ofi[finite], returns[finite]


def ofi_regression(logs: MarketLogs, window_s: float = 10.0, *, weighted: bool = False, min_windows: int = 30) -> RegressionResult:
    ofi, returns = order_flow_imbalance(logs, window_s, weighted=weighted)
    if ofi.size < min_windows:
        raise AnalyticsError(f"OFI regression needs {min_windows} windows, got {ofi.size}.")
    result = ols(ofi, returns)
    if result.degenerate:
        LOGGER.warning("OFI has zero variance across %d windows; R-squared undefined.", ofi.size)
    return result


# ---------------------------------------------------------------------------
# Price impact
# ---------------------------------------------------------------------------


def market_order_impacts(logs: MarketLogs) -> Tuple[np.ndarray, np.ndarray]:
    """Executed volume and absolute mid change of every marketable submission."""
    kinds = logs.messages["kind"].to_numpy()
    times = logs.messages["time"].to_numpy()
    sizes = logs.messages["size"].to_numpy(dtype=float)
    marketable = logs.messages["marketable"].to_numpy(dtype=bool)
    mids = logs.quotes["mid"].to_numpy()
    volumes: List[float] = []
    changes: List[float] = []
    for index in np.flatnonzero(marketable):
        first = index
        while first > 0 and kinds[first - 1] == MessageKind.EXECUTION and times[first - 1] == times[index]:
            first -= 1
        if first == 0:
            continue
        before, after = mids[first - 1], mids[index]
        if not (math.isfinite(before) and math.isfinite(after)):
            continue
        volumes.append(float(sizes[first:index].sum()) if first < index else float(sizes[index]))
        changes.append(abs(after - before))
    return np.asarray(volumes), np.asarray(changes)


@dataclass(frozen=True)
class ImpactFit:
    beta: float
    intercept: float
    n_trades: int
    n_bins: int
    degenerate: bool = False
    bin_volumes: np.ndarray = field(default_factory=lambda: np.empty(0))
    bin_changes: np.ndarray = field(default_factory=lambda: np.empty(0))


def price_impact_fit(
    volumes: Sequence[float],
    changes: Sequence[float],
    *,
    n_bins: int = 20,
    min_trades: int = 100,
) -> ImpactFit:
    """Slope of log mean |price change| on log volume over volume bins.

    Trades with no quote change are dropped. Few distinct volumes are binned
    one per value; otherwise bins are volume quantiles.
    """
    v = np.asarray(volumes, dtype=float)
    dp = np.abs(np.asarray(changes, dtype=float))
    moving = (dp > 0) & (v > 0)
    if not moving.any():
        LOGGER.warning("All %d trades left the quote unchanged; impact undefined.", v.size)
        return ImpactFit(math.nan, math.nan, 0, 0, degenerate=True)
    v, dp = v[moving], dp[moving]
    if v.size < min_trades:
        raise AnalyticsError(f"Price impact needs {min_trades} moving trades, got {v.size}.")
    frame = pd.DataFrame({"volume": v, "change": dp})
    if np.unique(v).size <= n_bins:
        frame["bin"] = v
    else:
        edges = np.unique(np.quantile(v, np.linspace(0.0, 1.0, n_bins + 1)))
        frame["bin"] = pd.cut(frame["volume"], edges, include_lowest=True)
    binned = frame.groupby("bin", observed=True)[["volume", "change"]].mean()
    if len(binned) < 2:
        return ImpactFit(math.nan, math.nan, int(v.size), len(binned), degenerate=True)
    bin_volumes = binned["volume"].to_numpy()
    bin_changes = binned["change"].to_numpy()
    fit = ols(np.log(bin_volumes), np.log(bin_changes))
    return ImpactFit(
        fit.slope,
        fit.intercept,
        int(v.size),
        len(binned),
        degenerate=fit.degenerate,
        bin_volumes=bin_volumes,
        bin_changes=bin_changes,
    )


# ---------------------------------------------------------------------------
# Return distribution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReturnDistribution:
    dt: float
    excess_kurtosis: float
    mean: float
    std: float
    n: int


def return_distribution(series: ReturnSeries) -> ReturnDistribution:
    """Excess kurtosis and the Gaussian maximum-likelihood fit."""
    if len(series) < 4:
        raise AnalyticsError(f"Need at least 4 returns at dt={series.dt}, got {len(series)}.")
    mean, std = stats.norm.fit(series.returns)
    kurtosis = float(stats.kurtosis(series.returns, fisher=True, bias=True)) if std > 0 else math.nan
    return ReturnDistribution(dt=series.dt, excess_kurtosis=kurtosis, mean=float(mean), std=float(std), n=len(series))


def return_acf(series: ReturnSeries, max_lag: int = 20) -> np.ndarray:
    return np.array([autocorrelation(series.returns, lag) for lag in range(1, max_lag + 1)])


@dataclass(frozen=True)
class MidPriceEvolution:
    times: np.ndarray
    mids: np.ndarray
    variance_ratio: float
    horizon: int


def mid_price_evolution(logs: MarketLogs, dt: float = 1.0, horizon: int = 10) -> MidPriceEvolution:
    """Sampled mid path plus the variance ratio of ``horizon``-step to one-step returns."""
    grid, mids = sample_mid(logs, dt)
    valid = np.isfinite(mids)
    path = np.log(mids[valid])
    one_step = np.diff(path)
    multi_step = path[horizon:] - path[:-horizon] if path.size > horizon else np.array([])
    if one_step.size < 2 or multi_step.size < 2 or np.var(one_step) == 0:
        ratio = math.nan
    else:
        ratio = float(np.var(multi_step) / (horizon * np.var(one_step)))
    return MidPriceEvolution(times=grid[valid], mids=mids[valid], variance_ratio=ratio, horizon=horizon)


# ---------------------------------------------------------------------------
# Inter-arrival times
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FamilyFit:
    family: str
    params: Tuple[float, ...]
    log_likelihood: float
    js_divergence: float


@dataclass(frozen=True)
class InterarrivalFit:
    best_family: str
    js_divergence: float
    fits: Dict[str, FamilyFit]
    n_samples: int
    dropped_ties: int


def _frozen(family: str, params: Tuple[float, ...]) -> stats.rv_continuous:
    if family == "exponential":
        return stats.expon(*params)
    if family == "weibull":
        return stats.weibull_min(*params)
    return stats.exponweib(*params)


def _js_divergence(gaps: np.ndarray, distribution: stats.rv_continuous, edges: np.ndarray) -> float:
    observed, _ = np.histogram(gaps, bins=edges)
    fitted = np.diff(distribution.cdf(edges))
    if observed.sum() == 0 or fitted.sum() <= 0:
        return math.nan
    return float(jensenshannon(observed / observed.sum(), fitted / fitted.sum(), base=2) ** 2)


def interarrival_fit(
    times: Sequence[float],
    *,
    min_samples: int = 10_000,
    n_bins: int = 200,
    clip_percentile: float = 99.5,
) -> InterarrivalFit:
    """Fits exponential, Weibull and exponentiated Weibull gaps by MLE.

    Each richer family starts from the simpler optimum and falls back to it
    when the optimizer ends lower, so log-likelihoods are ordered. The winner
    has the smallest Jensen-Shannon divergence to the clipped histogram.
    """
    gaps = np.diff(np.sort(np.asarray(times, dtype=float)))
    ties = int((gaps <= 0).sum())
    gaps = gaps[gaps > 0]
    if gaps.size < min_samples:
        raise AnalyticsError(f"Inter-arrival fit needs {min_samples} gaps, got {gaps.size}.")
    if ties:
        LOGGER.debug("Dropped %d zero inter-arrival gaps.", ties)

    def log_likelihood(family: str, params: Tuple[float, ...]) -> float:
        return float(np.sum(_frozen(family, params).logpdf(gaps)))

    _, scale = stats.expon.fit(gaps, floc=0)
    expon_params = (0.0, float(scale))
    expon_ll = log_likelihood("exponential", expon_params)

    c, _, w_scale = stats.weibull_min.fit(gaps, 1.0, floc=0, scale=scale)
    weibull_params = (float(c), 0.0, float(w_scale))
    weibull_ll = log_likelihood("weibull", weibull_params)
    nested_weibull = (1.0, 0.0, float(scale))
    if not weibull_ll >= expon_ll:
        weibull_params, weibull_ll = nested_weibull, log_likelihood("weibull", nested_weibull)

    a, c2, _, e_scale = stats.exponweib.fit(gaps, 1.0, weibull_params[0], floc=0, scale=weibull_params[2])
    exponweib_params = (float(a), float(c2), 0.0, float(e_scale))
    exponweib_ll = log_likelihood("exponweib", exponweib_params)
    nested_exponweib = (1.0, weibull_params[0], 0.0, weibull_params[2])
    if not exponweib_ll >= weibull_ll:
        exponweib_params, exponweib_ll = nested_exponweib, log_likelihood("exponweib", nested_exponweib)

    clip = float(np.percentile(gaps, clip_percentile))
    edges = np.linspace(0.0, clip, n_bins + 1)
    fits = {}
    for family, params, ll in (
        ("exponential", expon_params, expon_ll),
        ("weibull", weibull_params, weibull_ll),
        ("exponweib", exponweib_params, exponweib_ll),
    ):
        js = _js_divergence(gaps, _frozen(family, params), edges)
        fits[family] = FamilyFit(family=family, params=params, log_likelihood=ll, js_divergence=js)
    best = min(INTERARRIVAL_FAMILIES, key=lambda name: (fits[name].js_divergence, INTERARRIVAL_FAMILIES.index(name)))
    return InterarrivalFit(
        best_family=best,
        js_divergence=fits[best].js_divergence,
        fits=fits,
        n_samples=int(gaps.size),
        dropped_ties=ties,
    )


# ---------------------------------------------------------------------------
# Volatility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusteringCurve:
    lags: np.ndarray
    values: np.ndarray
    trend: float

    @property
    def positive(self) -> bool:
        head = self.values[: min(10, self.values.size)]
        return bool(head.size) and bool(np.all(head > 0))

    @property
    def decaying(self) -> bool:
        return math.isfinite(self.trend) and self.trend < 0


def volatility_clustering(series: ReturnSeries, max_lag: int = 30) -> ClusteringCurve:
    """f(tau) = corr(r^2 at t + tau, r^2 at t) with its Spearman trend in tau."""
    squared = series.returns**2
    values = np.full(max_lag, np.nan)
    for lag in range(1, max_lag + 1):
        if squared.size <= lag + 1:
            break
        head, tail = squared[:-lag], squared[lag:]
        if np.ptp(head) > 0 and np.ptp(tail) > 0:
            values[lag - 1] = np.corrcoef(head, tail)[0, 1]
    lags = np.arange(1, max_lag + 1)
    finite = np.isfinite(values)
    trend = float(stats.spearmanr(lags[finite], values[finite])[0]) if finite.sum() > 2 else math.nan
    return ClusteringCurve(lags=lags, values=values, trend=trend)


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    n_bins: int
    degenerate: bool = False


def vol_volume_corr(
    series: ReturnSeries,
    trade_times: Sequence[float],
    trade_volumes: Sequence[float],
    *,
    bin_s: float = 60.0,
    min_bins: int = 10,
    origin: Optional[float] = None,
) -> CorrelationResult:
    """Pearson correlation of per-bin return std and mean trade volume.

    Only bins holding at least one trade and two returns take part. Bins
    start at ``origin``, by default the start of the first return.
    """
    if origin is None:
        origin = float(series.times[0] - series.dt) if len(series) else 0.0
    return_bin = np.floor((series.times - series.dt - origin) / bin_s + 1e-9).astype(int)
    trade_bin = np.floor((np.asarray(trade_times, dtype=float) - origin) / bin_s + 1e-9).astype(int)
    volumes = pd.Series(np.asarray(trade_volumes, dtype=float)).groupby(trade_bin).mean()
    stds = pd.Series(series.returns).groupby(return_bin).agg(lambda r: np.std(r) if r.size > 1 else np.nan)
    joined = pd.concat({"std": stds, "volume": volumes}, axis=1, join="inner").dropna()
    if len(joined) < min_bins:
        raise AnalyticsError(f"Volatility-volume correlation needs {min_bins} bins, got {len(joined)}.")
    if joined["volume"].nunique() < 2 or joined["std"].nunique() < 2:
        LOGGER.warning("Constant volume or volatility across bins; correlation undefined.")
        return CorrelationResult(rho=math.nan, n_bins=len(joined), degenerate=True)
    rho = float(stats.pearsonr(joined["std"], joined["volume"])[0])
    return CorrelationResult(rho=rho, n_bins=len(joined))


# ---------------------------------------------------------------------------
# Numerical properties
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpreadProfile:
    mean_spread: float
    fraction_one_tick: float
    modal_spread: int
    shares: Dict[int, float] = field(default_factory=dict)


def spread_profile(logs: MarketLogs) -> SpreadProfile:
    """Time-weighted spread distribution over two-sided periods."""
    quotes = logs.quotes
    times = np.append(quotes["time"].to_numpy(), logs.close_s)
    held = np.clip(np.diff(times), 0.0, None)
    spreads = quotes["spread"].to_numpy()
    valid = np.isfinite(spreads) & (held > 0)
    if not valid.any():
        raise AnalyticsError("The book was never two-sided for a positive time.")
    weights = pd.Series(held[valid]).groupby(spreads[valid].astype(int)).sum()
    shares = (weights / weights.sum()).to_dict()
    return SpreadProfile(
        mean_spread=float(np.average(spreads[valid], weights=held[valid])),
        fraction_one_tick=float(shares.get(1, 0.0)),
        modal_spread=int(weights.idxmax()),
        shares={int(k): float(v) for k, v in shares.items()},
    )


@dataclass(frozen=True)
class IncomingVolume:
    mean: float
    coefficient_of_variation: float
    per_interval: np.ndarray


def incoming_volume(logs: MarketLogs, interval_s: float = 60.0) -> IncomingVolume:
    """Resting (non-marketable) limit volume arriving per interval."""
    n_intervals = max(1, int(math.floor(logs.duration_s / interval_s + 1e-9)))
    limits = logs.submissions[~logs.submissions["marketable"].astype(bool)]
    index = np.floor((limits["time"].to_numpy(dtype=float) - logs.open_s) / interval_s).astype(int)
    inside = (index >= 0) & (index < n_intervals)
    per_interval = np.bincount(index[inside], weights=limits["size"].to_numpy(dtype=float)[inside], minlength=n_intervals)
    mean = float(per_interval.mean())
    cv = float(per_interval.std() / mean) if mean > 0 else math.nan
    return IncomingVolume(mean=mean, coefficient_of_variation=cv, per_interval=per_interval)


@dataclass(frozen=True)
class FirstFillProfile:
    durations: np.ndarray
    censored: int
    fraction_below_one_second: float
    fit: Optional[PowerLawFit]
    ks_statistic: float
    p_value: float


def time_to_first_fill(logs: MarketLogs) -> FirstFillProfile:
    """Seconds from a resting order's submission to its first passive fill.

    Orders never filled in the log are censored and only counted.
    """
    messages = logs.messages
    resting = messages[(messages["kind"] == MessageKind.SUBMISSION) & ~messages["marketable"].astype(bool)]
    submitted = dict(zip(resting["order_id"].to_numpy(), resting["time"].to_numpy(dtype=float)))
    executions = logs.executions
    first_fill = executions.groupby("order_id")["time"].min()
    durations = []
    for order_id, submit_time in submitted.items():
        if order_id in first_fill.index:
            durations.append(float(first_fill[order_id]) - submit_time)
    values = np.asarray(durations, dtype=float)
    censored = len(submitted) - values.size
    fraction = float(np.mean(values < 1.0)) if values.size else math.nan
    positive = values[values > 0]
    fit: Optional[PowerLawFit] = None
    ks, p_value = math.nan, math.nan
    if positive.size >= 2:
        fit = power_law_mle(positive, float(positive.min()))
        ks, p_value = power_law_ks(positive, fit)
    return FirstFillProfile(
        durations=values,
        censored=censored,
        fraction_below_one_second=fraction,
        fit=fit,
        ks_statistic=ks,
        p_value=p_value,
    )
