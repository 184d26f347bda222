"""Maximum-likelihood fits for the power-law families used by the order statistics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats
from scipy.special import logsumexp

LOGGER = logging.getLogger(__name__)

EXPONENT_BOUNDS = (-5.0, 15.0)


@dataclass(frozen=True)
class PowerLawFit:
    """``exponent`` is the pdf exponent; degenerate fits carry ``inf``."""

    exponent: float
    x_min: float
    n: int
    log_likelihood: float
    x_max: Optional[float] = None
    degenerate: bool = False


def _as_samples(samples: Sequence[float], x_min: float, x_max: Optional[float] = None) -> np.ndarray:
    values = np.asarray(samples, dtype=float)
    if x_min <= 0:
        raise ValueError("x_min must be positive.")
    if values.size < 2:
        raise ValueError("Need at least two samples.")
    if np.any(values < x_min):
        raise ValueError(f"{int((values < x_min).sum())} samples fall below x_min={x_min}.")
    if x_max is not None and np.any(values > x_max):
        raise ValueError(f"{int((values > x_max).sum())} samples exceed x_max={x_max}.")
    return values


def power_law_mle(samples: Sequence[float], x_min: float) -> PowerLawFit:
    """Continuous Pareto MLE: ``alpha = 1 + n / sum(log(x / x_min))``."""
    values = _as_samples(samples, x_min)
    n = values.size
    log_sum = float(np.log(values / x_min).sum())
    if log_sum <= 0.0:
        LOGGER.warning("All %d samples equal x_min; the exponent diverges.", n)
        return PowerLawFit(exponent=math.inf, x_min=x_min, n=n, log_likelihood=math.nan, degenerate=True)
    alpha = 1.0 + n / log_sum
    log_likelihood = n * math.log((alpha - 1.0) / x_min) - alpha * log_sum
    return PowerLawFit(exponent=alpha, x_min=x_min, n=n, log_likelihood=log_likelihood)


def _log_normalizer(alpha: float, log_lo: float, log_hi: float) -> float:
    """log of the integral of x**-alpha over [exp(log_lo), exp(log_hi)]."""
    s = 1.0 - alpha
    width = log_hi - log_lo
    if abs(s * width) < 1e-12:
        return math.log(width)
    return s * log_lo + math.log(math.expm1(s * width) / s)


def truncated_power_law_log_likelihood(alpha: float, values: np.ndarray, x_min: float, x_max: float) -> float:
    log_norm = _log_normalizer(alpha, math.log(x_min), math.log(x_max))
    return float(-alpha * np.log(values).sum() - values.size * log_norm)


def truncated_power_law_mle(
    samples: Sequence[float],
    x_min: float,
    x_max: float,
    *,
    bounds: Tuple[float, float] = EXPONENT_BOUNDS,
) -> PowerLawFit:
    """MLE of the density proportional to x**-alpha on [x_min, x_max]."""
    if not x_max > x_min:
        raise ValueError("x_max must exceed x_min.")
    values = _as_samples(samples, x_min, x_max)
    result = optimize.minimize_scalar(
        lambda alpha: -truncated_power_law_log_likelihood(alpha, values, x_min, x_max),
        bounds=bounds,
        method="bounded",
        options={"xatol": 1e-8},
    )
    return PowerLawFit(
        exponent=float(result.x),
        x_min=x_min,
        x_max=x_max,
        n=values.size,
        log_likelihood=-float(result.fun),
    )


def discrete_power_law_mle(
    samples: Sequence[int],
    support_max: int,
    *,
    bounds: Tuple[float, float] = EXPONENT_BOUNDS,
) -> PowerLawFit:
    """MLE of ``p(k) ~ k**-alpha`` on ``k = 1..support_max``."""
    values = _as_samples(samples, 1.0, float(support_max))
    if np.any(values != np.round(values)):
        raise ValueError("Discrete samples must be integers.")
    log_support = np.log(np.arange(1, support_max + 1, dtype=float))
    log_sum = float(np.log(values).sum())
    n = values.size

    def negative_log_likelihood(alpha: float) -> float:
        return alpha * log_sum + n * float(logsumexp(-alpha * log_support))

    result = optimize.minimize_scalar(
        negative_log_likelihood, bounds=bounds, method="bounded", options={"xatol": 1e-8}
    )
    return PowerLawFit(
        exponent=float(result.x),
        x_min=1.0,
        x_max=float(support_max),
        n=n,
        log_likelihood=-float(result.fun),
    )


def power_law_ks(samples: Sequence[float], fit: PowerLawFit) -> Tuple[float, float]:
    """One-sample KS statistic and p-value of ``samples`` against the fitted Pareto."""
    if fit.degenerate:
        return math.nan, math.nan
    values = np.asarray(samples, dtype=float)
    values = values[values >= fit.x_min]
    result = stats.kstest(values, stats.pareto(b=fit.exponent - 1.0, scale=fit.x_min).cdf)
    return float(result.statistic), float(result.pvalue)
