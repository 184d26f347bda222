"""Monte-Carlo Sobol indices from a base matrix and its column-swapped copies."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from background.order_stats import SYMBOLS, OrderStatsParams
from sensitivity.response import RESPONSE_NAMES

LOGGER = logging.getLogger(__name__)

RECOMMENDED_MIN_SAMPLES = 50

# Initial value and symmetric fluctuation of each order statistic.
DEFAULT_FLUCTUATIONS: Dict[str, float] = {
    "P": 0.25,
    "V1": 0.25,
    "V2": 0.25,
    "Mi": 1.0,
    "Mv": 0.25,
    "Lb": 2500.0,
    "Ip": 0.025,
}

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SensitivityParameter:
    symbol: str
    initial: float
    fluctuation: float

    @property
    def bounds(self) -> Tuple[float, float]:
        return self.initial - self.fluctuation, self.initial + self.fluctuation


@dataclass(frozen=True)
class SensitivitySpace:
    parameters: Tuple[SensitivityParameter, ...]
    criteria: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.parameters:
            raise ValueError("A sensitivity space needs at least one parameter.")
        if not self.criteria:
            raise ValueError("A sensitivity space needs at least one criterion.")
        for parameter in self.parameters:
            if parameter.fluctuation < 0:
                raise ValueError(f"Fluctuation of {parameter.symbol} must be non-negative.")

    @property
    def dim(self) -> int:
        return len(self.parameters)

    @property
    def symbols(self) -> List[str]:
        return [parameter.symbol for parameter in self.parameters]

    @property
    def lower(self) -> np.ndarray:
        return np.array([parameter.bounds[0] for parameter in self.parameters])

    @property
    def upper(self) -> np.ndarray:
        return np.array([parameter.bounds[1] for parameter in self.parameters])

    def scale(self, unit: np.ndarray) -> np.ndarray:
        """Maps points of the unit cube onto the parameter box."""
        return self.lower + unit * (self.upper - self.lower)

    def shifts(self, point: np.ndarray) -> Dict[str, float]:
        """Offsets of ``point`` from the initial values, keyed by symbol."""
        return {
            parameter.symbol: float(value - parameter.initial)
            for parameter, value in zip(self.parameters, point)
        }


def order_stats_space(
    stats: Optional[OrderStatsParams] = None,
    criteria: Sequence[str] = (),
    fluctuations: Optional[Mapping[str, float]] = None,
) -> SensitivitySpace:
    """The seven order statistics around ``stats`` with the default fluctuations."""
    stats = stats or OrderStatsParams()
    fluctuations = dict(DEFAULT_FLUCTUATIONS, **(fluctuations or {}))
    parameters = tuple(
        SensitivityParameter(symbol=symbol, initial=stats.symbol_value(symbol), fluctuation=fluctuations[symbol])
        for symbol in SYMBOLS
    )
    return SensitivitySpace(parameters=parameters, criteria=tuple(criteria) or RESPONSE_NAMES)


@dataclass
class SobolIndices:
    """Indices per (parameter, criterion); ``undefined`` marks criteria with no variance."""

    symbols: List[str]
    criteria: List[str]
    total: np.ndarray
    variance: np.ndarray
    undefined: np.ndarray
    first_order: Optional[np.ndarray] = None

    @property
    def standardized(self) -> np.ndarray:
        """Total indices z-scored within each criterion; constant columns map to zero."""
        mean = np.nanmean(self.total, axis=0)
        std = np.nanstd(self.total, axis=0)
        safe = np.where(std > 0, std, 1.0)
        z = (self.total - mean) / safe
        z[:, ~(std > 0)] = 0.0
        z[:, self.undefined] = np.nan
        return z

    def rows(self) -> List[Dict[str, object]]:
        standardized = self.standardized
        rows = []
        for i, symbol in enumerate(self.symbols):
            for j, criterion in enumerate(self.criteria):
                row: Dict[str, object] = {
                    "parameter": symbol,
                    "criterion": criterion,
                    "raw_index": float(self.total[i, j]),
                    "standardized_index": float(standardized[i, j]),
                }
                if self.first_order is not None:
                    row["first_order_index"] = float(self.first_order[i, j])
                rows.append(row)
        return rows


def sample_matrices(space: SensitivitySpace, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Independent uniform base matrices A and B, shape ``(n, dim)``."""
    return space.scale(rng.random(size=(n, space.dim))), space.scale(rng.random(size=(n, space.dim)))


def column_swapped(a: np.ndarray, b: np.ndarray, column: int) -> np.ndarray:
    """A with column ``column`` taken from B."""
    swapped = a.copy()
    swapped[:, column] = b[:, column]
    return swapped


def _evaluate_rows(model_fn: Callable[[np.ndarray], Sequence[float]]) -> Evaluator:
    def evaluate(matrix: np.ndarray) -> np.ndarray:
        return np.array([np.asarray(model_fn(row), dtype=float) for row in matrix])

    return evaluate


def sobol_total_indices(
    space: SensitivitySpace,
    model_fn: Optional[Callable[[np.ndarray], Sequence[float]]],
    n: int,
    rng: np.random.Generator,
    *,
    first_order: bool = False,
    evaluate: Optional[Evaluator] = None,
) -> SobolIndices:
    """Jansen total-effect indices over A and the dim column-swapped copies.

    The model is evaluated on n * (dim + 1) points, plus n more on B when
    ``first_order`` requests the Saltelli first-order indices. ``evaluate``
    maps a whole matrix to its responses, rows kept in order; by default
    ``model_fn`` is applied row by row.
    """
    if n < 2:
        raise ValueError("Sobol estimation needs at least two base samples.")
    if n < RECOMMENDED_MIN_SAMPLES:
        LOGGER.warning("Sobol estimate from only %d base samples; expect wide Monte-Carlo error.", n)
    if evaluate is None:
        if model_fn is None:
            raise ValueError("Provide model_fn or evaluate.")
        evaluate = _evaluate_rows(model_fn)

    a, b = sample_matrices(space, n, rng)
    y_a = _responses(evaluate(a), n, len(space.criteria))
    variance = np.var(y_a, axis=0, ddof=1)
    undefined = ~(variance > 0)
    if undefined.any():
        LOGGER.warning(
            "Zero response variance for %s; indices undefined.",
            ", ".join(c for c, flag in zip(space.criteria, undefined) if flag),
        )
    safe_variance = np.where(undefined, 1.0, variance)
    y_b = _responses(evaluate(b), n, len(space.criteria)) if first_order else None

    total = np.empty((space.dim, len(space.criteria)))
    first = np.empty_like(total) if first_order else None
    for i in range(space.dim):
        y_ab = _responses(evaluate(column_swapped(a, b, i)), n, len(space.criteria))
        total[i] = np.mean((y_a - y_ab) ** 2, axis=0) / 2.0 / safe_variance
        if first is not None:
            first[i] = np.mean(y_b * (y_ab - y_a), axis=0) / safe_variance
        LOGGER.debug("Sobol column %s done.", space.parameters[i].symbol)
    total[:, undefined] = np.nan
    if first is not None:
        first[:, undefined] = np.nan
    return SobolIndices(
        symbols=space.symbols,
        criteria=list(space.criteria),
        total=total,
        variance=variance,
        undefined=undefined,
        first_order=first,
    )


def _responses(values: np.ndarray, n: int, n_criteria: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape != (n, n_criteria):
        raise ValueError(f"Expected responses of shape {(n, n_criteria)}, got {values.shape}.")
    return values
