"""Maximum-likelihood fitting of exponential-kernel Hawkes processes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
from numba import njit
from scipy import optimize

from background.intensity import HawkesParams
from calibration.dataset import EventSequence, EventStreamDataset

LOGGER = logging.getLogger(__name__)

LOG_BOUNDS = (-25.0, 8.0)
MIN_INIT = 1e-6


@njit(nogil=True)
def _log_likelihood_and_gradient(times, types, horizon, mu, alpha, delta):
    """Recursive O(n K^2) log-likelihood with its gradient.

    ``decayed[k, j]`` holds sum(exp(-delta[k, j] * age)) over past type-j
    events and ``weighted[k, j]`` the age-weighted sum behind the delta gradient.
    """
    dim = mu.shape[0]
    decayed = np.zeros((dim, dim))
    weighted = np.zeros((dim, dim))
    grad_mu = np.zeros(dim)
    grad_alpha = np.zeros((dim, dim))
    grad_delta = np.zeros((dim, dim))
    log_likelihood = 0.0
    last_time = 0.0
    last_type = -1

    for i in range(times.shape[0]):
        t = times[i]
        dt = t - last_time
        for k in range(dim):
            for j in range(dim):
                carried = decayed[k, j] + (1.0 if j == last_type else 0.0)
                factor = math.exp(-delta[k, j] * dt)
                weighted[k, j] = factor * (weighted[k, j] + dt * carried)
                decayed[k, j] = factor * carried
        k = types[i]
        rate = mu[k]
        for j in range(dim):
            rate += alpha[k, j] * decayed[k, j]
        log_likelihood += math.log(rate)
        grad_mu[k] += 1.0 / rate
        for j in range(dim):
            grad_alpha[k, j] += decayed[k, j] / rate
            grad_delta[k, j] -= alpha[k, j] * weighted[k, j] / rate
        last_time = t
        last_type = k

    for k in range(dim):
        log_likelihood -= mu[k] * horizon
        grad_mu[k] -= horizon
    for i in range(times.shape[0]):
        j = types[i]
        remaining = horizon - times[i]
        for k in range(dim):
            d = delta[k, j]
            factor = math.exp(-d * remaining)
            mass = (1.0 - factor) / d
            log_likelihood -= alpha[k, j] * mass
            grad_alpha[k, j] -= mass
            grad_delta[k, j] -= alpha[k, j] * (remaining * factor / d - mass / d)
    return log_likelihood, grad_mu, grad_alpha, grad_delta


@njit(nogil=True)
def _compensator_increments(times, types, mu, alpha, delta):
    """Total compensator over each inter-event interval, starting from 0."""
    dim = mu.shape[0]
    decayed = np.zeros((dim, dim))
    increments = np.zeros(times.shape[0])
    base = 0.0
    for k in range(dim):
        base += mu[k]
    last_time = 0.0
    last_type = -1
    for i in range(times.shape[0]):
        dt = times[i] - last_time
        total = base * dt
        for k in range(dim):
            for j in range(dim):
                carried = decayed[k, j] + (1.0 if j == last_type else 0.0)
                d = delta[k, j]
                total += alpha[k, j] * carried * (1.0 - math.exp(-d * dt)) / d
                decayed[k, j] = carried * math.exp(-d * dt)
        increments[i] = total
        last_time = times[i]
        last_type = types[i]
    return increments


def _arrays(params: HawkesParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        np.ascontiguousarray(params.mu, dtype=np.float64),
        np.ascontiguousarray(params.alpha, dtype=np.float64),
        np.ascontiguousarray(params.delta, dtype=np.float64),
    )


def hawkes_log_likelihood(params: HawkesParams, sequence: EventSequence) -> float:
    mu, alpha, delta = _arrays(params)
    value, _, _, _ = _log_likelihood_and_gradient(
        sequence.times, sequence.types, float(sequence.horizon), mu, alpha, delta
    )
    return float(value)


def hawkes_log_likelihood_direct(params: HawkesParams, sequence: EventSequence) -> float:
    """Quadratic reference evaluation straight from the intensity definition."""
    mu, alpha, delta = _arrays(params)
    times, types, horizon = sequence.times, sequence.types, sequence.horizon
    total = 0.0
    for i in range(len(times)):
        k = types[i]
        rate = mu[k]
        for h in range(i):
            rate += alpha[k, types[h]] * math.exp(-delta[k, types[h]] * (times[i] - times[h]))
        total += math.log(rate)
    total -= float(mu.sum()) * horizon
    for h in range(len(times)):
        j = types[h]
        for k in range(len(mu)):
            total -= alpha[k, j] / delta[k, j] * (1.0 - math.exp(-delta[k, j] * (horizon - times[h])))
    return total


def dataset_log_likelihood(params: HawkesParams, sequences: Sequence[EventSequence]) -> float:
    """Sums per-sequence terms in input order."""
    return float(sum(hawkes_log_likelihood(params, sequence) for sequence in sequences))


def compensator_increments(params: HawkesParams, sequence: EventSequence) -> np.ndarray:
    """Rescaled inter-arrival times; unit exponential when ``params`` generated the data."""
    mu, alpha, delta = _arrays(params)
    return _compensator_increments(sequence.times, sequence.types, mu, alpha, delta)


@dataclass(frozen=True)
class HawkesFit:
    params: HawkesParams
    log_likelihood: float
    initial_log_likelihood: float
    iterations: int
    converged: bool


def _pack(params: HawkesParams) -> np.ndarray:
    return np.log(np.concatenate([params.mu.ravel(), params.alpha.ravel(), params.delta.ravel()]))


def _unpack(theta: np.ndarray, dim: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    values = np.exp(theta)
    mu = np.ascontiguousarray(values[:dim])
    alpha = np.ascontiguousarray(values[dim : dim + dim * dim].reshape(dim, dim))
    delta = np.ascontiguousarray(values[dim + dim * dim :].reshape(dim, dim))
    return mu, alpha, delta


def _spectral_radius(alpha: np.ndarray, delta: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(alpha / delta))))


def hawkes_mle(
    dataset: EventStreamDataset,
    init: HawkesParams,
    *,
    max_iter: int = 500,
    tol: float = 1e-9,
    fit_delta: bool = True,
) -> HawkesFit:
    """Maximizes the log-likelihood over log-parameters with L-BFGS-B.

    A non-stationary optimum is pulled back along the segment towards
    ``init`` until the branching matrix is stable again.
    """
    init.validate()
    sequences = dataset.train
    n_events = max(1, sum(len(sequence) for sequence in sequences))
    dim = init.dim
    start = HawkesParams(
        mu=init.mu,
        alpha=np.maximum(init.alpha, MIN_INIT),
        delta=init.delta,
    )
    theta0 = _pack(start)
    n_delta = dim * dim

    def objective(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        mu, alpha, delta = _unpack(theta, dim)
        value = 0.0
        gradient = np.zeros_like(theta)
        for sequence in sequences:
            ll, g_mu, g_alpha, g_delta = _log_likelihood_and_gradient(
                sequence.times, sequence.types, float(sequence.horizon), mu, alpha, delta
            )
            value += ll
            gradient += np.concatenate([g_mu * mu, (g_alpha * alpha).ravel(), (g_delta * delta).ravel()])
        if not fit_delta:
            gradient[-n_delta:] = 0.0
        return -value / n_events, -gradient / n_events

    bounds = [LOG_BOUNDS] * theta0.size
    if not fit_delta:
        bounds[-n_delta:] = [(value, value) for value in theta0[-n_delta:]]
    result = optimize.minimize(
        objective,
        theta0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-8},
    )
    if not result.success:
        LOGGER.warning("Hawkes MLE did not converge after %d iterations: %s", result.nit, result.message)

    initial = dataset_log_likelihood(init, sequences)
    theta = np.asarray(result.x)
    fitted = None
    for step in 0.5 ** np.arange(0, 30):
        mu, alpha, delta = _unpack(theta0 + step * (theta - theta0), dim)
        if _spectral_radius(alpha, delta) < 1.0:
            fitted = HawkesParams(mu=mu, alpha=alpha, delta=delta)
            break
    if fitted is None:
        fitted = init
    elif step < 1.0:
        LOGGER.warning("Hawkes optimum was non-stationary; pulled back by factor %.3g.", step)
    fitted_ll = dataset_log_likelihood(fitted, sequences)
    if fitted_ll < initial:
        fitted, fitted_ll = init, initial
    LOGGER.info("Hawkes MLE: log-likelihood %.4f -> %.4f in %d iterations.", initial, fitted_ll, result.nit)
    return HawkesFit(
        params=fitted,
        log_likelihood=fitted_ll,
        initial_log_likelihood=initial,
        iterations=int(result.nit),
        converged=bool(result.success),
    )


def relative_errors(truth: HawkesParams, fitted: HawkesParams) -> Dict[str, float]:
    """Largest relative error per parameter block, over the nonzero true entries."""
    errors = {}
    for name in ("mu", "alpha", "delta"):
        expected = getattr(truth, name)
        actual = getattr(fitted, name)
        nonzero = expected != 0
        errors[name] = float(np.max(np.abs(actual - expected)[nonzero] / np.abs(expected[nonzero])))
    return errors
