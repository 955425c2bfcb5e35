"""Monte Carlo functionals of the chaos measure ``M(ds) = e^{omega(s)} ds``."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .fieldsim import FieldGrid, FieldSampler, uniform_grid
from .idspec import (ChaosParams, LevySpec, MomentClass, TestFunction, moment_class, phi)
from .kernel import IntensityKernel
from .mc import DEFAULT_CHUNK, MCEstimate, covariance_estimate, estimate, run_chunks

TRIM_FRACTION = 1e-3


def interval_weights(grid: np.ndarray, a: float, b: float) -> np.ndarray:
    """Weights ``w`` with ``w @ f`` the exact integral over ``[a, b]`` of the
    piecewise-linear interpolant of ``f`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if not (grid[0] - 1e-12 <= a <= b <= grid[-1] + 1e-12):
        raise ValueError(f"interval [{a}, {b}] is not covered by the grid")
    w = np.zeros(grid.size)
    lo = np.maximum(grid[:-1], a)
    hi = np.minimum(grid[1:], b)
    for k in np.nonzero(hi > lo)[0]:
        x0, x1 = grid[k], grid[k + 1]
        c, d = lo[k], hi[k]
        h = x1 - x0
        # integral of the two hat functions on [c, d]
        w[k] += ((x1 - c) ** 2 - (x1 - d) ** 2) / (2 * h)
        w[k + 1] += ((d - x0) ** 2 - (c - x0) ** 2) / (2 * h)
    return w


@dataclass(frozen=True)
class MassSample:
    interval: tuple
    mass: float
    seed: Optional[int] = None
    stream_id: Optional[int] = None

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")


def total_mass(field: FieldGrid, interval=(0.0, 1.0)) -> MassSample:
    a, b = interval
    w = interval_weights(field.grid, a, b)
    return MassSample((a, b), float(w @ np.exp(field.values)), field.seed, field.stream_id)


def _sampler(spec, kernel, params, grid_points) -> FieldSampler:
    return FieldSampler(spec, kernel, params, uniform_grid(grid_points))


def sample_masses(spec: LevySpec, kernel: IntensityKernel, params: ChaosParams,
                  intervals: Sequence, n_samples: int, seed: int,
                  grid_points: int = 4097, workers: int = 1,
                  chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """Masses of each interval for ``n_samples`` fields, shape ``(n_samples, k)``."""
    sampler = _sampler(spec, kernel, params, grid_points)
    W = np.stack([interval_weights(sampler.grid, a, b) for a, b in intervals], axis=1)

    def fn(rng, size):
        return np.exp(sampler.sample(rng, size)) @ W

    masses = run_chunks(fn, n_samples, seed, chunk, workers)
    if np.any(masses <= 0):
        raise FloatingPointError("nonpositive mass from numeric underflow")
    return masses


ESTIMATORS = ("size_biased", "plain", "control")


def mc_moment(spec: LevySpec, kernel: IntensityKernel, params: ChaosParams, n: int,
              n_samples: int, seed: int, grid_points: int = 4097, workers: int = 1,
              interval=(0.0, 1.0), estimator: str = "size_biased") -> MCEstimate:
    """Monte Carlo estimate of ``E[M(interval)^n]``.

    Parameters
    ----------
    estimator : str
        ``"plain"`` averages ``M^n``.  ``"control"`` averages
        ``M^n - n |I|^{n-1} (M - |I|)``, unbiased because ``E M = |I|``.
        ``"size_biased"`` (default for ``n >= 2``) uses
        ``E[M^n] = sum_j w_j E[e^{omega(s_j)} M^{n-1}]``: the tilt point is
        drawn with the quadrature weights and the field from the exactly
        reweighted law, so the variance involves ``E[M^{2n-1}]`` instead of
        ``E[M^{2n}]``.

    Returns
    -------
    MCEstimate
        ``extras`` holds the estimator name and, for ``plain``, the mean
        after removing the top 0.1% of samples (tail-sensitivity diagnostic).
    """
    t0 = time.perf_counter()
    vals = moment_samples(spec, kernel, params, n, n_samples, seed, grid_points, workers,
                          interval, estimator)
    if n == 1 or estimator != "size_biased":
        keep = np.sort(vals)[: max(2, int(round(vals.size * (1 - TRIM_FRACTION))))]
        return estimate(vals, seed, t0, estimator=estimator if n > 1 else "plain",
                        trimmed_mean=math.fsum(keep) / keep.size)
    return estimate(vals, seed, t0, estimator=estimator)


def moment_samples(spec: LevySpec, kernel: IntensityKernel, params: ChaosParams, n: int,
                   n_samples: int, seed: int, grid_points: int = 4097, workers: int = 1,
                   interval=(0.0, 1.0), estimator: str = "size_biased") -> np.ndarray:
    """Per-sample values whose mean is the estimator of ``mc_moment``."""
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if n < 1:
        raise ValueError("moment order must be >= 1")
    if n > 1 and moment_class(spec, params.mu, n) is not MomentClass.FINITE:
        raise ValueError(f"moment of order {n} is not finite at mu={params.mu}")
    a, b = interval
    length = b - a
    if n == 1 or estimator != "size_biased":
        m = sample_masses(spec, kernel, params, [interval], n_samples, seed, grid_points,
                          workers)[:, 0]
        vals = m ** n
        if estimator == "control" and n > 1:
            vals = vals - n * length ** (n - 1) * (m - length)
        return vals
    sampler = _sampler(spec, kernel, params, grid_points)
    w = interval_weights(sampler.grid, a, b)
    total = math.fsum(w)
    p = w / total

    def fn(rng, size):
        idx = rng.choice(w.size, size=size, p=p)
        mass = np.exp(sampler.sample_tilted(rng, idx)) @ w
        return total * mass ** (n - 1)

    return run_chunks(fn, n_samples, seed, DEFAULT_CHUNK, workers)


def _snap(grid: np.ndarray, ts) -> np.ndarray:
    idx = np.searchsorted(grid, ts)
    idx = np.clip(idx, 1, grid.size - 1)
    left = grid[idx - 1]
    right = grid[idx]
    return np.where(np.abs(np.asarray(ts) - left) <= np.abs(right - np.asarray(ts)), idx - 1, idx)


def v_functional(spec: LevySpec, kernel: IntensityKernel, params: ChaosParams,
                 F: TestFunction, ts: Sequence[float], n_samples: int, seed: int,
                 grid_points: int = 4097, workers: int = 1) -> MCEstimate:
    """``E[F(M) exp(omega(t_1) + ... + omega(t_n))]``; ``ts`` snap to the grid."""
    ts = np.asarray(ts, dtype=float)
    if ts.size > 1 and np.any(np.diff(ts) <= 0):
        raise ValueError("ts must be strictly increasing")
    t0 = time.perf_counter()
    sampler = _sampler(spec, kernel, params, grid_points)
    w = interval_weights(sampler.grid, 0.0, 1.0)
    idx = _snap(sampler.grid, ts) if ts.size else np.zeros(0, dtype=int)

    def fn(rng, size):
        om = sampler.sample(rng, size)
        mass = np.exp(om) @ w
        return F(mass) * np.exp(om[:, idx].sum(axis=1))

    vals = run_chunks(fn, n_samples, seed, DEFAULT_CHUNK, workers)
    return estimate(vals, seed, t0, snapped_ts=sampler.grid[idx].tolist())


def girsanov_rhs(spec: LevySpec, kernel: IntensityKernel, params: ChaosParams,
                 F: TestFunction, ts: Sequence[float], n_samples: int, seed: int,
                 grid_points: int = 4097, workers: int = 1) -> MCEstimate:
    """Gaussian change of measure: ``exp(mu sum rho(t_j - t_i)) E F(int e^{omega + mu sum rho(s - t_j)})``.

    Valid for Gaussian specs, where the drift ``mu*sigma2*rho`` is exact.
    """
    if spec.atoms:
        raise ValueError("the drift form of the change of measure is Gaussian only")
    t0 = time.perf_counter()
    sampler = _sampler(spec, kernel, params, grid_points)
    grid = sampler.grid
    w = interval_weights(grid, 0.0, 1.0)
    ts = grid[_snap(grid, np.asarray(ts, dtype=float))] if len(ts) else np.zeros(0)
    eps = params.epsilon
    shift = params.mu * spec.sigma2 * sum(kernel.rho_eps(grid - t, eps) for t in ts) if ts.size else 0.0
    pair = math.fsum(kernel.rho_eps(ts[j] - ts[i], eps) for i in range(ts.size) for j in range(i + 1, ts.size))
    factor = math.exp(params.mu * spec.sigma2 * pair)

    def fn(rng, size):
        om = sampler.sample(rng, size)
        return factor * F(np.exp(om + shift) @ w)

    vals = run_chunks(fn, n_samples, seed, DEFAULT_CHUNK, workers)
    return estimate(vals, seed, t0, snapped_ts=ts.tolist())


@dataclass(frozen=True)
class CovarianceProbe:
    t: float
    tau: float
    params: ChaosParams
    n_samples: int = 20000

    def __post_init__(self):
        if not 0 < self.t < 1:
            raise ValueError("t must lie in (0, 1)")
        if not 0 < self.tau < self.t:
            raise ValueError("need 0 < tau < t so that the intervals are disjoint")
        if self.t + self.tau > 1:
            raise ValueError("need t + tau <= 1")


def log_mass_covariance(spec: LevySpec, kernel: IntensityKernel, probe: CovarianceProbe,
                        seed: int, grid_points: int = 4097, workers: int = 1) -> MCEstimate:
    """``Cov(log M(t, t+tau), log M(0, tau))`` from common field samples."""
    t0 = time.perf_counter()
    if probe.params.mu == 0:
        return MCEstimate(0.0, 0.0, probe.n_samples, seed, 0.0)
    m = sample_masses(spec, kernel, probe.params, [(0.0, probe.tau), (probe.t, probe.t + probe.tau)],
                      probe.n_samples, seed, grid_points, workers)
    return covariance_estimate(np.log(m[:, 1]), np.log(m[:, 0]), seed, t0)


def log_mass_covariances(spec: LevySpec, kernel: IntensityKernel, params: ChaosParams,
                         t_list: Sequence[float], tau: float, n_samples: int, seed: int,
                         grid_points: int = 4097, workers: int = 1):
    """Covariances for several ``t`` from the same field samples."""
    for t in t_list:
        CovarianceProbe(t, tau, params, n_samples)
    intervals = [(0.0, tau)] + [(t, t + tau) for t in t_list]
    t0 = time.perf_counter()
    m = sample_masses(spec, kernel, params, intervals, n_samples, seed, grid_points, workers)
    logs = np.log(m)
    return [covariance_estimate(logs[:, k + 1], logs[:, 0], seed, t0) for k in range(len(t_list))]


def fit_line(x, y):
    """Least-squares slope, intercept and slope standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("a regression needs at least three points")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    s2 = float(resid @ resid) / (x.size - 2)
    se = math.sqrt(s2 / float(((x - x.mean()) ** 2).sum()))
    return float(coef[0]), float(coef[1]), se


def scaling_moments(spec: LevySpec, kernel: IntensityKernel, mu: float, n: int,
                    scales: Sequence[float], n_samples: int, seed: int,
                    epsilon: float = 2.0 ** -10, grid_points: int = 4097,
                    workers: int = 1, estimator: str = "size_biased") -> np.ndarray:
    """MC estimates of ``E[M(0,t)^n]`` for each scale ``t``.

    ``"plain"`` reuses one batch of fields for every scale; ``"size_biased"``
    runs the tilted estimator of :func:`mc_moment` per scale, which costs one
    batch per scale but keeps the relative error flat as ``t`` shrinks.
    """
    scales = np.asarray(scales, dtype=float)
    if np.any((scales <= 0) | (scales >= 1)):
        raise ValueError("scales must lie in (0, 1)")
    params = ChaosParams(mu, epsilon)
    if n > 1 and moment_class(spec, mu, n) is not MomentClass.FINITE:
        raise ValueError(f"moment of order {n} is not finite at mu={mu}")
    if estimator == "size_biased" and n > 1:
        return np.array([mc_moment(spec, kernel, params, n, n_samples, seed, grid_points,
                                   workers, (0.0, float(t))).mean for t in scales])
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    m = sample_masses(spec, kernel, params, [(0.0, t) for t in scales], n_samples, seed,
                      grid_points, workers)
    return np.array([math.fsum(col) / col.size for col in (m ** n).T])


def scaling_exponent(spec: LevySpec, kernel: IntensityKernel, mu: float, n: int,
                     scales: Sequence[float], n_samples: int, seed: int,
                     epsilon: float = 2.0 ** -10, grid_points: int = 4097, workers: int = 1,
                     estimator: str = "size_biased"):
    """Slope of ``log E[M(0,t)^n]`` against ``log t``: ``(slope, intercept, stderr)``."""
    scales = np.asarray(scales, dtype=float)
    if scales.size < 3:
        raise ValueError("a regression needs at least three scales")
    moments = scaling_moments(spec, kernel, mu, n, scales, n_samples, seed, epsilon,
                              grid_points, workers, estimator)
    return fit_line(np.log(scales), np.log(moments))


def multiplier_cf(spec: LevySpec, mu: float, gamma: float, q: float) -> complex:
    """``gamma^{iq - mu phi(q)}``, the characteristic function of ``log W_gamma``."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return complex(np.exp((1j * q - mu * phi(spec, q)) * math.log(gamma)))
