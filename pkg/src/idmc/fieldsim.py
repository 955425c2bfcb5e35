"""Sampling of the regularized log-correlated field and its exact joint law.

The field is the sum of two independent parts.  The Gaussian part has
covariance ``mu*sigma2*rho_eps``; on uniform grids it is drawn by circulant
embedding, elsewhere by a jittered Cholesky factor.  The jump part is a
marked Poisson cloud in the (time, scale) half plane, and ``omega(s)`` sums
the marks of the points inside the cone above ``s``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import interpolate, linalg

from .idspec import ChaosParams, LevySpec, compensator_rate, d_coeff, phi
from .kernel import IntensityKernel

DENSE_CAP = 4096
DEFAULT_GRID_POINTS = 4097
JITTERS = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)
INVERSE_CDF_KNOTS = 256


def uniform_grid(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    if points < 2:
        raise ValueError("a grid needs at least two points")
    return np.linspace(0.0, 1.0, int(points))


def check_grid(grid: np.ndarray, epsilon: float, warn: bool = True) -> bool:
    """Validate ordering and range; warn if the spacing exceeds ``epsilon/4``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a nonempty 1-D array")
    if grid[0] < 0 or grid[-1] > 1:
        raise ValueError("grid must lie in [0, 1]")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing")
    fine = grid.size < 2 or float(np.max(np.diff(grid))) <= epsilon / 4 * (1 + 1e-12)
    if warn and not fine:
        warnings.warn(f"grid spacing {np.max(np.diff(grid)):.3g} exceeds epsilon/4 = "
                      f"{epsilon / 4:.3g}; mass estimates will be biased", stacklevel=3)
    return fine


def _is_uniform(grid: np.ndarray) -> bool:
    if grid.size < 3:
        return False
    d = np.diff(grid)
    return bool(np.allclose(d, d[0], rtol=1e-9, atol=0))


@dataclass
class FieldGrid:
    grid: np.ndarray
    values: np.ndarray
    params: ChaosParams
    spec_label: str = ""
    kernel_label: str = ""
    seed: Optional[int] = None
    stream_id: Optional[int] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("values and grid must have the same shape")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "omega"])
            for s, v in zip(self.grid, self.values):
                w.writerow([repr(float(s)), repr(float(v))])


# --------------------------------------------------------------------------
# Samplers
# --------------------------------------------------------------------------

class _GaussianPart:
    def __init__(self, spec, kernel, params, grid):
        self.G = grid.size
        scale = params.mu * spec.sigma2
        self.mean = -0.5 * scale * kernel.rho_eps(0.0, params.epsilon)
        self.zero = scale == 0
        if self.zero:
            return
        if _is_uniform(grid):
            h = grid[1] - grid[0]
            # period >= 2 keeps the periodized kernel equal to rho on the grid
            M = max(2 * (self.G - 1), int(math.ceil(2.0 / h - 1e-9)))
            k = np.arange(M)
            lag = np.minimum(k, M - k) * h
            row = scale * kernel.rho_eps(lag, params.epsilon)
            lam = sfft.fft(row).real
            if lam.min() < -1e-8 * lam.max():
                raise np.linalg.LinAlgError("circulant embedding is not positive semidefinite")
            self.sqrt_lam = np.sqrt(np.clip(lam, 0.0, None) / M)
            self.M = M
            self.chol = None
        else:
            if self.G > DENSE_CAP:
                raise ValueError(f"non-uniform grids are limited to {DENSE_CAP} points")
            cov = scale * kernel.rho_eps(grid[:, None] - grid[None, :], params.epsilon)
            diag = float(np.max(np.diag(cov)))
            for jit in JITTERS:
                try:
                    self.chol = linalg.cholesky(cov + jit * diag * np.eye(self.G), lower=True)
                    break
                except linalg.LinAlgError:
                    continue
            else:
                raise np.linalg.LinAlgError("covariance factorization failed after maximal "
                                            "jitter; the kernel is not positive definite")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.zero:
            return np.zeros((size, self.G))
        if self.chol is not None:
            z = rng.standard_normal((size, self.G))
            return self.mean + z @ self.chol.T
        half = (size + 1) // 2
        z = rng.standard_normal((half, self.M)) + 1j * rng.standard_normal((half, self.M))
        y = sfft.fft(self.sqrt_lam * z, axis=1)[:, : self.G]
        out = np.concatenate([y.real, y.imag], axis=0)[:size]
        return self.mean + out


def _log_scale_table(density, eps):
    """Mass and monotone inverse CDF (in ``log l``) of ``density(l) dl / l`` on ``[eps, 1]``."""
    x = np.linspace(math.log(eps), 0.0, INVERSE_CDF_KNOTS)
    gx, gw = np.polynomial.legendre.leggauss(16)
    pieces = []
    for a, b in zip(x[:-1], x[1:]):
        nodes = a + (b - a) * 0.5 * (gx + 1)
        pieces.append((b - a) * 0.5 * float(np.dot(gw, density(np.exp(nodes)))))
    cdf = np.concatenate([[0.0], np.cumsum(pieces)])
    return float(cdf[-1]), interpolate.PchipInterpolator(cdf / cdf[-1], x)


class _JumpPart:
    def __init__(self, spec, kernel, params, grid):
        self.grid = grid
        self.G = grid.size
        eps = params.epsilon
        total = spec.total_mass
        self.zero = params.mu == 0 or not spec.atoms
        self.drift = params.mu * kernel.cone_mass(eps) * compensator_rate(spec)
        if self.zero:
            return
        self.locs = spec.locations
        self.probs = spec.masses / total
        self.top_rate = params.mu * total * 2.0 * kernel.f_top
        self.eps = eps
        self.f_top = kernel.f_top
        self.canonical = kernel.is_canonical
        self.cone_mass = kernel.cone_mass(eps)
        if self.canonical:
            w_pow = 1.0 / eps - 1.0
            w_log = -math.log(eps)
            self.p_pow = w_pow / (w_pow + w_log)
            self.band_rate = params.mu * total * (w_pow + w_log)
        else:
            band_total, self.inv_cdf = _log_scale_table(
                lambda l: (1.0 + l) * kernel.f_of_l(l) / l, eps)
            self.band_rate = params.mu * total * band_total
            _, self.cone_inv_cdf = _log_scale_table(kernel.f_of_l, eps)
        self.mu = params.mu
        self.masses = spec.masses

    def _scales(self, rng, k):
        U = rng.random(k)
        if self.canonical:
            pick = rng.random(k) < self.p_pow
            inv = 1.0 / self.eps
            return np.where(pick, 1.0 / (inv - U * (inv - 1.0)), self.eps ** (1.0 - U))
        return np.exp(self.inv_cdf(U))

    def cloud(self, rng: np.random.Generator, size: int):
        """Sample ids, times, scales and marks for ``size`` independent clouds."""
        nb = rng.poisson(self.band_rate, size)
        nt = rng.poisson(self.top_rate, size)
        kb, kt = int(nb.sum()), int(nt.sum())
        lb = self._scales(rng, kb)
        tb = -lb / 2 + rng.random(kb) * (1.0 + lb)
        lt = 1.0 / (1.0 - rng.random(kt))
        tt = -0.5 + 2.0 * rng.random(kt)
        marks = self.locs[rng.choice(len(self.locs), size=kb + kt, p=self.probs)]
        sid = np.concatenate([np.repeat(np.arange(size), nb), np.repeat(np.arange(size), nt)])
        return sid, np.concatenate([tb, tt]), np.concatenate([lb, lt]), marks

    def field_from_cloud(self, sid, t, l, u, size) -> np.ndarray:
        half = 0.5 * np.minimum(l, 1.0)
        lo = np.searchsorted(self.grid, t - half, side="left")
        hi = np.searchsorted(self.grid, t + half, side="right")
        width = self.G + 1
        diff = np.bincount(sid * width + lo, weights=u, minlength=size * width)
        diff -= np.bincount(sid * width + hi, weights=u, minlength=size * width)
        out = np.cumsum(diff.reshape(size, width), axis=1)[:, : self.G]
        return out - self.drift

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.zero:
            return np.zeros((size, self.G))
        sid, t, l, u = self.cloud(rng, size)
        return self.field_from_cloud(sid, t, l, u, size)

    def _cone_scales(self, rng, k):
        """Scales of points uniform in one cone: ``f(l)/l`` below 1, ``f/l^2`` above."""
        U = rng.random(k)
        top = rng.random(k) < self.f_top / self.cone_mass
        if self.canonical:
            band = self.eps ** (1.0 - U)
        else:
            band = np.exp(self.cone_inv_cdf(U))
        return np.where(top, 1.0 / (1.0 - U), band)

    def sample_tilted(self, rng: np.random.Generator, s: np.ndarray) -> np.ndarray:
        """Fields under the law reweighted by ``exp(omega(s_i))``, one ``s_i`` per row.

        Inside the cone above ``s_i`` the intensity of marks ``u`` is multiplied
        by ``e^u``: thinning for ``u < 0``, extra points for ``u > 0``.
        """
        size = s.size
        if self.zero:
            return np.zeros((size, self.G))
        sid, t, l, u = self.cloud(rng, size)
        inside = np.abs(t - s[sid]) <= 0.5 * np.minimum(l, 1.0)
        keep = ~inside | (u >= 0) | (rng.random(u.size) < np.exp(np.minimum(u, 0.0)))
        parts = [(sid[keep], t[keep], l[keep], u[keep])]
        for loc, mass in zip(self.locs, self.masses):
            if loc <= 0:
                continue
            rate = self.mu * mass * math.expm1(loc) * self.cone_mass
            counts = rng.poisson(rate, size)
            k = int(counts.sum())
            xs = np.repeat(np.arange(size), counts)
            lx = self._cone_scales(rng, k)
            tx = s[xs] + (rng.random(k) - 0.5) * np.minimum(lx, 1.0)
            parts.append((xs, tx, lx, np.full(k, loc)))
        sid, t, l, u = (np.concatenate(c) for c in zip(*parts))
        return self.field_from_cloud(sid, t, l, u, size)


class FieldSampler:
    """Batched sampler of ``omega`` on a fixed grid.

    Parameters
    ----------
    spec, kernel, params : model description.
    grid : increasing points in ``[0, 1]``; defaults to 4097 uniform points.
    parts : ``"both"``, ``"gaussian"`` or ``"jump"``.
    """

    def __init__(self, spec: LevySpec, kernel: IntensityKernel, params: ChaosParams,
                 grid: Optional[np.ndarray] = None, parts: str = "both", warn: bool = True):
        params.require_nondegenerate(spec)
        self.grid = uniform_grid() if grid is None else np.asarray(grid, dtype=float)
        check_grid(self.grid, params.epsilon, warn=warn)
        self.spec, self.kernel, self.params = spec, kernel, params
        self.gauss = _GaussianPart(spec, kernel, params, self.grid) if parts in ("both", "gaussian") else None
        self.jump = _JumpPart(spec, kernel, params, self.grid) if parts in ("both", "jump") else None

    def sample(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        out = np.zeros((size, self.grid.size))
        if self.gauss is not None:
            out += self.gauss.sample(rng, size)
        if self.jump is not None:
            out += self.jump.sample(rng, size)
        return out

    def sample_tilted(self, rng: np.random.Generator, idx: np.ndarray) -> np.ndarray:
        """Rows drawn from ``exp(omega(s_j)) dP`` with ``s_j = grid[idx[row]]``."""
        idx = np.asarray(idx)
        s = self.grid[idx]
        out = np.zeros((idx.size, self.grid.size))
        if self.gauss is not None:
            out += self.gauss.sample(rng, idx.size)
            scale = self.params.mu * self.spec.sigma2
            if scale:
                out += scale * self.kernel.rho_eps(self.grid[None, :] - s[:, None],
                                                   self.params.epsilon)
        if self.jump is not None:
            out += self.jump.sample_tilted(rng, s)
        return out

    def sample_field(self, rng, seed=None, stream_id=None) -> FieldGrid:
        return FieldGrid(self.grid.copy(), self.sample(rng, 1)[0], self.params,
                         self.spec.label, self.kernel.label, seed, stream_id)


def simulate_gaussian_field(spec, kernel, params, grid, rng, seed=None, stream_id=None) -> FieldGrid:
    if spec.sigma2 <= 0:
        raise ValueError("the Gaussian sampler needs sigma2 > 0")
    return FieldSampler(spec, kernel, params, grid, parts="gaussian").sample_field(rng, seed, stream_id)


def simulate_jump_field(spec, kernel, params, grid, rng, seed=None, stream_id=None) -> FieldGrid:
    if not spec.atoms:
        raise ValueError("the jump sampler needs at least one atom")
    return FieldSampler(spec, kernel, params, grid, parts="jump").sample_field(rng, seed, stream_id)


def simulate_field(spec, kernel, params, grid, rng, seed=None, stream_id=None) -> FieldGrid:
    return FieldSampler(spec, kernel, params, grid).sample_field(rng, seed, stream_id)


# --------------------------------------------------------------------------
# Exact joint characteristic function
# --------------------------------------------------------------------------

@dataclass
class JointCF:
    qs: np.ndarray
    ts: np.ndarray
    alphas: np.ndarray  # alphas[p, k], k <= p, zero above the diagonal
    value: complex
    log_value: complex = 0j

    @property
    def alpha_sum(self) -> complex:
        return complex(self.alphas.sum())


def alpha_table(spec: LevySpec, qs: Sequence[float]) -> np.ndarray:
    """``alpha[p, k]`` from partial sums ``r_{k,p} = q_k + ... + q_p``."""
    q = np.asarray(qs, dtype=complex)
    n = q.size
    cs = np.concatenate([[0], np.cumsum(q)])

    def r(k, p):  # 0-based inclusive, empty if k > p
        return cs[p + 1] - cs[k] if k <= p else 0.0

    alphas = np.zeros((n, n), dtype=complex)
    for p in range(n):
        for k in range(p + 1):
            alphas[p, k] = (phi(spec, r(k, p)) + phi(spec, r(k + 1, p - 1))
                            - phi(spec, r(k, p - 1)) - phi(spec, r(k + 1, p)))
    return alphas


def joint_cf_analytic(spec: LevySpec, kernel: IntensityKernel, params: ChaosParams,
                      qs: Sequence[float], ts: Sequence[float], L: float = 1.0) -> JointCF:
    """``E exp(i sum_j q_j omega(t_j))`` for sorted ``ts``; ``L`` shifts ``rho`` by ``log L``."""
    ts = np.asarray(ts, dtype=float)
    qs = np.asarray(qs, dtype=float)
    if ts.shape != qs.shape:
        raise ValueError("qs and ts must have the same length")
    if ts.size > 1 and np.any(np.diff(ts) < 0):
        raise ValueError("ts must be sorted")
    alphas = alpha_table(spec, qs)
    lag = ts[:, None] - ts[None, :]
    rho = kernel.rho_L(lag, params.epsilon, L) if L != 1.0 else kernel.rho_eps(lag, params.epsilon)
    tri = np.tril(np.ones_like(rho, dtype=bool))
    expo = params.mu * complex(np.sum(alphas[tri] * rho[tri]))
    return JointCF(qs, ts, alphas, complex(np.exp(expo)), expo)


def empirical_cf(values: np.ndarray, qs: Sequence[float]) -> complex:
    """Sample mean of ``exp(i sum_j q_j omega_j)`` over rows of ``values``."""
    return complex(np.mean(np.exp(1j * (np.asarray(values) @ np.asarray(qs, dtype=float)))))


@dataclass(frozen=True)
class InvarianceProbe:
    mu: float
    delta: float
    L: float
    epsilon: float
    qs: tuple
    ts: tuple

    def __post_init__(self):
        if not 0 <= self.delta < self.mu:
            raise ValueError("the probe needs 0 <= delta < mu")
        if self.L < 1:
            raise ValueError("the probe needs L >= 1")
        if len(self.qs) != len(self.ts):
            raise ValueError("qs and ts must have the same length")


def check_intermittency_invariance(probe: InvarianceProbe, spec: LevySpec,
                                   kernel: IntensityKernel) -> float:
    """``|e^{delta phi(sum q)} CF_{mu,L} - CF_{mu-delta,L} CF_{delta,eL}|``."""
    eps = probe.epsilon
    q_total = float(np.sum(probe.qs))
    lhs = np.exp(probe.delta * phi(spec, q_total)) * joint_cf_analytic(
        spec, kernel, ChaosParams(probe.mu, eps), probe.qs, probe.ts, probe.L).value
    rhs = (joint_cf_analytic(spec, kernel, ChaosParams(probe.mu - probe.delta, eps),
                             probe.qs, probe.ts, probe.L).value
           * joint_cf_analytic(spec, kernel, ChaosParams(probe.delta, eps),
                               probe.qs, probe.ts, math.e * probe.L).value)
    return abs(lhs - rhs)


def check_scale_invariance(spec: LevySpec, kernel: IntensityKernel, mu: float, delta: float,
                           epsilon: float, qs: Sequence[float], ts: Sequence[float]) -> float:
    """Compare ``X(delta) + omega_eps(t)`` with ``omega_{eps'}(t e^{-delta/mu})``."""
    lam = math.exp(-delta / mu)
    ts = np.asarray(ts, dtype=float)
    scaled = ts * lam
    if np.any(scaled < 0) or np.any(scaled > 1):
        raise ValueError("rescaled times leave [0, 1]")
    q_total = float(np.sum(qs))
    lhs = np.exp(delta * phi(spec, q_total)) * joint_cf_analytic(
        spec, kernel, ChaosParams(mu, epsilon), qs, ts).value
    rhs = joint_cf_analytic(spec, kernel, ChaosParams(mu, epsilon * lam), qs, scaled).value
    return abs(lhs - rhs)


def moment_of_exponentials(spec: LevySpec, kernel: IntensityKernel, params: ChaosParams,
                           ts: Sequence[float], L: float = 1.0) -> float:
    """``E exp(omega(t_1) + ... + omega(t_n))`` = ``exp(mu sum_{k<p} d(p-k) rho)``."""
    ts = np.sort(np.asarray(ts, dtype=float))
    n = ts.size
    terms = []
    for k in range(n):
        for p in range(k + 1, n):
            rho = kernel.rho_eps(ts[p] - ts[k], params.epsilon) + math.log(L)
            terms.append(d_coeff(spec, p - k) * rho)
    return math.exp(params.mu * math.fsum(terms))
