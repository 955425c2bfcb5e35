"""Deterministic simplex moment integrals and their lognormal closed form.

Positive integer moments of the total mass are integrals over the ordered
simplex whose integrand is a product of powers of ``r(t_p - t_k)``.  In gap
coordinates every diagonal singularity sits on a coordinate face, and the
sector engine in :mod:`idmc.quadrature` turns each of them into a Jacobi
weight.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .idspec import LevySpec, MomentClass, d_coeff, moment_class
from .kernel import IntensityKernel
from .quadrature import Block, SimplexIntegrand, integrate_simplex

METHODS = ("TensorGauss", "AdaptiveSubdivision", "StratifiedMC")
DETERMINISTIC_MAX_N = 6
SELBERG_MAX_N = 5
POLE_TOL = 1e-8
CSV_HEADER = "n,mu,spec,kernel,method,value,error,evaluations"


@dataclass(frozen=True)
class MomentReport:
    n: int
    mu: float
    value: float
    error_estimate: float
    method: str
    evaluations: int
    spec_label: str = ""
    kernel_label: str = ""
    elapsed: float = 0.0

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error estimate must be nonnegative")

    def csv_row(self) -> str:
        return (f"{self.n},{self.mu!r},{self.spec_label},{self.kernel_label},{self.method},"
                f"{self.value!r},{self.error_estimate!r},{self.evaluations}")


@dataclass(frozen=True)
class SelbergQuery:
    """Parameters of the generalized Selberg integral.

    The pair exponent is ``2*lam*d(p-k)``; the endpoint exponents are
    ``lam1*d(i)`` on ``r(t_i)`` and ``lam2*d(n-i+1)`` on ``r(1-t_i)``.
    """

    n: int
    spec: LevySpec
    kernel: IntensityKernel
    lam: float = 0.0
    lam1: float = 0.0
    lam2: float = 0.0
    mu: float = 0.0
    method: str = "TensorGauss"
    target_tol: float = 1e-10

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def spec_label(self) -> str:
        return self.spec.label

    @property
    def kernel_label(self) -> str:
        return self.kernel.label


def _check_method(method: str, n: int) -> None:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if method != "StratifiedMC" and n > DETERMINISTIC_MAX_N:
        raise ValueError(f"deterministic quadrature is capped at n={DETERMINISTIC_MAX_N}; "
                         "use StratifiedMC")


def _pair_blocks(spec: LevySpec, n: int, mu: float, log_weight: bool = False, offset: int = 1):
    blocks = []
    for k in range(1, n + 1):
        for p in range(k + 1, n + 1):
            d = d_coeff(spec, p - k)
            e = -mu * d
            if e <= -1:
                raise ValueError(f"pair exponent {e:.6g} <= -1 at gap {p - k}: not integrable")
            blocks.append(Block(k - 1 + offset, p - 2 + offset, e, d if log_weight else 0.0))
    return blocks


def _run(integrand: SimplexIntegrand, method: str, target_tol: float, q: Optional[int],
         mc_samples: int, seed: int):
    return integrate_simplex(integrand, method, q=q, target_tol=target_tol,
                             mc_samples=mc_samples, seed=seed)


def _check_finite(spec: LevySpec, n: int, mu: float) -> None:
    if mu < 0:
        raise ValueError("mu must be >= 0")
    if n >= 2 and mu > 0 and moment_class(spec, mu, n) is not MomentClass.FINITE:
        raise ValueError(f"moment of order {n} is not finite for {spec.label} at mu={mu}")


def moment_integral(spec: LevySpec, kernel: IntensityKernel, n: int, mu: float,
                    method: str = "TensorGauss", target_tol: float = 1e-10,
                    q: Optional[int] = None, mc_samples: int = 20000,
                    seed: int = 0) -> MomentReport:
    """``E[M[0,1]^n]`` as ``n!`` times the simplex integral of pair powers.

    The first gap ``t_1`` and the slack ``1 - t_n`` only enter through their
    sum, so they are merged into one gap with a linear weight.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_method(method, n)
    _check_finite(spec, n, mu)
    t0 = time.perf_counter()
    if n == 1 or mu == 0:
        return MomentReport(n, mu, 1.0, 0.0, method, 0, spec.label, kernel.label)
    blocks = [Block(0, 0, 1.0, kind="pow")] + _pair_blocks(spec, n, mu)
    integrand = SimplexIntegrand(n, blocks, kernel)
    v, e, ev = _run(integrand, method, target_tol, q, mc_samples, seed)
    f = math.factorial(n)
    return MomentReport(n, mu, f * v, f * e, method, ev, spec.label, kernel.label,
                        time.perf_counter() - t0)


def moment_mu_derivative(spec: LevySpec, kernel: IntensityKernel, n: int, mu: float,
                         method: str = "TensorGauss", target_tol: float = 1e-10,
                         q: Optional[int] = None, mc_samples: int = 20000,
                         seed: int = 0, exact_at_zero: bool = True) -> MomentReport:
    """Derivative in ``mu`` of the moment integral.

    At ``mu = 0`` the integrand is a plain sum of pair kernels and reduces
    exactly to one-dimensional pair integrals unless ``exact_at_zero`` is off.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_method(method, n)
    _check_finite(spec, n, mu)
    t0 = time.perf_counter()
    if n == 1:
        return MomentReport(n, mu, 0.0, 0.0, method, 0, spec.label, kernel.label)
    f = math.factorial(n)
    if mu == 0 and exact_at_zero:
        total = math.fsum((n - j) * d_coeff(spec, j) * kernel.pair_g_integral(n, j)
                          for j in range(1, n))
        return MomentReport(n, mu, f * total, 0.0, "pair-reduction", n - 1, spec.label,
                            kernel.label, time.perf_counter() - t0)
    blocks = [Block(0, 0, 1.0, kind="pow")] + _pair_blocks(spec, n, mu, log_weight=True)
    integrand = SimplexIntegrand(n, blocks, kernel)
    v, e, ev = _run(integrand, method, target_tol, q, mc_samples, seed)
    return MomentReport(n, mu, f * v, f * e, method, ev, spec.label, kernel.label,
                        time.perf_counter() - t0)


def selberg_product(n: int, alpha: float, beta: float, gamma: float) -> float:
    """Classical Selberg integral over the cube ``[0, 1]^n``.

    ``int prod t_i^(alpha-1) (1-t_i)^(beta-1) prod_{i<j} |t_i - t_j|^(2 gamma)``,
    evaluated as a product of gamma ratios in log space.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    log_total = 0.0
    for j in range(n):
        num = (alpha + j * gamma, beta + j * gamma, 1 + (j + 1) * gamma)
        den = (alpha + beta + (n + j - 1) * gamma, 1 + gamma)
        for a in num + den:
            if a <= 0 and abs(a - round(a)) < POLE_TOL:
                raise ValueError(f"gamma pole at argument {a:.6g}")
        for a in num:
            if a <= 0:
                raise ValueError(f"divergent Selberg integral (gamma argument {a:.6g} <= 0)")
        log_total += sum(gammaln(a) for a in num) - sum(gammaln(a) for a in den)
    return math.exp(log_total)


def lognormal_closed_form(n: int, mu: float) -> MomentReport:
    """Lognormal ``E[M[0,1]^n]`` from the Selberg product with ``2 gamma = -mu``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if mu < 0:
        raise ValueError("mu must be >= 0")
    if n == 1 or mu == 0:
        return MomentReport(n, mu, 1.0, 0.0, "closed-form", 0, "lognormal", "bacry-muzy")
    if n * mu >= 2 - POLE_TOL:
        raise ValueError(f"moment of order {n} is infinite at mu={mu} (needs n < 2/mu)")
    value = selberg_product(n, 1.0, 1.0, -mu / 2)
    return MomentReport(n, mu, value, 0.0, "closed-form", 0, "lognormal", "bacry-muzy")


def generalized_selberg(query: SelbergQuery, q: Optional[int] = None,
                        mc_samples: int = 20000, seed: int = 0) -> MomentReport:
    """Simplex integral with endpoint weights ``r(t_i)`` and ``r(1 - t_i)``.

    Uses ``n + 1`` gaps: ``t_i`` is the block of gaps ``0..i-1`` and
    ``1 - t_i`` the block ``i..n``.
    """
    n, spec = query.n, query.spec
    if n > SELBERG_MAX_N and query.method != "StratifiedMC":
        raise ValueError(f"generalized Selberg quadrature is capped at n={SELBERG_MAX_N}")
    t0 = time.perf_counter()
    blocks = []
    for i in range(1, n + 1):
        e1 = query.lam1 * d_coeff(spec, i)
        e2 = query.lam2 * d_coeff(spec, n - i + 1)
        for e in (e1, e2):
            if e <= -1:
                raise ValueError(f"endpoint exponent {e:.6g} <= -1: not integrable")
        if e1 != 0:
            blocks.append(Block(0, i - 1, e1))
        if e2 != 0:
            blocks.append(Block(i, n, e2))
    for k in range(1, n + 1):
        for p in range(k + 1, n + 1):
            e = 2 * query.lam * d_coeff(spec, p - k)
            if e <= -1:
                raise ValueError(f"pair exponent {e:.6g} <= -1: not integrable")
            if e != 0:
                blocks.append(Block(k, p - 1, e))
    if not blocks:
        return MomentReport(n, query.mu, 1.0 / math.factorial(n), 0.0, query.method, 0,
                            spec.label, query.kernel_label)
    integrand = SimplexIntegrand(n + 1, blocks, query.kernel)
    v, e, ev = _run(integrand, query.method, query.target_tol, q, mc_samples, seed)
    return MomentReport(n, query.mu, v, e, query.method, ev, spec.label, query.kernel_label,
                        time.perf_counter() - t0)


def cube_moment_mc(spec: LevySpec, kernel: IntensityKernel, n: int, mu: float,
                   n_samples: int, seed: int = 0):
    """Plain MC of the moment integrand over the unit cube (exchangeability check).

    Returns ``(mean, stderr)``; the cube average already equals ``n!`` times
    the simplex integral.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    t = np.sort(rng.random((n_samples, n)), axis=1)
    logw = np.zeros(n_samples)
    for k in range(n):
        for p in range(k + 1, n):
            logw += mu * d_coeff(spec, p - k) * kernel.g_of_gap(t[:, p] - t[:, k])
    w = np.exp(logw)
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(n_samples))
