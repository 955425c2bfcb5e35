"""First-order intermittency expansions and the identities behind them.

The derivative in ``mu`` of ``E[F(M_mu)]`` at ``mu = 0`` is a series over
simplex integrals of the limit kernel ``g`` weighted by derivatives of ``F``
and spectral moments ``sum m (e^u - 1)^k``.  This module evaluates those
series, their two-interval analog, the covariance slope, the exact
expectation behind the combinatorial lemma, the moment-derivative integral
identity, and the terms of the general n-point differentiation rule.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from .chaos import _sampler, interval_weights
from .idspec import ChaosParams, LevySpec, TestFunction, d_coeff, spectral_moment
from .kernel import IntensityKernel
from .mc import MCEstimate, estimate, run_chunks
from .quadrature import graded_rule, ordered_simplex_rule, pair_simplex_integral

DEFAULT_K_MAX = 12
TAIL_TERMS = 40
EXPANSION_CSV_HEADER = "term_kind,k,l,coefficient,spectral_factor,geometric_factor,value"


@dataclass(frozen=True)
class ExpansionTerm:
    """One summand: derivative coefficient x spectral factor x simplex integral."""

    kind: str
    k: int
    l: int
    coefficient: float
    spectral_factor: float
    geometric_factor: float

    @property
    def value(self) -> float:
        return self.coefficient * self.spectral_factor * self.geometric_factor

    def csv_row(self) -> str:
        return (f"{self.kind},{self.k},{self.l},{self.coefficient!r},{self.spectral_factor!r},"
                f"{self.geometric_factor!r},{self.value!r}")


@dataclass(frozen=True)
class Expansion:
    total: float
    terms: Tuple[ExpansionTerm, ...]
    tail_bound: float = 0.0

    def __iter__(self):  # allows ``total, terms = first_order_term(...)``
        return iter((self.total, list(self.terms)))


def _simplex_g(kernel: IntensityKernel, k: int, length: float) -> float:
    return 0.0 if length == 0 else kernel.simplex_g_integral(k, length)


def _tail_bound(spec: LevySpec, kernel: IntensityKernel, F: TestFunction, k_max: int,
                length: float) -> float:
    """Bound on the omitted terms ``k > k_max`` using ``|I_k| <= I_2 / (k-2)!``."""
    i2 = abs(_simplex_g(kernel, 2, length))
    bound = 0.0
    for k in range(k_max + 1, k_max + 1 + TAIL_TERMS):
        if F.derivative is None or k > F.derivative_cap:
            return math.inf
        s = sum(m * abs(math.expm1(u)) ** k for u, m in spec.atoms)
        bound += abs(F.deriv(k, length)) * s * i2 * length ** (k - 2) / math.factorial(k - 2)
    return bound


def first_order_term(spec: LevySpec, kernel: IntensityKernel, F: TestFunction,
                     k_max: int = DEFAULT_K_MAX, length: float = 1.0) -> Expansion:
    """``d/dmu E[F(M_mu[0, length])]`` at ``mu = 0``, truncated at ``k_max``.

    Returns an :class:`Expansion` that also unpacks as ``(total, terms)``;
    ``tail_bound`` bounds the omitted part of the series.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    if not 0 < length <= 1:
        raise ValueError("interval length must lie in (0, 1]")
    terms = []
    if spec.sigma2 != 0:
        terms.append(ExpansionTerm("gaussian", 2, 0, F.deriv(2, length), spec.sigma2,
                                   _simplex_g(kernel, 2, length)))
    if spec.atoms:
        for k in range(2, k_max + 1):
            terms.append(ExpansionTerm("jump", k, 0, F.deriv(k, length),
                                       spectral_moment(spec, k), _simplex_g(kernel, k, length)))
    total = math.fsum(t.value for t in terms)
    tail = _tail_bound(spec, kernel, F, k_max, length) if spec.atoms else 0.0
    return Expansion(total, tuple(terms), tail)


# --------------------------------------------------------------------------
# Two intervals
# --------------------------------------------------------------------------

def _check_intervals(I1, I2):
    a1, b1 = I1
    a2, b2 = I2
    if not (0 <= a1 < b1 <= 1 and 0 <= a2 <= b2 <= 1):
        raise ValueError("intervals must lie in [0, 1] with I1 of positive length")
    if b1 > a2:
        raise ValueError("intervals overlap or are out of order (need sup I1 <= inf I2)")
    return a1, b1, a2, b2


def cross_g_integral(kernel: IntensityKernel, I1, I2, k: int = 1, l: int = 1,
                     panels: int = 24, npts: int = 12) -> float:
    """``int g(s_1, s_{k+l})`` with ``k`` ordered points in I1 and ``l`` in I2.

    Only the leftmost point of I1 and the rightmost of I2 enter ``g``; the
    others integrate out to ``x^(k-1)/(k-1)!`` and ``y^(l-1)/(l-1)!`` with
    ``x = sup I1 - s_1`` and ``y = s_{k+l} - inf I2``.  A tensor rule graded
    towards ``x = y = 0`` absorbs the corner singularity of adjacent intervals.
    """
    a1, b1, a2, b2 = _check_intervals(I1, I2)
    if k < 1 or l < 1:
        raise ValueError("cross integrals need k, l >= 1")
    if b2 == a2:
        return 0.0
    gap = a2 - b1
    x, wx = graded_rule(b1 - a1, panels, npts)
    y, wy = graded_rule(b2 - a2, panels, npts)
    X, Y = np.meshgrid(x, y, indexing="ij")
    W = np.outer(wx * x ** (k - 1), wy * y ** (l - 1))
    vals = kernel.g_of_gap(gap + X + Y)
    return math.fsum((W * vals).ravel()) / (math.factorial(k - 1) * math.factorial(l - 1))


def first_order_two_intervals(spec: LevySpec, kernel: IntensityKernel, F1: TestFunction,
                              F2: TestFunction, I1, I2,
                              k_max: int = DEFAULT_K_MAX) -> Expansion:
    """``d/dmu E[F1(M(I1)) F2(M(I2))]`` at ``mu = 0``; terms with ``k + l <= k_max``.

    ``F1`` is differentiated at ``|I1|`` and ``F2`` at ``|I2|``; a zero-length
    ``I2`` leaves ``F2(0)`` times the single-interval expansion on ``I1``.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    a1, b1, a2, b2 = _check_intervals(I1, I2)
    A, B = b1 - a1, b2 - a2
    d1 = [F1.deriv(k, A) for k in range(k_max + 1)]
    d2 = [F2.deriv(l, B) for l in range(k_max + 1)]
    terms = []
    if spec.sigma2 != 0:
        s2 = spec.sigma2
        terms.append(ExpansionTerm("gaussian-I1", 2, 0, d1[2] * d2[0], s2, _simplex_g(kernel, 2, A)))
        terms.append(ExpansionTerm("gaussian-I2", 0, 2, d1[0] * d2[2], s2, _simplex_g(kernel, 2, B)))
        terms.append(ExpansionTerm("gaussian-cross", 1, 1, d1[1] * d2[1], s2,
                                   cross_g_integral(kernel, I1, I2)))
    if spec.atoms:
        for total_order in range(2, k_max + 1):
            spectral = spectral_moment(spec, total_order)
            for k in range(total_order + 1):
                l = total_order - k
                coef = d1[k] * d2[l]
                if l == 0:
                    geo = _simplex_g(kernel, k, A)
                elif k == 0:
                    geo = _simplex_g(kernel, l, B)
                else:
                    geo = cross_g_integral(kernel, I1, I2, k, l)
                terms.append(ExpansionTerm("jump", k, l, coef, spectral, geo))
    total = math.fsum(t.value for t in terms)
    return Expansion(total, tuple(terms))


def covariance_slope(spec: LevySpec, mu: float, t: float, kernel: IntensityKernel) -> float:
    """Small-``tau`` limit of ``Cov(log M(t, t+tau), log M(0, tau))``."""
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    return mu * kernel.g(0.0, t) * (spec.sigma2 + spectral_moment(spec, kind="u_square"))


# --------------------------------------------------------------------------
# Combinatorial lemma: exact expectation of prod (e^{f + omega} - 1)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BLemmaProbe:
    s_list: Tuple[float, ...]
    delta_list: Tuple[float, ...] = (1e-6, 5e-7)
    L: float = 1.0
    epsilon: float = 2.0 ** -10
    frak_f: Optional[Callable[[float, float], float]] = None

    def __post_init__(self):
        s = tuple(float(x) for x in self.s_list)
        object.__setattr__(self, "s_list", s)
        object.__setattr__(self, "delta_list", tuple(float(d) for d in self.delta_list))
        if len(s) < 2:
            raise ValueError("the lemma needs at least two points")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("points must be distinct and sorted")
        if not all(0 < x < 1 for x in s):
            raise ValueError("points must lie in (0, 1)")
        d = self.delta_list
        if len(d) < 2 or any(y >= x for x, y in zip(d, d[1:])) or d[-1] <= 0:
            raise ValueError("deltas must be positive and strictly decreasing")
        if self.L < 1:
            raise ValueError("L must be >= 1")


def blemma_expectation(spec: LevySpec, kernel: IntensityKernel, probe: BLemmaProbe,
                       delta: float) -> float:
    """Exact ``E[prod_j (e^{f(delta, s_j) + omega(s_j)} - 1)]`` at intermittency ``delta``.

    Multiplying out gives a signed sum over subsets; each subset's
    exponential moment is ``exp(delta sum d(rank gap) rho_L(s_b - s_a))``.
    """
    s = probe.s_list
    n = len(s)
    f = [0.0 if probe.frak_f is None else float(probe.frak_f(delta, x)) for x in s]
    rho = {}
    for a in range(n):
        for b in range(a + 1, n):
            rho[a, b] = kernel.rho_L(s[b] - s[a], probe.epsilon, probe.L)
    parts = []
    for size in range(n + 1):
        sign = (-1) ** (n - size)
        for S in itertools.combinations(range(n), size):
            expo = 0.0
            for i, a in enumerate(S):
                for j in range(i + 1, size):
                    expo += d_coeff(spec, j - i) * rho[a, S[j]]
            shift = math.fsum(f[a] for a in S)
            # e^{shift + delta expo} - 1 keeps precision; the -1's cancel over subsets
            parts.append(sign * math.expm1(shift + delta * expo))
    return math.fsum(parts)


def blemma_predicted(spec: LevySpec, kernel: IntensityKernel, probe: BLemmaProbe) -> float:
    s = probe.s_list
    n = len(s)
    rho = kernel.rho_L(s[-1] - s[0], probe.epsilon, probe.L)
    if n == 2:
        return rho * (spec.sigma2 + spectral_moment(spec, 2))
    return rho * spectral_moment(spec, n)


def blemma_slope_check(spec: LevySpec, kernel: IntensityKernel, probe: BLemmaProbe):
    """``(empirical_slope, predicted, residual)`` for the lemma's delta-coefficient.

    The slope uses the two smallest deltas with Richardson extrapolation,
    so the residual is of second order in delta.
    """
    prod0 = {}

    def slope(delta):
        if probe.frak_f is None:
            base = 0.0
        else:
            base = math.prod(math.expm1(probe.frak_f(delta, x)) for x in probe.s_list)
        prod0[delta] = base
        return (blemma_expectation(spec, kernel, probe, delta) - base) / delta

    d1, d2 = probe.delta_list[-2], probe.delta_list[-1]
    s1, s2 = slope(d1), slope(d2)
    empirical = (d1 * s2 - d2 * s1) / (d1 - d2)
    predicted = blemma_predicted(spec, kernel, probe)
    return empirical, predicted, abs(empirical - predicted)


# --------------------------------------------------------------------------
# Moment-derivative integral identity
# --------------------------------------------------------------------------

def _pair_integral(n, i, j, weight, g, q):
    if isinstance(g, IntensityKernel):
        return pair_simplex_integral(n, i, j, weight, kernel=g, q=q)
    return pair_simplex_integral(n, i, j, weight, g=g, q=q)


def integral_identity_check(n: int, k: int, omega: Callable,
                            g: Union[IntensityKernel, Callable], q: int = 14):
    """Both sides of the pair-reduction identity, returned as ``(lhs, rhs, residual)``.

    ``lhs = (int e^omega)^(n-k)/(n-k)! * int_{simplex_k} e^{sum omega} g(s_1, s_k)``
    and ``rhs = int_{simplex_n} e^{sum omega} sum_{j-i >= k-1} C(j-i-1, k-2) g(s_i, s_j)``.
    ``g`` is a kernel (log singularity handled exactly) or a smooth gap function.
    """
    if not 2 <= k <= n <= 5:
        raise ValueError("need 2 <= k <= n <= 5")

    def weight(s):
        return np.exp(omega(s).sum(axis=1))

    x, wx = np.polynomial.legendre.leggauss(64)
    mass = 0.5 * float(np.dot(wx, np.exp(omega(0.5 * (x + 1.0)))))
    lhs = mass ** (n - k) / math.factorial(n - k) * _pair_integral(k, 1, k, weight, g, q)
    parts = []
    for i in range(1, n + 1):
        for j in range(i + k - 1, n + 1):
            parts.append(math.comb(j - i - 1, k - 2) * _pair_integral(n, i, j, weight, g, q))
    rhs = math.fsum(parts)
    return lhs, rhs, abs(lhs - rhs)


# --------------------------------------------------------------------------
# n-point differentiation rule
# --------------------------------------------------------------------------

def _validate_rule(n: int, k: int, l: int) -> None:
    if n < 0 or l < 0 or not 0 <= k <= n or k + l < 2:
        raise ValueError(f"invalid rule indices (n={n}, k={k}, l={l})")


def rule_term_coefficient(n: int, k: int, l: int, ts: Sequence[float],
                          kernel: IntensityKernel) -> float:
    """Kernel factor of the ``(k, l)`` jump term of the n-point rule.

    ``ts`` holds the ``n`` existing points followed by the ``l`` new ones,
    each group sorted.  The sum runs over increasing k-tuples of existing
    points and pairs the leftmost of (tuple, new points) with the rightmost.
    """
    _validate_rule(n, k, l)
    ts = [float(x) for x in ts]
    if len(ts) != n + l:
        raise ValueError(f"expected {n + l} points, got {len(ts)}")
    old, new = ts[:n], ts[n:]
    if any(b <= a for a, b in zip(old, old[1:])) or any(b <= a for a, b in zip(new, new[1:])):
        raise ValueError("points within each group must be distinct and sorted")
    if k == 0:
        return float(kernel.g(new[0], new[-1]))
    parts = []
    for tup in itertools.combinations(range(n), k):
        lo = old[tup[0]] if l == 0 else min(old[tup[0]], new[0])
        hi = old[tup[-1]] if l == 0 else max(old[tup[-1]], new[-1])
        parts.append(float(kernel.g(lo, hi)))
    return math.fsum(parts)


@dataclass(frozen=True)
class RuleTerm:
    """One term of the n-point rule at existing points ``t_1..t_n``.

    ``family`` is ``gaussian-pairs`` (no new points), ``gaussian-one`` (one
    new point), ``gaussian-two`` (two new points) or ``jump``; ``order`` is
    the derivative of ``F`` carried by the v-functional and ``new_points``
    the number of integrated points.
    """

    family: str
    k: int
    l: int
    order: int
    new_points: int
    spectral_factor: float

    def kernel_factor(self, n: int, ts: Sequence[float], kernel: IntensityKernel) -> float:
        ts = list(ts)
        old, new = ts[:n], ts[n:]
        if self.family == "gaussian-pairs":
            return math.fsum(float(kernel.g(old[i], old[j]))
                             for i in range(n) for j in range(i + 1, n))
        if self.family == "gaussian-one":
            return math.fsum(float(kernel.g(t, new[0])) for t in old)
        if self.family == "gaussian-two":
            return float(kernel.g(new[0], new[1]))
        return rule_term_coefficient(n, self.k, self.l, ts, kernel)


def rule_terms(spec: LevySpec, n: int, l_max: int = DEFAULT_K_MAX) -> List[RuleTerm]:
    """Terms of the rule for ``d/dmu v(mu, F, t_1..t_n)`` with ``l <= l_max``.

    Zero spectral factors are dropped.  For ``n = 0`` only the Gaussian
    two-point term and the ``k = 0`` jump terms remain, which is the
    single-function rule term by term.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    out = []
    if spec.sigma2 != 0:
        if n >= 2:
            out.append(RuleTerm("gaussian-pairs", 0, 0, 0, 0, spec.sigma2))
        if n >= 1:
            out.append(RuleTerm("gaussian-one", 0, 1, 1, 1, spec.sigma2))
        out.append(RuleTerm("gaussian-two", 0, 2, 2, 2, spec.sigma2))
    if spec.atoms:
        for k in range(n + 1):
            for l in range(max(0, 2 - k), l_max + 1):
                s = spectral_moment(spec, k + l)
                if s != 0:
                    out.append(RuleTerm("jump", k, l, l, l, s))
    return out


def rule_rhs_at_zero(spec: LevySpec, kernel: IntensityKernel, n: int, F: TestFunction,
                     ts: Sequence[float], l_max: int = DEFAULT_K_MAX, q: int = 24) -> float:
    """Right side of the n-point rule at ``mu = 0``, where ``v = F^(order)(1)``.

    New points are integrated with adaptive quadrature for one or two points
    (breakpoints at the existing points) and a tensor simplex rule beyond.
    """
    ts = [float(x) for x in ts]
    if len(ts) != n:
        raise ValueError("need exactly n existing points")
    parts = []
    for term in rule_terms(spec, n, l_max):
        coef = F.deriv(term.order, 1.0)
        if coef == 0:
            continue
        geo = _integrate_new_points(term, n, ts, kernel, q)
        parts.append(coef * term.spectral_factor * geo)
    return math.fsum(parts)


def _integrate_new_points(term: RuleTerm, n: int, ts, kernel, q) -> float:
    m = term.new_points
    brk = sorted(set(ts))
    if m == 0:
        return term.kernel_factor(n, ts, kernel)
    if m == 1:
        val, _ = integrate.quad(lambda x: term.kernel_factor(n, ts + [x], kernel), 0, 1,
                                points=brk or None, limit=200, epsabs=1e-11)
        return val
    if m == 2:
        def inner(x):
            pts = sorted(set(brk + [x]))
            v, _ = integrate.quad(lambda y: term.kernel_factor(n, ts + [x, y], kernel), x, 1,
                                  points=[p for p in pts if x < p < 1] or None,
                                  limit=200, epsabs=1e-11)
            return v
        val, _ = integrate.quad(inner, 0, 1, points=brk or None, limit=200, epsabs=1e-10)
        return val
    y, w = ordered_simplex_rule(m, q)
    vals = [term.kernel_factor(n, ts + list(p), kernel) for p in y]
    return float(np.dot(w, vals))


# --------------------------------------------------------------------------
# Monte Carlo right side of the single-function rule at mu > 0
# --------------------------------------------------------------------------

def rhs_first_derivative_mc(spec: LevySpec, kernel: IntensityKernel, params: ChaosParams,
                            F: TestFunction, k_max: int = DEFAULT_K_MAX,
                            mc_budget: int = 20000, seed: int = 0,
                            nodes_per_sample: int = 8, grid_points: int = 4097,
                            workers: int = 1) -> MCEstimate:
    """Monte Carlo right side of the differentiation rule at intermittency ``mu``.

    Each field sample is paired with ``nodes_per_sample`` uniform ordered
    k-tuples per term, snapped to the field grid; the kernel uses the
    regularized profile ``rho_eps`` so that both sides refer to the same
    cutoff.  At ``mu = 0`` the v-functionals are constant and the first-order
    series is returned exactly (with zero stderr).
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    if params.mu == 0:
        total = first_order_term(spec, kernel, F, k_max).total
        return MCEstimate(total, 0.0, max(2, mc_budget), seed, 0.0, {"exact": True})
    if F.derivative is None or (F.derivative_cap < k_max and not F.is_polynomial):
        raise ValueError("the MC rule needs exact derivatives up to k_max")
    t0 = time.perf_counter()
    orders = []
    if spec.sigma2 != 0:
        orders.append((2, spec.sigma2))
    if spec.atoms:
        for k in range(2, k_max + 1):
            orders.append((k, spectral_moment(spec, k)))
    sampler = _sampler(spec, kernel, params, grid_points)
    grid = sampler.grid
    w = interval_weights(grid, 0.0, 1.0)
    eps = params.epsilon

    def fn(rng, size):
        field = sampler.sample(rng, size)
        ew = np.exp(field)
        mass = ew @ w
        out = np.zeros(size)
        for k, spectral in orders:
            dk = np.array([F.deriv(k, m) for m in mass])
            if not np.any(dk) or spectral == 0:
                continue
            acc = np.zeros(size)
            for _ in range(nodes_per_sample):
                s = np.sort(rng.random((size, k)), axis=1)
                idx = np.rint(s * (grid.size - 1)).astype(int)
                prod = np.prod(np.take_along_axis(ew, idx, axis=1), axis=1)
                gap = grid[idx[:, -1]] - grid[idx[:, 0]]
                acc += prod * kernel.rho_eps(gap, eps)
            out += spectral * dk * acc / (nodes_per_sample * math.factorial(k))
        return out

    vals = run_chunks(fn, mc_budget, seed, 250, workers)
    return estimate(vals, seed, t0, nodes_per_sample=nodes_per_sample)
