"""Exact checks of the counting identities behind the expansion formulas.

Binomials are exact integers.  Spectral quantities enter either as floats
from a :class:`LevySpec` or, through :class:`RationalSpec`, as exact
rationals when the jump multipliers ``c = e^u`` and masses are rational.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple, Union

from .fieldsim import alpha_table
from .idspec import LevySpec, d_coeff, phi, spectral_moment

REAL_TOL = 1e-12
EXHAUSTIVE_MAX_N = 10


def binom(n: int, k: int) -> int:
    """Binomial coefficient that is zero outside ``0 <= k <= n``."""
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


@dataclass(frozen=True)
class TupleQuery:
    n: int
    k: int
    a: int
    b: int
    l: int

    def __post_init__(self):
        if not (1 <= self.a < self.b <= self.n):
            raise ValueError("need 1 <= a < b <= n")
        if not 2 <= self.k <= self.n:
            raise ValueError("need 2 <= k <= n")
        if not 1 <= self.l <= self.k - 1:
            raise ValueError("need 1 <= l <= k - 1")


def tuple_count(query: TupleQuery) -> int:
    """Number of increasing k-tuples containing ``a`` and ``b`` exactly ``l`` places apart."""
    span = query.b - query.a
    return binom(query.n - 1 - span, query.k - 1 - query.l) * binom(span - 1, query.l - 1)


def enumerate_tuples(query: TupleQuery):
    """All increasing k-tuples from ``1..n`` with ``a = p_i`` and ``b = p_{i+l}``."""
    out = []
    for tup in itertools.combinations(range(1, query.n + 1), query.k):
        if query.a in tup and query.b in tup and tup.index(query.b) - tup.index(query.a) == query.l:
            out.append(tup)
    return out


def vandermonde_sides(query: TupleQuery) -> Tuple[int, int]:
    """Position-resolved count summed over the slot of ``a`` versus its closed form."""
    q = query
    lhs = sum(binom(q.a - 1, i - 1) * binom(q.b - q.a - 1, q.l - 1) * binom(q.n - q.b, q.k - (i + q.l))
              for i in range(1, q.k + 1))
    return lhs, tuple_count(q)


def all_tuple_queries(n_max: int = EXHAUSTIVE_MAX_N):
    for n in range(2, n_max + 1):
        for k in range(2, n + 1):
            for a in range(1, n):
                for b in range(a + 1, n + 1):
                    for l in range(1, k):
                        yield TupleQuery(n, k, a, b, l)


def alternating_sum_zero(x: int) -> int:
    """``sum_k (-1)^k C(x, k)``; zero for every ``x >= 1``."""
    if x < 0:
        raise ValueError("x must be >= 0")
    return sum((-1) ** k * math.comb(x, k) for k in range(x + 1))


def signed_tuple_coefficient(n: int, a: int, b: int, l: int) -> int:
    """``sum_k (-1)^(n-k) C(n-1-(b-a), k-1-l) C(b-a-1, l-1)`` over ``k = 2..n``.

    Nonzero only for the outermost pair ``b - a = n - 1``.
    """
    span = b - a
    return sum((-1) ** (n - k) * binom(n - 1 - span, k - 1 - l) * binom(span - 1, l - 1)
               for k in range(2, n + 1))


# --------------------------------------------------------------------------
# Exact rational spectral data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalSpec:
    """Jump measure with rational multipliers ``c = e^u`` and rational masses."""

    sigma2: Fraction = Fraction(0)
    atoms: Tuple[Tuple[Fraction, Fraction], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sigma2", Fraction(self.sigma2))
        object.__setattr__(self, "atoms", tuple((Fraction(c), Fraction(m)) for c, m in self.atoms))
        if self.sigma2 < 0 or any(c <= 0 or c == 1 or m <= 0 for c, m in self.atoms):
            raise ValueError("need sigma2 >= 0, c > 0, c != 1 and positive masses")

    def d(self, m: int) -> Fraction:
        return self.sigma2 + sum(w * c ** (m - 1) * (c - 1) ** 2 for c, w in self.atoms)

    def spectral(self, k: int) -> Fraction:
        return sum((w * (c - 1) ** k for c, w in self.atoms), Fraction(0))

    def to_levy(self) -> LevySpec:
        return LevySpec(float(self.sigma2), tuple((math.log(c), float(m)) for c, m in self.atoms))


AnySpec = Union[LevySpec, RationalSpec]


def _d(spec: AnySpec, m: int):
    return spec.d(m) if isinstance(spec, RationalSpec) else d_coeff(spec, m)


def _spectral(spec: AnySpec, k: int):
    return spec.spectral(k) if isinstance(spec, RationalSpec) else spectral_moment(spec, k)


def _same(lhs, rhs) -> bool:
    if isinstance(lhs, Fraction) and isinstance(rhs, Fraction):
        return lhs == rhs
    return abs(float(lhs) - float(rhs)) <= REAL_TOL * max(1.0, abs(float(rhs)))


def blemma_coefficient_collapse(spec: AnySpec, n: int):
    """Alternating sum of ``d`` coefficients against its spectral collapse.

    Returns ``(lhs, rhs, equal)``; exact for a :class:`RationalSpec`.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    lhs = sum((-1) ** k * binom(n - 2, k) * _d(spec, n - k - 1) for k in range(n - 1))
    if n == 2:
        rhs = spec.sigma2 + _spectral(spec, 2)
    else:
        rhs = _spectral(spec, n)
    return lhs, rhs, _same(lhs, rhs)


def d_expansion(spec: AnySpec, m: int):
    """``d(m)`` rebuilt as ``sigma2 + sum_k C(m-1, k-2) S_k`` (binomial in ``c - 1``)."""
    return spec.sigma2 + sum(binom(m - 1, k - 2) * _spectral(spec, k) for k in range(2, m + 2))


def dsum_decomposition_check(spec: LevySpec, n: int, positions: Sequence[float], kernel) -> float:
    """Residual of regrouping ``sum_{k<p} d(p-k) g`` by spectral order."""
    t = [float(x) for x in positions]
    if len(t) != n:
        raise ValueError("need exactly n positions")
    if any(b <= a for a, b in zip(t, t[1:])):
        raise ValueError("positions must be distinct and sorted")
    g = {(i, j): float(kernel.g(t[i], t[j])) for i in range(n) for j in range(i + 1, n)}
    lhs = math.fsum(d_coeff(spec, j - i) * v for (i, j), v in g.items())
    parts = [spec.sigma2 * v for v in g.values()]
    for k in range(2, n + 1):
        s = spectral_moment(spec, k)
        parts.extend(s * binom(j - i - 1, k - 2) * v for (i, j), v in g.items() if j - i >= k - 1)
    return abs(lhs - math.fsum(parts))


def alpha_sum_check(spec: LevySpec, qs: Sequence[float]) -> float:
    """``|sum_{k<=p} alpha_{p,k} - phi(sum q)|``."""
    if len(qs) > 8:
        raise ValueError("alpha sums are checked for n <= 8")
    alphas = alpha_table(spec, qs)
    n = len(qs)
    total = sum(alphas[p, k] for p in range(n) for k in range(p + 1))
    return abs(total - phi(spec, float(sum(qs))))
