"""Time-scale intensity kernels.

The regularized covariance profile ``rho_eps(u)`` comes from a Poisson-type
intensity ``f(l)/l^2 dt dl`` on the half plane of (time, scale) pairs,
integrated over the intersection of two cones.  Two families are supported:

* the canonical kernel with ``f == 1``, for which ``rho_eps(u) = -log|u|``
  above the cutoff ``epsilon``;
* kernels built from an even profile ``r(t)`` with ``rho_0(u) = -log r(u)``
  and ``f(l) = -l^2 (log r)''(l)`` on ``(0, 1)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate

FD_STEP = 1e-5
VALIDATION_POINTS = 256


class KernelVariant(enum.Enum):
    CANONICAL = "bacry-muzy"
    GENERAL_R = "general-r"


@lru_cache(maxsize=None)
def _legendre(npts: int):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")


@dataclass(frozen=True, eq=False)
class IntensityKernel:
    """Intensity kernel of the cone construction.

    Parameters
    ----------
    variant : KernelVariant
    name : str
        Catalog name; used for serialization.
    log_r, dlog_r, d2log_r : callables, optional
        ``log r`` and its first two derivatives on ``(0, 1]`` (GeneralR only).
        Missing derivatives fall back to central differences.
    """

    variant: KernelVariant = KernelVariant.CANONICAL
    name: str = "bacry-muzy"
    log_r: Optional[Callable] = None
    dlog_r: Optional[Callable] = None
    d2log_r: Optional[Callable] = None

    def __post_init__(self):
        if self.variant is KernelVariant.GENERAL_R:
            if self.log_r is None:
                raise ValueError("general-r kernels need log_r")
            self.validate()

    @classmethod
    def canonical(cls) -> "IntensityKernel":
        return cls()

    @classmethod
    def general_r(cls, name, log_r, dlog_r=None, d2log_r=None) -> "IntensityKernel":
        return cls(KernelVariant.GENERAL_R, name, log_r, dlog_r, d2log_r)

    @property
    def is_canonical(self) -> bool:
        return self.variant is KernelVariant.CANONICAL

    @property
    def label(self) -> str:
        return self.name

    # -- log r and its derivatives ------------------------------------------
    def _log_r(self, t):
        if self.is_canonical:
            return np.log(t)
        return self.log_r(t)

    def _dlog_r(self, t):
        if self.is_canonical:
            return 1.0 / np.asarray(t, dtype=float)
        if self.dlog_r is not None:
            return self.dlog_r(t)
        h = FD_STEP * np.maximum(1.0, np.abs(t))
        return (self.log_r(t + h) - self.log_r(t - h)) / (2 * h)

    def _d2log_r(self, t):
        if self.is_canonical:
            return -1.0 / np.asarray(t, dtype=float) ** 2
        if self.d2log_r is not None:
            return self.d2log_r(t)
        h = FD_STEP * np.maximum(1.0, np.abs(t))
        if self.dlog_r is not None:
            return (self.dlog_r(t + h) - self.dlog_r(t - h)) / (2 * h)
        return (self.log_r(t + h) - 2 * self.log_r(t) + self.log_r(t - h)) / h ** 2

    def smooth_part(self, x):
        """``log(r(x)/x)``, the regular part of ``log r`` (zero if canonical)."""
        x = np.asarray(x, dtype=float)
        if self.is_canonical:
            return np.zeros_like(x)
        return self.log_r(x) - np.log(x)

    def validate(self) -> None:
        """Positivity of ``f``, the small-scale log-derivative limit, ``r(1) = 1``."""
        grid = np.logspace(-6, 0, VALIDATION_POINTS, endpoint=False)
        if not np.all(np.isfinite(self._log_r(grid))):
            raise ValueError(f"kernel {self.name!r}: r must be positive on (0, 1)")
        f = self.f_of_l(grid)
        if not np.all(f > 0):
            bad = grid[~(f > 0)][0]
            raise ValueError(f"kernel {self.name!r}: f(l) is not positive at l={bad:.4g}")
        if not float(self._dlog_r(1.0)) > 0:
            raise ValueError(f"kernel {self.name!r}: f(l) is not positive for l >= 1")
        shrinking = np.array([1e-4, 1e-5, 1e-6])
        lim = shrinking * self._dlog_r(shrinking)
        if abs(lim[-1] - 1.0) > 1e-3:
            raise ValueError(f"kernel {self.name!r}: t (log r)'(t) -> {lim[-1]:.6g}, expected 1")
        if abs(float(self._log_r(1.0))) > 1e-12:
            raise ValueError(f"kernel {self.name!r}: r(1) must equal 1 so that the "
                             "kernel vanishes at the edge of its support")

    # -- kernel values --------------------------------------------------------
    def rho_eps(self, u, epsilon: float):
        """Regularized profile, zero for ``|u| > 1``; scalar in, scalar out."""
        _check_epsilon(epsilon)
        scalar = np.ndim(u) == 0
        a = np.abs(np.asarray(u, dtype=float))
        out = np.zeros_like(a)
        far = (a >= epsilon) & (a <= 1.0)
        near = a < epsilon
        if np.any(far):
            out[far] = -self._log_r(a[far])
        if np.any(near):
            slope = epsilon * float(self._dlog_r(epsilon))
            out[near] = -float(self._log_r(epsilon)) + (1.0 - a[near] / epsilon) * slope
        return float(out) if scalar else out

    def rho_L(self, u, epsilon: float, L: float):
        """``log L + rho_eps(u)``, the profile of the interval-rescaled field."""
        if L < 1:
            raise ValueError("L must be >= 1")
        return math.log(L) + self.rho_eps(u, epsilon)

    def g(self, s1, s2):
        """Limit kernel ``g(s1, s2) = -log r(|s1 - s2|)``, zero beyond distance 1."""
        d = np.abs(np.asarray(s1, dtype=float) - np.asarray(s2, dtype=float))
        if np.any(d == 0):
            raise ValueError("g is singular at coincident points")
        scalar = np.ndim(d) == 0
        d = np.atleast_1d(d)
        out = np.zeros_like(d)
        inside = d <= 1.0
        out[inside] = -self._log_r(d[inside])
        return float(out[0]) if scalar else out

    def g_of_gap(self, d):
        """``g`` as a function of the gap ``d > 0`` (vectorized, no checks)."""
        d = np.asarray(d, dtype=float)
        return np.where(d <= 1.0, -self._log_r(np.minimum(d, 1.0)), 0.0)

    def f_of_l(self, l):
        scalar = np.ndim(l) == 0
        l_arr = np.atleast_1d(np.asarray(l, dtype=float))
        if np.any(l_arr <= 0):
            raise ValueError("f(l) requires l > 0")
        out = np.empty_like(l_arr)
        low = l_arr < 1.0
        if self.is_canonical:
            out[:] = 1.0
        else:
            out[low] = -l_arr[low] ** 2 * self._d2log_r(l_arr[low])
            out[~low] = float(self._dlog_r(1.0))
        return float(out[0]) if scalar else out

    @property
    def f_top(self) -> float:
        """Constant value of ``f`` on ``l >= 1``."""
        return 1.0 if self.is_canonical else float(self._dlog_r(1.0))

    # -- cone geometry --------------------------------------------------------
    def cone_mass(self, epsilon: float) -> float:
        """Intensity mass of one cone: scales in ``[eps, 1]`` plus the flat top."""
        _check_epsilon(epsilon)
        if self.is_canonical:
            return 1.0 - math.log(epsilon)
        return _general_cone_mass(self, float(epsilon))

    def simplex_g_integral(self, k: int, length: float = 1.0) -> float:
        """``int g(s_1, s_k)`` over the ordered simplex in ``[0, length]^k``.

        Reduced to one dimension through the gap ``x = s_k - s_1``; the
        logarithmic endpoint singularity is integrated in closed form and
        only the smooth remainder ``log(r(x)/x)`` goes through quadrature.
        """
        if k < 2:
            raise ValueError("simplex g-integral needs k >= 2")
        if not 0 < length <= 1:
            raise ValueError("interval length must lie in (0, 1]")
        fact = math.factorial(k - 2)
        log_part = 1.0 / (k - 1) ** 2 - 1.0 / k ** 2
        base = 1.0 / ((k - 1) * k)
        total = log_part - math.log(length) * base
        if not self.is_canonical:
            y, w = _legendre(64)
            smooth = self.smooth_part(length * y)
            total -= float(np.dot(w, (1 - y) * y ** (k - 2) * smooth))
        return length ** k * total / fact


    def pair_g_integral(self, n: int, j: int) -> float:
        """``int g(s_k, s_{k+j})`` over the ordered simplex in ``[0, 1]^n``.

        The value does not depend on ``k``: with ``x = s_{k+j} - s_k`` the
        remaining points contribute ``x^(j-1)/(j-1)! (1-x)^(n-j)/(n-j)!``.
        The ``-log x`` part is a harmonic sum; the smooth remainder is
        integrated numerically.
        """
        if not 1 <= j < n:
            raise ValueError("pair g-integral needs 1 <= j < n")
        total = math.fsum(1.0 / i for i in range(j, n + 1)) / math.factorial(n)
        if not self.is_canonical:
            y, w = _legendre(64)
            dens = y ** (j - 1) * (1 - y) ** (n - j) / (math.factorial(j - 1) * math.factorial(n - j))
            total -= float(np.dot(w, dens * self.smooth_part(y)))
        return total

@lru_cache(maxsize=256)
def _general_cone_mass(kernel: IntensityKernel, epsilon: float) -> float:
    # in log-scale: int_eps^1 f(l)/l dl = int f(e^x) dx
    low, _ = integrate.quad(lambda x: kernel.f_of_l(math.exp(x)), math.log(epsilon), 0.0,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return low + kernel.f_top


def cone_contains(point, apex: float, epsilon: float) -> bool:
    """Membership of the time-scale point ``(t, l)`` in the cone above ``apex``."""
    t, l = point
    if l < epsilon:
        raise ValueError("points below the cutoff scale are never in a cone")
    if l <= 1.0:
        return abs(t - apex) <= l / 2
    return abs(t - apex) <= 0.5


# --------------------------------------------------------------------------
# Catalog
# --------------------------------------------------------------------------

def _identity_r() -> IntensityKernel:
    return IntensityKernel.general_r(
        "general-r:identity",
        lambda t: np.log(np.abs(t)),
        lambda t: 1.0 / np.asarray(t, dtype=float),
        lambda t: -1.0 / np.asarray(t, dtype=float) ** 2,
    )


def _tilted_r() -> IntensityKernel:
    # r(t) = |t| exp((1 - t^2)/4): f(l) = 1 + l^2/2 below 1, 1/2 above
    return IntensityKernel.general_r(
        "general-r:tilted",
        lambda t: np.log(np.abs(t)) + (1.0 - np.asarray(t, dtype=float) ** 2) / 4.0,
        lambda t: 1.0 / np.asarray(t, dtype=float) - np.asarray(t, dtype=float) / 2.0,
        lambda t: -1.0 / np.asarray(t, dtype=float) ** 2 - 0.5,
    )


KERNEL_CATALOG = {
    "bacry-muzy": IntensityKernel.canonical,
    "general-r:identity": _identity_r,
    "general-r:tilted": _tilted_r,
}


def kernel_from_name(name: str) -> IntensityKernel:
    """Look up ``bacry-muzy`` or a registered ``general-r:<name>`` kernel."""
    if name == "general-r":
        name = "general-r:identity"
    try:
        return KERNEL_CATALOG[name]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; known: {sorted(KERNEL_CATALOG)}") from None
