"""Infinitely divisible laws with purely atomic spectral measures.

A :class:`LevySpec` stores the Gaussian coefficient ``sigma2`` and a finite
list of atoms ``(u_j, m_j)`` of the spectral measure.  Everything that is a
scalar functional of the law lives here: the Levy-Khinchine exponent, the
multiscaling spectrum, the pairwise coefficients ``d(m)``, the moment and
non-degeneracy predicates, the Levy process increment sampler and the
backward Kolmogorov generator.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

ATOM_CAP = 50.0
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class LevySpec:
    """Gaussian coefficient plus a finite atomic spectral measure."""

    sigma2: float = 0.0
    atoms: tuple = ()
    label: str = "spec"

    def __post_init__(self):
        if not math.isfinite(self.sigma2) or self.sigma2 < 0:
            raise ValueError(f"sigma2 must be a nonnegative real, got {self.sigma2}")
        atoms = tuple((float(u), float(m)) for u, m in self.atoms)
        for u, m in atoms:
            if u == 0.0 or not math.isfinite(u):
                raise ValueError(f"atom location must be finite and nonzero, got {u}")
            if abs(u) > ATOM_CAP:
                raise ValueError(f"atom location {u} exceeds the cap |u| <= {ATOM_CAP}")
            if not (m > 0 and math.isfinite(m)):
                raise ValueError(f"atom mass must be positive, got {m}")
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "atoms", atoms)
        if not math.isfinite(self.u_square_moment):
            raise ValueError("spectral measure has infinite second moment")

    @classmethod
    def gaussian(cls, sigma2=1.0, label="lognormal"):
        return cls(sigma2=sigma2, atoms=(), label=label)

    @classmethod
    def poisson(cls, c, mass=1.0, sigma2=0.0, label=None):
        """Single atom at ``log(c)``; the log-Poisson law of multiplier ``c``."""
        if c <= 0 or c == 1:
            raise ValueError("log-Poisson multiplier c must be positive and != 1")
        return cls(sigma2=sigma2, atoms=((math.log(c), mass),),
                   label=label or f"poisson-c{c:g}")

    @property
    def locations(self) -> np.ndarray:
        return np.array([u for u, _ in self.atoms], dtype=float)

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)

    @property
    def total_mass(self) -> float:
        return math.fsum(m for _, m in self.atoms)

    @property
    def u_square_moment(self) -> float:
        return math.fsum(m * u * u for u, m in self.atoms)

    @property
    def is_gaussian(self) -> bool:
        return not self.atoms

    def to_toml(self) -> str:
        return spec_to_toml(self)


@dataclass(frozen=True)
class ChaosParams:
    """Intermittency ``mu`` and regularization scale ``epsilon``."""

    mu: float
    epsilon: float = 2.0 ** -10

    def __post_init__(self):
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be a nonnegative real, got {self.mu}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    def require_nondegenerate(self, spec: "LevySpec") -> None:
        if self.mu > 0 and not nondegenerate(spec, self.mu):
            raise ValueError(f"spec {spec.label!r} is degenerate at mu={self.mu}")


def _fmt(x: float) -> str:
    s = format(float(x), ".17g")
    if "e" not in s and "." not in s and "inf" not in s and "nan" not in s:
        s += ".0"
    return s


def spec_to_toml(spec: LevySpec) -> str:
    """Serialize with 17 significant digits so that parsing is bit exact."""
    atoms = ", ".join(f"[{_fmt(u)}, {_fmt(m)}]" for u, m in spec.atoms)
    label = spec.label.replace("\\", "\\\\").replace('"', '\\"')
    return (f"sigma2 = {_fmt(spec.sigma2)}\n"
            f"atoms = [{atoms}]\n"
            f'label = "{label}"\n')


def spec_from_mapping(data: dict) -> LevySpec:
    atoms = tuple((float(u), float(m)) for u, m in data.get("atoms", []))
    return LevySpec(sigma2=float(data.get("sigma2", 0.0)), atoms=atoms,
                    label=str(data.get("label", "spec")))


def spec_from_toml(text: str) -> LevySpec:
    return spec_from_mapping(tomllib.loads(text))


# --------------------------------------------------------------------------
# Levy-Khinchine exponent and derived scalars
# --------------------------------------------------------------------------

def phi(spec: LevySpec, q) -> complex:
    """Levy-Khinchine exponent, normalized so that ``phi(-1j) == 0``."""
    q = complex(q)
    out = -0.5j * q * spec.sigma2 - 0.5 * q * q * spec.sigma2
    for u, m in spec.atoms:
        out += m * (cmath.exp(1j * q * u) - 1.0 - 1j * q * math.expm1(u))
    return out


def phi_real(spec: LevySpec, q: float) -> float:
    """``phi(-i q)`` for real ``q`` through real arithmetic only."""
    q = float(q)
    terms = [0.5 * spec.sigma2 * q * (q - 1.0)]
    for u, m in spec.atoms:
        terms.append(m * (math.expm1(q * u) - q * math.expm1(u)))
    return math.fsum(terms)


def phi_vec(spec: LevySpec, q) -> np.ndarray:
    """Vectorized complex ``phi`` for arrays of real or complex ``q``."""
    q = np.asarray(q, dtype=complex)
    out = -0.5j * q * spec.sigma2 - 0.5 * q * q * spec.sigma2
    for u, m in spec.atoms:
        out = out + m * (np.exp(1j * q * u) - 1.0 - 1j * q * math.expm1(u))
    return out


def zeta(spec: LevySpec, mu: float, q: float) -> float:
    """Multiscaling exponent ``q - mu*phi(-iq)``."""
    return q - mu * phi_real(spec, q)


def nondegeneracy_margin(spec: LevySpec, mu: float) -> float:
    terms = [0.5 * spec.sigma2]
    for u, m in spec.atoms:
        # u e^u - e^u + 1 = u*expm1(u) - (expm1(u) - u)
        em1 = math.expm1(u)
        terms.append(m * (u * em1 - (em1 - u)))
    return 1.0 - mu * math.fsum(terms)


def nondegenerate(spec: LevySpec, mu: float) -> bool:
    if mu <= 0:
        raise ValueError("intermittency mu must be positive")
    return nondegeneracy_margin(spec, mu) > 0


class MomentClass(enum.Enum):
    FINITE = "Finite"
    BOUNDARY = "Boundary"
    INFINITE = "Infinite"


def moment_class(spec: LevySpec, mu: float, q: float, tol: float = BOUNDARY_TOL) -> MomentClass:
    if q <= 1:
        raise ValueError("moment classification is defined for q > 1")
    gap = zeta(spec, mu, q) - 1.0
    if abs(gap) <= tol:
        return MomentClass.BOUNDARY
    return MomentClass.FINITE if gap > 0 else MomentClass.INFINITE


def d_coeff(spec: LevySpec, m: int) -> float:
    """Pairwise exponent coefficient ``sigma2 + sum m_j e^{(m-1)u}(e^u-1)^2``."""
    if m < 1:
        raise ValueError("d(m) is defined for m >= 1")
    terms = [spec.sigma2]
    for u, mass in spec.atoms:
        try:
            terms.append(mass * math.exp((m - 1) * u) * math.expm1(u) ** 2)
        except OverflowError as exc:
            raise OverflowError(f"d({m}) overflows for atom at u={u}") from exc
    out = math.fsum(terms)
    if not math.isfinite(out):
        raise OverflowError(f"d({m}) overflows")
    return out


def spectral_moment(spec: LevySpec, k: int = 2, kind: str = "expm1_power") -> float:
    """``sum m_j (e^{u_j}-1)^k`` or ``sum m_j u_j^2`` (``kind='u_square'``)."""
    if kind == "u_square":
        return spec.u_square_moment
    if kind != "expm1_power":
        raise ValueError(f"unknown spectral moment kind {kind!r}")
    return math.fsum(m * math.expm1(u) ** k for u, m in spec.atoms)


def compensator_rate(spec: LevySpec) -> float:
    """``sum m_j (e^{u_j} - 1)``, the drift that keeps ``E e^X = 1``."""
    return math.fsum(m * math.expm1(u) for u, m in spec.atoms)


# --------------------------------------------------------------------------
# Levy process X(delta)
# --------------------------------------------------------------------------

def sample_levy_increment(spec: LevySpec, delta: float, rng: np.random.Generator,
                          size=None):
    """Draw ``X(delta)`` with ``E exp(iqX) = exp(delta*phi(q))``."""
    if delta < 0:
        raise ValueError("the Levy process is indexed by delta >= 0")
    shape = () if size is None else size
    out = np.zeros(shape)
    if delta == 0:
        return float(out) if size is None else out
    if spec.sigma2 > 0:
        out = out + rng.normal(-0.5 * delta * spec.sigma2,
                               math.sqrt(delta * spec.sigma2), size=shape)
    for u, m in spec.atoms:
        out = out + u * rng.poisson(delta * m, size=shape)
    out = out - delta * compensator_rate(spec)
    return float(out) if size is None else out


# --------------------------------------------------------------------------
# Test functions and the generator of X
# --------------------------------------------------------------------------

def _central_difference(fn, k: int, x: float, h: float) -> float:
    if k == 0:
        return float(fn(x))
    terms = [(-1) ** j * math.comb(k, j) * fn(x + (k / 2 - j) * h) for j in range(k + 1)]
    return math.fsum(terms) / h ** k


@dataclass(frozen=True)
class TestFunction:
    """A smooth test function ``F`` with access to its derivatives.

    ``derivative(k, x)`` is the exact k-th derivative for ``k <=
    derivative_cap``; above the cap a central finite difference is used.
    """

    __test__ = False  # keep pytest from collecting this class

    evaluator: Callable[[float], float]
    derivative: Optional[Callable[[int, float], float]] = None
    derivative_cap: int = 0
    name: str = "F"
    fd_step: float = field(default=1e-2, repr=False)

    def __call__(self, x):
        return self.evaluator(x)

    def deriv(self, k: int, x: float) -> float:
        if k < 0:
            raise ValueError("derivative order must be >= 0")
        if k == 0:
            return float(self.evaluator(x))
        if self.derivative is not None and k <= self.derivative_cap:
            return float(self.derivative(k, x))
        return _central_difference(self.evaluator, k, x, self.fd_step * max(1.0, abs(x)))

    def derivative_at_one(self, k: int) -> float:
        return self.deriv(k, 1.0)

    @property
    def is_polynomial(self) -> bool:
        return self.name.startswith("x^") or self.name in ("identity", "const")

    @classmethod
    def power(cls, n: int) -> "TestFunction":
        if n < 0:
            raise ValueError("power test functions need n >= 0")

        def deriv(k, x):
            if k > n:
                return 0.0
            return math.perm(n, k) * x ** (n - k)

        return cls(lambda x: x ** n, deriv, derivative_cap=10 ** 6, name=f"x^{n}")

    @classmethod
    def identity(cls) -> "TestFunction":
        return cls.power(1)

    @classmethod
    def constant(cls, c: float = 1.0) -> "TestFunction":
        return cls(lambda x: c + 0.0 * x, lambda k, x: 0.0, derivative_cap=10 ** 6,
                   name="const")

    @classmethod
    def log(cls) -> "TestFunction":
        def deriv(k, x):
            return (-1) ** (k - 1) * math.factorial(k - 1) * x ** (-k)

        return cls(np.log, deriv, derivative_cap=10 ** 6, name="log")

    @classmethod
    def exp(cls, a: float = 1.0) -> "TestFunction":
        return cls(lambda x: np.exp(a * x), lambda k, x: a ** k * math.exp(a * x),
                   derivative_cap=10 ** 6, name=f"exp({a:g}x)")


def test_function_from_name(name: str) -> TestFunction:
    """Parse ``"x^3"``, ``"identity"``, ``"log"``, ``"exp"`` or ``"exp:0.5"``."""
    name = name.strip()
    if name.startswith("x^"):
        return TestFunction.power(int(name[2:]))
    if name == "identity":
        return TestFunction.identity()
    if name == "log":
        return TestFunction.log()
    if name.startswith("exp"):
        a = float(name.split(":", 1)[1]) if ":" in name else 1.0
        return TestFunction.exp(a)
    raise ValueError(f"unknown test function {name!r}")


test_function_from_name.__test__ = False


def generator_apply(spec: LevySpec, v, z: float, dv=None, d2v=None, h: float = 1e-4) -> float:
    """Backward Kolmogorov generator of ``z -> z*exp(X(delta))`` applied to ``v``.

    ``v`` is a callable or a :class:`TestFunction`; missing first and second
    derivatives are replaced by central differences with relative step ``h``.
    """
    if z <= 0:
        raise ValueError("the generator acts on positive z")
    if isinstance(v, TestFunction):
        f = v.evaluator
        dv = dv or (lambda x: v.deriv(1, x))
        d2v = d2v or (lambda x: v.deriv(2, x))
    else:
        f = v
    step = h * z
    if dv is None:
        dv = lambda x: (f(x + step) - f(x - step)) / (2 * step)  # noqa: E731
    if d2v is None:
        d2v = lambda x: (f(x + step) - 2 * f(x) + f(x - step)) / step ** 2  # noqa: E731
    v0 = float(f(z))
    dv0 = float(dv(z))
    terms = [0.5 * spec.sigma2 * z * z * float(d2v(z))]
    for u, m in spec.atoms:
        shifted = float(f(z * math.exp(u)))
        if not math.isfinite(shifted):
            raise ValueError(f"test function is not evaluable at z*e^u = {z * math.exp(u)}")
        terms.append(m * (shifted - v0 - z * dv0 * math.expm1(u)))
    return math.fsum(terms)


def spec_battery() -> Sequence[LevySpec]:
    """Gaussian, single atoms at log 2 and log 1/2, and two mixtures."""
    return (
        LevySpec.gaussian(),
        LevySpec.poisson(2.0, label="poisson-c2"),
        LevySpec.poisson(0.5, label="poisson-c0.5"),
        LevySpec(sigma2=0.0, atoms=((math.log(2.0), 0.5), (math.log(0.5), 1.5)),
                 label="two-atom"),
        LevySpec(sigma2=0.7, atoms=((0.3, 2.0), (-0.8, 0.4)), label="mixed"),
    )
