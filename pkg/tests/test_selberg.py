import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idmc.idspec import LevySpec, spec_battery
from idmc.kernel import kernel_from_name
from idmc.selberg import (CSV_HEADER, MomentReport, SelbergQuery, cube_moment_mc,
                          generalized_selberg, lognormal_closed_form, moment_integral,
                          moment_mu_derivative, selberg_product)

BM = kernel_from_name("bacry-muzy")
TILTED = kernel_from_name("general-r:tilted")
IDENT = kernel_from_name("general-r")
GAUSS = LevySpec.gaussian()


def selberg_mp(n, a, b, g):
    out = mpmath.mpf(1)
    for j in range(n):
        out *= (mpmath.gamma(a + j * g) * mpmath.gamma(b + j * g) * mpmath.gamma(1 + (j + 1) * g)
                / (mpmath.gamma(a + b + (n + j - 1) * g) * mpmath.gamma(1 + g)))
    return float(out)


@given(st.integers(1, 6), st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.floats(-0.08, 0.5))
def test_selberg_product_against_mpmath(n, a, b, g):
    assert selberg_product(n, a, b, g) == pytest.approx(selberg_mp(n, a, b, g), rel=1e-10)


def test_selberg_product_small_cases():
    assert selberg_product(1, 2.0, 3.0, 0.7) == pytest.approx(math.gamma(2) * math.gamma(3) / math.gamma(5))
    # int_0^1 int_0^1 |x - y|^{-mu} = 2 / ((1 - mu)(2 - mu))
    mu = 0.4
    assert selberg_product(2, 1, 1, -mu / 2) == pytest.approx(2 / ((1 - mu) * (2 - mu)))
    with pytest.raises(ValueError):
        selberg_product(3, 1, 1, -0.6)
    with pytest.raises(ValueError):
        selberg_product(0, 1, 1, 0.1)


@pytest.mark.parametrize("n,mu", [(2, 0.1), (2, 0.5), (3, 0.2), (3, 0.4), (4, 0.3), (5, 0.15)])
def test_quadrature_matches_closed_form(n, mu):
    q = moment_integral(GAUSS, BM, n, mu)
    closed = lognormal_closed_form(n, mu).value
    assert q.value == pytest.approx(closed, rel=1e-9)
    assert abs(q.value - closed) <= q.error_estimate + 1e-12


def test_trivial_moments():
    assert moment_integral(GAUSS, BM, 1, 0.5).value == 1.0
    assert moment_integral(GAUSS, BM, 3, 0.0).value == 1.0
    assert lognormal_closed_form(1, 0.3).value == 1.0
    with pytest.raises(ValueError):
        lognormal_closed_form(4, 0.5)
    with pytest.raises(ValueError):
        moment_integral(GAUSS, BM, 4, 0.5)
    with pytest.raises(ValueError):
        moment_integral(GAUSS, BM, 2, 0.1, method="Simpson")


def test_log_poisson_second_moment():
    spec = LevySpec(atoms=((math.log(0.5), 1.0),))
    a, mu = 0.25, 0.1
    assert moment_integral(spec, BM, 2, mu).value == pytest.approx(
        2 / ((1 - a * mu) * (2 - a * mu)), rel=1e-12)


@pytest.mark.parametrize("kernel", [BM, TILTED], ids=lambda k: k.label)
@pytest.mark.parametrize("spec", spec_battery()[:3], ids=lambda s: s.label)
def test_derivative_matches_finite_difference(kernel, spec):
    n, mu, h = 3, 0.1, 1e-3
    d = moment_mu_derivative(spec, kernel, n, mu).value
    m = {k: moment_integral(spec, kernel, n, mu + k * h).value for k in (-2, -1, 1, 2)}
    fd = (m[-2] - 8 * m[-1] + 8 * m[1] - m[2]) / (12 * h)
    assert d == pytest.approx(fd, rel=1e-7)


@pytest.mark.parametrize("kernel", [BM, TILTED], ids=lambda k: k.label)
@pytest.mark.parametrize("n", [2, 3, 4])
def test_pair_reduction_at_zero(kernel, n):
    spec = spec_battery()[-1]
    exact = moment_mu_derivative(spec, kernel, n, 0.0)
    general = moment_mu_derivative(spec, kernel, n, 0.0, exact_at_zero=False)
    assert exact.method == "pair-reduction"
    assert exact.value == pytest.approx(general.value, rel=1e-9)


def test_lognormal_derivative_at_zero():
    # d/dmu of the Selberg product at 0 is sum_{i<j} E[-log|U_i - U_j|] = C(n,2) * 3/2
    for n in (2, 3, 4):
        d = moment_mu_derivative(GAUSS, BM, n, 0.0).value
        assert d == pytest.approx(math.comb(n, 2) * 1.5)


@pytest.mark.parametrize("n", [2, 3])
def test_generalized_selberg_reduces_to_product(n):
    # kernel r(t) = t turns the endpoint weights into t^a (1-t)^b
    a, b, g = 0.3, -0.2, -0.15
    q = SelbergQuery(n, GAUSS, IDENT, lam=g, lam1=a, lam2=b)
    val = generalized_selberg(q).value * math.factorial(n)
    assert val == pytest.approx(selberg_product(n, 1 + a, 1 + b, g), rel=1e-9)


def test_generalized_selberg_symmetry_and_trivial_case():
    spec = spec_battery()[1]
    q1 = SelbergQuery(3, spec, TILTED, lam=-0.05, lam1=0.2, lam2=-0.1)
    q2 = SelbergQuery(3, spec, TILTED, lam=-0.05, lam1=-0.1, lam2=0.2)
    assert generalized_selberg(q1).value == pytest.approx(generalized_selberg(q2).value, rel=1e-10)
    empty = generalized_selberg(SelbergQuery(4, GAUSS, BM))
    assert empty.value == pytest.approx(1 / 24)
    with pytest.raises(ValueError):
        generalized_selberg(SelbergQuery(2, GAUSS, IDENT, lam1=-1.5))


@settings(deadline=None, max_examples=10)
@given(st.floats(0.05, 0.6))
def test_cube_average_matches_simplex_quadrature(mu):
    mean, se = cube_moment_mc(GAUSS, BM, 2, mu, 200_000, seed=1)
    assert abs(mean - moment_integral(GAUSS, BM, 2, mu).value) <= 5 * se


def test_stratified_mc_method():
    r = moment_integral(GAUSS, BM, 3, 0.2, method="StratifiedMC", mc_samples=60_000, seed=3)
    assert abs(r.value - lognormal_closed_form(3, 0.2).value) <= 5 * r.error_estimate


def test_report_rows():
    r = moment_integral(GAUSS, BM, 2, 0.3)
    assert len(r.csv_row().split(",")) == len(CSV_HEADER.split(","))
    with pytest.raises(ValueError):
        MomentReport(2, 0.1, 1.0, -1.0, "x", 0)
