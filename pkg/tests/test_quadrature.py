import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from idmc.kernel import kernel_from_name
from idmc.quadrature import (Block, SimplexIntegrand, cube_simplex_rule, gauss_jacobi01,
                             graded_rule, integrate_simplex, log_jacobi01,
                             ordered_simplex_rule, pair_simplex_integral)

BM = kernel_from_name("bacry-muzy")


@given(st.floats(-0.9, 3.0), st.floats(-0.9, 3.0), st.integers(0, 9))
def test_jacobi_rule_is_exact_on_polynomials(beta, alpha, k):
    x, w = gauss_jacobi01(6, beta, alpha)
    exact = special.beta(beta + k + 1, alpha + 1)
    assert float(np.dot(w, x ** k)) == pytest.approx(exact, rel=1e-11)


@given(st.floats(-0.9, 3.0), st.integers(0, 9))
def test_log_rule_is_exact_on_polynomials(beta, k):
    x, w = log_jacobi01(6, beta)
    assert float(np.dot(w, x ** k)) == pytest.approx(1.0 / (beta + k + 1) ** 2, rel=1e-10)


def test_rule_validation():
    with pytest.raises(ValueError):
        gauss_jacobi01(4, -1.0)
    with pytest.raises(ValueError):
        log_jacobi01(4, -1.5)


def test_graded_rule_integrates_log():
    x, w = graded_rule(0.7, panels=30, npts=12)
    exact, _ = integrate.quad(lambda t: -math.log(t), 0, 0.7)
    assert float(np.dot(w, -np.log(x))) == pytest.approx(exact, rel=1e-10)


@pytest.mark.parametrize("p", [0, 1, 2, 3, 4])
def test_ordered_simplex_rule(p):
    y, w = ordered_simplex_rule(p, 6)
    assert w.sum() == pytest.approx(1 / math.factorial(p))
    if p:
        assert np.all(np.diff(y, axis=1) >= 0)
        # E[s_1] = 1/(p+1) for sorted uniforms
        assert float(np.dot(w, y[:, 0])) * math.factorial(p) == pytest.approx(1 / (p + 1))


def test_cube_rule():
    pts, w = cube_simplex_rule(3, 5)
    assert w.sum() == pytest.approx(1.0)
    assert float(np.dot(w, pts.prod(axis=1))) == pytest.approx(1 / 8)


def dirichlet(exponents):
    """Integral of prod g_i^(e_i) over the gap simplex sum g_i = 1."""
    a = [e + 1 for e in exponents]
    return math.exp(sum(special.gammaln(x) for x in a) - special.gammaln(sum(a)))


@pytest.mark.parametrize("exps", [(0.0, 0.0), (-0.3, 0.5), (0.2, -0.4, 0.0), (-0.5, -0.5, -0.5, 1.0)])
def test_single_gap_powers_are_dirichlet(exps):
    blocks = [Block(i, i, e, kind="pow") for i, e in enumerate(exps)]
    v, err, _ = integrate_simplex(SimplexIntegrand(len(exps), blocks))
    assert v == pytest.approx(dirichlet(exps), rel=1e-10)


def test_contiguous_block_power():
    # on the 3-gap simplex g0 + g1 = 1 - g2, and the marginal weight of g2 is 1 - x
    e = -0.4
    v, _, _ = integrate_simplex(SimplexIntegrand(3, [Block(0, 1, e, kind="pow")]))
    exact, _ = integrate.quad(lambda x: (1 - x) ** (e + 1), 0, 1)
    assert v == pytest.approx(exact, rel=1e-10)


def test_methods_agree():
    blocks = [Block(0, 1, -0.3), Block(1, 2, -0.2), Block(0, 2, 0.1, kind="pow")]
    integrand = SimplexIntegrand(3, blocks, BM)
    tg, _, _ = integrate_simplex(integrand, "TensorGauss")
    ad, _, _ = integrate_simplex(integrand, "AdaptiveSubdivision", target_tol=1e-11)
    mc, se, _ = integrate_simplex(integrand, "StratifiedMC", mc_samples=40_000)
    assert ad == pytest.approx(tg, rel=1e-9)
    assert abs(mc - tg) <= 5 * se + 1e-12
    with pytest.raises(ValueError):
        integrate_simplex(integrand, "Romberg")


def test_non_integrable_blocks_rejected():
    with pytest.raises(ValueError):
        SimplexIntegrand(2, [Block(0, 0, -1.2, kind="pow")])
    with pytest.raises(ValueError):
        SimplexIntegrand(2, [Block(0, 3, 0.5)])
    with pytest.raises(ValueError):
        SimplexIntegrand(2, [Block(0, 1, 0.5, kind="exp")])


def test_pair_integral_smooth_and_singular():
    # int_{simplex_2} -log(s2 - s1) = 3/4
    assert pair_simplex_integral(2, 1, 2, kernel=BM) == pytest.approx(0.75, rel=1e-12)
    # the range of three sorted uniforms has density 6x(1 - x)
    val = pair_simplex_integral(3, 1, 3, g=lambda d: d * d)
    exact, _ = integrate.quad(lambda x: 6 * x * (1 - x) * x * x, 0, 1)
    assert val == pytest.approx(exact / 6, rel=1e-12)
    with pytest.raises(ValueError):
        pair_simplex_integral(3, 2, 2, kernel=BM)
    with pytest.raises(ValueError):
        pair_simplex_integral(3, 1, 2)
