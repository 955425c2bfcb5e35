import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idmc.chaos import (CovarianceProbe, fit_line, girsanov_rhs, interval_weights,
                        log_mass_covariance, mc_moment, moment_samples, multiplier_cf,
                        sample_masses, scaling_moments, total_mass, v_functional)
from idmc.fieldsim import simulate_field, uniform_grid
from idmc.idspec import ChaosParams, LevySpec, TestFunction, phi, spec_battery
from idmc.kernel import kernel_from_name
from idmc.mc import MCEstimate, chunk_sizes, covariance_estimate, estimate, run_chunks, stream
from idmc.selberg import lognormal_closed_form

BM = kernel_from_name("bacry-muzy")
EPS = 2.0 ** -10
GAUSS = LevySpec.gaussian()
MIXED = spec_battery()[-1]


@given(st.floats(0, 1), st.floats(0, 1))
def test_interval_weights_integrate_linear_functions(a, b):
    a, b = min(a, b), max(a, b)
    grid = uniform_grid(257)
    w = interval_weights(grid, a, b)
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(b - a, abs=1e-12)
    assert float(w @ grid) == pytest.approx((b * b - a * a) / 2, abs=1e-12)


def test_interval_weights_validation():
    with pytest.raises(ValueError):
        interval_weights(np.linspace(0.2, 1, 9), 0.0, 0.5)


def test_stream_discipline():
    a = stream(7, 3).random(4)
    b = stream(7, 3).random(4)
    c = stream(7, 4).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert list(chunk_sizes(1201, 500)) == [500, 500, 201]


def test_run_chunks_independent_of_workers():
    fn = lambda rng, size: rng.normal(size=size)
    one = run_chunks(fn, 2300, 5, 500, 1)
    two = run_chunks(fn, 2300, 5, 500, 3)
    assert np.array_equal(one, two)


def test_estimates():
    e = estimate(np.array([1.0, 2.0, 3.0]))
    assert e.mean == 2.0
    assert e.stderr == pytest.approx(math.sqrt(1 / 3))
    assert e.agrees(2.5, 1.0)
    assert e.zscore(2.0) == 0.0
    with pytest.raises(ValueError):
        MCEstimate(1.0, 0.1, 1)
    x = np.arange(10.0)
    c = covariance_estimate(x, 2 * x)
    assert c.mean == pytest.approx(2 * np.var(x, ddof=1))


def test_total_mass_of_flat_field():
    params = ChaosParams(0.1, EPS)
    f = simulate_field(GAUSS, BM, params, uniform_grid(), stream(0, 0))
    f.values[:] = 0.0
    assert total_mass(f).mass == pytest.approx(1.0)
    assert total_mass(f, (0.25, 0.5)).mass == pytest.approx(0.25)


@pytest.mark.parametrize("spec", [GAUSS, MIXED], ids=lambda s: s.label)
def test_mass_has_unit_mean(spec):
    est = mc_moment(spec, BM, ChaosParams(0.2, EPS), 1, 4000, seed=1)
    assert est.agrees(1.0, 4.0)


def test_estimators_agree():
    params = ChaosParams(0.3, EPS)
    exact = lognormal_closed_form(2, 0.3).value
    for est_name in ("plain", "control", "size_biased"):
        est = mc_moment(GAUSS, BM, params, 2, 3000, seed=2, estimator=est_name)
        assert abs(est.mean - exact) <= 4 * est.stderr + 0.02, est_name
    sub = mc_moment(GAUSS, BM, params, 2, 3000, seed=2, interval=(0.0, 0.5))
    # E[M(0, 1/2)^2] = 2^{-zeta(2)} E[M^2] up to the cutoff
    assert sub.mean == pytest.approx(exact * 0.5 ** (2 - 0.3), rel=0.08)


def test_moment_errors():
    params = ChaosParams(0.7, EPS)
    with pytest.raises(ValueError):
        mc_moment(GAUSS, BM, params, 3, 100, seed=0)
    with pytest.raises(ValueError):
        mc_moment(GAUSS, BM, ChaosParams(0.1, EPS), 2, 100, seed=0, estimator="magic")
    with pytest.raises(ValueError):
        moment_samples(GAUSS, BM, ChaosParams(0.1, EPS), 0, 100, seed=0)


def test_mass_sampling_is_deterministic():
    params = ChaosParams(0.1, EPS)
    a = sample_masses(MIXED, BM, params, [(0, 1), (0, 0.5)], 600, 9)
    b = sample_masses(MIXED, BM, params, [(0, 1), (0, 0.5)], 600, 9, workers=2)
    assert np.array_equal(a, b)
    assert np.all(a[:, 1] < a[:, 0])


def test_covariance_probe():
    params = ChaosParams(0.2, EPS)
    with pytest.raises(ValueError):
        CovarianceProbe(0.0, 0.01, params)
    with pytest.raises(ValueError):
        CovarianceProbe(0.3, 0.4, params)
    with pytest.raises(ValueError):
        CovarianceProbe(0.995, 0.01, params)
    est = log_mass_covariance(GAUSS, BM, CovarianceProbe(0.1, 0.01, params, 4000), seed=3)
    # first-order value mu * (-log t) plus an O(1) offset
    assert 0.2 < est.mean < 0.7
    zero = log_mass_covariance(GAUSS, BM, CovarianceProbe(0.1, 0.01, ChaosParams(0.0, EPS)), seed=3)
    assert zero.mean == 0.0


def test_fit_line():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    slope, intercept, se = fit_line(x, 3 * x - 1)
    assert (slope, intercept) == pytest.approx((3.0, -1.0))
    assert se == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_line([1, 2], [1, 2])


def test_scaling_moments_estimators_agree():
    scales = [0.125, 0.5]
    sb = scaling_moments(GAUSS, BM, 0.2, 2, scales, 3000, seed=4)
    pl = scaling_moments(GAUSS, BM, 0.2, 2, scales, 3000, seed=4, estimator="plain")
    assert sb == pytest.approx(pl, rel=0.1)
    with pytest.raises(ValueError):
        scaling_moments(GAUSS, BM, 0.2, 2, [0.0, 0.5], 10, seed=0)


def test_girsanov_sides_at_small_intermittency():
    params = ChaosParams(0.1, EPS)
    F = TestFunction.power(2)
    lhs = v_functional(GAUSS, BM, params, F, [0.3], 8000, seed=5)
    rhs = girsanov_rhs(GAUSS, BM, params, F, [0.3], 8000, seed=6)
    assert abs(lhs.mean - rhs.mean) <= 4 * math.hypot(lhs.stderr, rhs.stderr)
    with pytest.raises(ValueError):
        girsanov_rhs(MIXED, BM, params, F, [0.3], 10, seed=0)
    with pytest.raises(ValueError):
        v_functional(GAUSS, BM, params, F, [0.5, 0.3], 10, seed=0)


def test_multiplier_characteristic_function():
    assert multiplier_cf(MIXED, 0.2, 0.5, 0.0) == pytest.approx(1.0)
    q, g = 1.3, 0.4
    assert multiplier_cf(MIXED, 0.2, g, q) == pytest.approx(
        np.exp((1j * q - 0.2 * phi(MIXED, q)) * math.log(g)))
    with pytest.raises(ValueError):
        multiplier_cf(MIXED, 0.2, 1.5, q)
