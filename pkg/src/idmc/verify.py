"""Verification suites run by ``idmc verify``.

Each suite returns a list of :class:`~idmc.reports.CheckRow`.  Deterministic
suites compare exact or quadrature values; the covariance suite is the only
Monte Carlo one and uses the configured sample budget.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, List

import numpy as np
from scipy import integrate

from . import comb, intermittency as im
from .chaos import fit_line, log_mass_covariances
from .config import RunConfig
from .fieldsim import InvarianceProbe, check_intermittency_invariance, check_scale_invariance
from .idspec import LevySpec, TestFunction, d_coeff, phi_real, spec_battery, spectral_moment
from .kernel import kernel_from_name
from .reports import CheckRow, check
from .selberg import lognormal_closed_form, moment_integral, moment_mu_derivative

INVARIANCE_PROBES = 50
INVARIANCE_TOL = 1e-12
IDENTITY_TOL = 1e-8
INTEGRAL_IDENTITY_TOL = 1e-6
BLEMMA_TOL = 1e-6
COMB_TOL = 1e-10


def _battery(cfg: RunConfig) -> List[LevySpec]:
    specs = list(spec_battery())
    if all(s.to_toml() != cfg.spec.to_toml() for s in specs):
        specs.append(cfg.spec)
    return specs


def invariance_suite(cfg: RunConfig) -> List[CheckRow]:
    """Analytic joint-CF residuals over a random probe battery."""
    rng = np.random.Generator(np.random.Philox(int(cfg.sim["seed"])))
    specs = list(spec_battery())
    kernels = [kernel_from_name("bacry-muzy"), kernel_from_name("general-r:tilted")]
    rows = []
    worst_int = worst_scale = 0.0
    for i in range(INVARIANCE_PROBES):
        spec = specs[i % len(specs)]
        n = 1 + i % 3
        mu = float(rng.uniform(0.05, 0.5))
        delta = float(rng.uniform(0.0, mu))
        L = float(rng.uniform(1.0, 3.0))
        eps = float(2.0 ** -rng.integers(4, 12))
        ts = tuple(np.sort(rng.uniform(0.0, 1.0, n)))
        qs = tuple(rng.uniform(-2.0, 2.0, n))
        probe = InvarianceProbe(mu, delta, L, eps, qs, ts)
        worst_int = max(worst_int, check_intermittency_invariance(probe, spec, kernels[i % 2]))
        worst_scale = max(worst_scale, check_scale_invariance(spec, kernels[0], mu, delta, eps,
                                                              qs, ts))
    params = f"probes={INVARIANCE_PROBES}"
    rows.append(check("intermittency-invariance", params, worst_int, 0.0, INVARIANCE_TOL))
    rows.append(check("scale-invariance", params, worst_scale, 0.0, INVARIANCE_TOL))
    return rows


def identities_suite(cfg: RunConfig) -> List[CheckRow]:
    """Moment-derivative equivalences, the pair identity, Selberg oracle, counting."""
    rows = []
    canonical = kernel_from_name("bacry-muzy")
    kernels = [canonical, kernel_from_name("general-r:tilted")]
    for spec in _battery(cfg):
        for kernel in kernels:
            for n in range(2, 6):
                series = im.first_order_term(spec, kernel, TestFunction.power(n)).total
                pairs = moment_mu_derivative(spec, kernel, n, 0.0).value
                rows.append(check("derivative-series-vs-pairs",
                                  f"spec={spec.label};kernel={kernel.label};n={n}",
                                  series, pairs, IDENTITY_TOL))
        for n in range(2, 5):
            engine = moment_mu_derivative(spec, canonical, n, 0.0, exact_at_zero=False).value
            pairs = moment_mu_derivative(spec, canonical, n, 0.0).value
            rows.append(check("derivative-sectors-vs-pairs", f"spec={spec.label};n={n}",
                              engine, pairs, IDENTITY_TOL))
        for n in range(2, 7):
            total = math.fsum(d_coeff(spec, p - k) for k in range(1, n + 1) for p in range(k + 1, n + 1))
            rows.append(check("d-sum", f"spec={spec.label};n={n}", total, phi_real(spec, n),
                              IDENTITY_TOL * max(1.0, abs(total))))
    for omega_name, omega in (("zero", lambda s: 0.0 * s), ("sin", lambda s: np.sin(np.pi * s))):
        for n in range(2, 6):
            for k in range(2, n + 1):
                lhs, rhs, res = im.integral_identity_check(n, k, omega, canonical)
                rows.append(check("pair-identity", f"omega={omega_name};n={n};k={k}",
                                  lhs, rhs, INTEGRAL_IDENTITY_TOL))
    lhs, rhs, _ = im.integral_identity_check(3, 2, lambda s: 0.0 * s, canonical)
    rows.append(check("pair-identity-exact", "n=3;k=2", lhs, 0.75, 1e-12))
    for n, mu in ((2, 0.1), (2, 0.5), (3, 0.1), (3, 0.2), (4, 0.2)):
        quad = moment_integral(LevySpec.gaussian(), canonical, n, mu)
        closed = lognormal_closed_form(n, mu).value
        rows.append(check("selberg-closed-form", f"n={n};mu={mu}", quad.value, closed,
                          max(1e-6, quad.error_estimate)))
    rows.extend(combinatorics_rows(cfg))
    return rows


def combinatorics_rows(cfg: RunConfig) -> List[CheckRow]:
    rows = []
    mismatches = 0
    vandermonde = 0
    count = 0
    for q in comb.all_tuple_queries():
        count += 1
        mismatches += comb.tuple_count(q) != len(comb.enumerate_tuples(q))
        lhs, rhs = comb.vandermonde_sides(q)
        vandermonde += lhs != rhs
    rows.append(check("tuple-count", f"queries={count}", mismatches, 0, 0))
    rows.append(check("vandermonde", f"queries={count}", vandermonde, 0, 0))
    example = comb.tuple_count(comb.TupleQuery(7, 4, 2, 5, 2))
    rows.append(check("tuple-count-example", "n=7;k=4;a=2;b=5;l=2", example, 6, 0))
    worst = max(abs(comb.alternating_sum_zero(x)) for x in range(1, 65))
    rows.append(check("alternating-sum", "x=1..64", worst, 0, 0))
    rng = np.random.Generator(np.random.Philox(int(cfg.sim["seed"]) + 1))
    kernel = kernel_from_name("bacry-muzy")
    for spec in _battery(cfg):
        worst = 0.0
        for n in range(2, 11):
            lhs, rhs, _ = comb.blemma_coefficient_collapse(spec, n)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
        rows.append(check("coefficient-collapse", f"spec={spec.label};n=2..10", worst, 0.0,
                          COMB_TOL))
        worst_d = worst_a = 0.0
        for n in range(2, 7):
            pos = np.sort(rng.uniform(0.0, 1.0, n))
            worst_d = max(worst_d, comb.dsum_decomposition_check(spec, n, pos, kernel))
            worst_a = max(worst_a, comb.alpha_sum_check(spec, rng.uniform(-2.0, 2.0, n)))
        rows.append(check("d-sum-regrouping", f"spec={spec.label};n=2..6", worst_d, 0.0, COMB_TOL))
        rows.append(check("alpha-sum", f"spec={spec.label};n=2..6", worst_a, 0.0, COMB_TOL))
    return rows


def blemma_suite(cfg: RunConfig) -> List[CheckRow]:
    rows = []
    points = {2: (0.2, 0.5), 3: (0.15, 0.4, 0.7), 4: (0.1, 0.3, 0.55, 0.8)}
    for kernel in (kernel_from_name("bacry-muzy"), kernel_from_name("general-r:tilted")):
        for spec in _battery(cfg):
            for n, s in points.items():
                for L in (1.0, 2.0):
                    emp, pred, res = im.blemma_slope_check(spec, kernel, im.BLemmaProbe(s, L=L))
                    rows.append(check("blemma-slope",
                                      f"spec={spec.label};kernel={kernel.label};n={n};L={L}",
                                      emp, pred, BLEMMA_TOL, res))
    return rows


def _rule_lhs_n1(spec: LevySpec, t1: float) -> float:
    """``d/dmu E[M^2 e^{omega(t1)}]`` at ``mu = 0`` by direct 2D quadrature."""

    def integrand(y, x):
        pts = sorted((x, y, t1))
        return math.fsum(d_coeff(spec, j - i) * -math.log(max(pts[j] - pts[i], 1e-300))
                         for i in range(3) for j in range(i + 1, 3))

    cuts = [(0.0, t1), (t1, 1.0)]
    return math.fsum(integrate.nquad(integrand, [a, b], opts={"limit": 200, "epsabs": 1e-11})[0]
                     for a in cuts for b in cuts)


def expansion_suite(cfg: RunConfig) -> List[CheckRow]:
    rows = []
    kernel = kernel_from_name("bacry-muzy")
    gmc = LevySpec.gaussian()
    rows.append(check("first-order-x2", "gmc", im.first_order_term(gmc, kernel, TestFunction.power(2)).total,
                      1.5, IDENTITY_TOL))
    rows.append(check("first-order-x3", "gmc", im.first_order_term(gmc, kernel, TestFunction.power(3)).total,
                      4.5, IDENTITY_TOL))
    half = LevySpec.poisson(0.5)
    a = d_coeff(half, 1)
    rows.append(check("first-order-poisson-x2", "c=0.5",
                      im.first_order_term(half, kernel, TestFunction.power(2)).total,
                      1.5 * a, IDENTITY_TOL))
    k_max = int(cfg.section("expansion").get("k_max", im.DEFAULT_K_MAX))
    F = TestFunction.log()
    for spec in _battery(cfg):
        if not spec.atoms:
            continue
        e1 = im.first_order_term(spec, kernel, F, k_max)
        e2 = im.first_order_term(spec, kernel, F, k_max + 2)
        rows.append(check("truncation-bound", f"spec={spec.label};k_max={k_max};F=log",
                          abs(e1.total - e2.total), 0.0, e1.tail_bound))
    ident = TestFunction.identity()
    for spec in (gmc, LevySpec.poisson(2.0)):
        for I1, I2 in (((0.1, 0.4), (0.4, 0.9)), ((0.0, 0.3), (0.5, 1.0))):
            total = im.first_order_two_intervals(spec, kernel, ident, ident, I1, I2).total
            ref = integrate.dblquad(lambda t, s: -math.log(t - s), I1[0], I1[1], I2[0], I2[1],
                                    epsabs=1e-12)[0] * d_coeff(spec, 1)
            rows.append(check("two-interval-identity", f"spec={spec.label};I1={I1};I2={I2}",
                              total, ref, 1e-8))
    mixed = spec_battery()[-1]
    two = im.first_order_two_intervals(mixed, kernel, TestFunction.power(3), TestFunction.constant(2.0),
                                       (0.0, 0.6), (0.7, 1.0)).total
    one = 2.0 * im.first_order_term(mixed, kernel, TestFunction.power(3), length=0.6).total
    rows.append(check("two-interval-constant", "F2=2", two, one, 1e-12))
    for spec in (LevySpec.poisson(2.0, 0.7), mixed):
        t1 = 0.3
        rhs = im.rule_rhs_at_zero(spec, kernel, 1, TestFunction.power(2), [t1])
        rows.append(check("n-point-rule", f"spec={spec.label};n=1;F=x^2;t1={t1}",
                          _rule_lhs_n1(spec, t1), rhs, 1e-7))
    for spec in _battery(cfg):
        for k_max_rule in (4, 8):
            rule = sorted((t.family, t.l, t.spectral_factor) for t in im.rule_terms(spec, 0, k_max_rule))
            direct = []
            if spec.sigma2:
                direct.append(("gaussian-two", 2, spec.sigma2))
            if spec.atoms:
                direct += [("jump", k, spectral_moment(spec, k)) for k in range(2, k_max_rule + 1)]
            same = float(rule == sorted(direct))
            rows.append(check("rule-n0-reduction", f"spec={spec.label};l_max={k_max_rule}",
                              same, 1.0, 0.0))
    return rows


def covariance_suite(cfg: RunConfig) -> List[CheckRow]:
    """Monte Carlo regression slope of log-mass covariances against ``g(0, t)``.

    For the canonical kernel ``g(0, t) = -log t``.
    """
    sec = cfg.section("covariance")
    t_list = [float(t) for t in sec.get("t_list")]
    tau = float(sec.get("tau"))
    n_samples = int(sec.get("n_samples", cfg.sim["n_samples"]))
    rel_tol = float(sec.get("rel_tol", 0.2))
    spec, kernel, params = cfg.spec, cfg.kernel, cfg.params
    if params.mu == 0:
        return [check("covariance-slope", "mu=0", 0.0, 0.0, 0.0)]
    covs = log_mass_covariances(spec, kernel, params, t_list, tau, n_samples,
                                int(cfg.sim["seed"]), int(cfg.sim["grid_points"]),
                                int(cfg.sim["workers"]))
    x = [kernel.g(0.0, t) for t in t_list]
    slope, _, _ = fit_line(x, [c.mean for c in covs])
    predicted = params.mu * (spec.sigma2 + spectral_moment(spec, kind="u_square"))
    return [check("covariance-slope", f"spec={spec.label};mu={params.mu};n={n_samples}",
                  slope, predicted, rel_tol * abs(predicted))]


SUITE_RUNNERS: Dict[str, Callable[[RunConfig], List[CheckRow]]] = {
    "invariance": invariance_suite,
    "identities": identities_suite,
    "blemma": blemma_suite,
    "expansion": expansion_suite,
    "covariance": covariance_suite,
}


def run_suites(cfg: RunConfig, suites=None) -> List[CheckRow]:
    rows = []
    for name in suites or cfg.suites:
        rows.extend(SUITE_RUNNERS[name](cfg))
    return rows
