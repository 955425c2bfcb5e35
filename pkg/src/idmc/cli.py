"""Command line entry point ``idmc``.

Every subcommand reads a TOML run configuration (``--config``), applies
``--set section.key=value`` overrides, writes CSV tables plus the echoed
configuration and a ``summary.json`` into the output directory, and exits
with 0 (all checks passed), 1 (a verification failed) or 2 (bad
configuration or model).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import intermittency as im
from .chaos import fit_line, interval_weights, log_mass_covariances, mc_moment, scaling_moments
from .config import ConfigError, RunConfig
from .fieldsim import FieldSampler, uniform_grid
from .idspec import (MomentClass, moment_class, nondegeneracy_margin, phi, phi_real,
                     spectral_moment, test_function_from_name, zeta)
from .mc import stream
from .reports import (CHECK_HEADER, COVARIANCE_HEADER, EXPANSION_HEADER, MOMENT_COMPARE_HEADER,
                      MOMENT_HEADER, SCALING_HEADER, SPEC_CHECK_HEADER, CheckRow, Summary,
                      check, write_csv)
from .selberg import (DETERMINISTIC_MAX_N, lognormal_closed_form, moment_integral,
                      moment_mu_derivative)
from .verify import run_suites

log = logging.getLogger("idmc")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class Run:
    """Output directory bookkeeping shared by the subcommands."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = cfg.output_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.summary = Summary(config=cfg.data)
        path = self.out / "config.toml"
        path.write_text(cfg.to_toml())
        self.summary.artifacts.append(str(path))

    def table(self, name: str, header, rows) -> Path:
        path = write_csv(self.out / name, header, rows)
        self.summary.artifacts.append(str(path))
        return path

    def add(self, rows: List[CheckRow]) -> None:
        self.summary.checks.extend(rows)

    def finish(self) -> int:
        path = self.summary.write(self.out)
        failed = [c for c in self.summary.checks if not c.passed]
        for c in failed:
            log.error("FAIL %s [%s] lhs=%.10g rhs=%.10g residual=%.3g tol=%.3g", c.check,
                      c.parameters, c.lhs, c.rhs, c.residual, c.tolerance)
        print(f"{self.command}: {len(self.summary.checks) - len(failed)}/"
              f"{len(self.summary.checks)} checks passed; summary at {path}")
        return EXIT_FAIL if failed else EXIT_OK


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_spec_check(cfg: RunConfig) -> int:
    spec, mu = cfg.spec, cfg.mu
    norm = abs(phi(spec, -1j))
    print(f"spec {spec.label}: sigma2={spec.sigma2:g}, atoms={len(spec.atoms)}, mu={mu:g}")
    print(f"normalization |phi(-i)| = {norm:.3e}")
    if mu > 0:
        margin = nondegeneracy_margin(spec, mu)
        print(f"non-degeneracy margin = {margin:.6g}")
        cfg.require_nondegenerate()
    run = Run(cfg, "spec-check")
    run.add([check("phi-normalization", f"spec={spec.label}", norm, 0.0, 1e-12)])
    rows = []
    n_max = int(cfg.section("spec_check").get("n_max", 8))
    print(f"{'n':>3} {'zeta(n)':>12}  class")
    for n in range(2, n_max + 1):
        z = zeta(spec, mu, n)
        cls = moment_class(spec, mu, n).value if mu > 0 else MomentClass.FINITE.value
        rows.append((n, z, cls))
        print(f"{n:>3} {z:>12.6f}  {cls}")
    run.table("spec_check.csv", SPEC_CHECK_HEADER, rows)
    return run.finish()


def cmd_simulate(cfg: RunConfig) -> int:
    cfg.require_nondegenerate()
    run = Run(cfg, "simulate")
    sim = cfg.sim
    grid = uniform_grid(int(sim["grid_points"]))
    sampler = FieldSampler(cfg.spec, cfg.kernel, cfg.params, grid, warn=not sim["allow_coarse_grid"])
    w = interval_weights(grid, 0.0, 1.0)
    n_fields = int(cfg.section("simulate").get("n_fields", 1))
    masses = []
    for i in range(n_fields):
        field = sampler.sample_field(stream(int(sim["seed"]), i), int(sim["seed"]), i)
        path = run.out / f"field_{i:04d}.csv"
        field.to_csv(path)
        run.summary.artifacts.append(str(path))
        masses.append((i, float(np.exp(field.values) @ w)))
    run.table("masses.csv", ("field", "total_mass"), masses)
    return run.finish()


def cmd_moments(cfg: RunConfig) -> int:
    spec, kernel, params = cfg.spec, cfg.kernel, cfg.params
    cfg.require_nondegenerate()
    sec, sim = cfg.section("moments"), cfg.sim
    n_sigma = float(sec.get("n_sigma", 3.0))
    run = Run(cfg, "moments")
    quad_rows, rows, checks = [], [], []
    for n in [int(x) for x in sec.get("n_list", [2])]:
        if n >= 2 and params.mu > 0 and moment_class(spec, params.mu, n) is not MomentClass.FINITE:
            log.warning("skipping n=%d: moment is not finite at mu=%g", n, params.mu)
            continue
        quad = None
        if n <= DETERMINISTIC_MAX_N:
            quad = moment_integral(spec, kernel, n, params.mu, str(sec.get("method", "TensorGauss")))
            quad_rows.append((n, params.mu, spec.label, kernel.label, quad.method, quad.value,
                              quad.error_estimate, quad.evaluations))
        est = mc_moment(spec, kernel, params, n, int(sim["n_samples"]), int(sim["seed"]),
                        int(sim["grid_points"]), int(sim["workers"]),
                        estimator=str(sec.get("estimator", "size_biased")))
        closed = math.nan
        if not spec.atoms and kernel.is_canonical and n * params.mu * spec.sigma2 < 2:
            closed = lognormal_closed_form(n, params.mu * spec.sigma2).value
        ref = quad.value if quad is not None else closed
        z = est.zscore(ref) if math.isfinite(ref) else math.nan
        agree = (not math.isfinite(ref)) or abs(est.mean - ref) <= n_sigma * est.stderr + (
            quad.error_estimate if quad is not None else 0.0)
        rows.append((n, params.mu, spec.label, kernel.label,
                     quad.value if quad else math.nan, quad.error_estimate if quad else math.nan,
                     est.mean, est.stderr, closed, z, str(agree).lower()))
        print(f"n={n}: quadrature {ref:.8g}  MC {est.mean:.6g} +- {est.stderr:.2g}"
              f"  closed form {closed:.8g}")
        if math.isfinite(ref):
            checks.append(check("moment-mc-vs-quadrature", f"n={n};mu={params.mu}", est.mean, ref,
                                n_sigma * est.stderr + (quad.error_estimate if quad else 0.0)))
        if quad is not None and math.isfinite(closed):
            checks.append(check("moment-quadrature-vs-closed-form", f"n={n};mu={params.mu}",
                                quad.value, closed, max(1e-6, quad.error_estimate)))
    run.table("moments_quadrature.csv", MOMENT_HEADER, quad_rows)
    run.table("moments.csv", MOMENT_COMPARE_HEADER, rows)
    run.add(checks)
    return run.finish()


def cmd_covariance(cfg: RunConfig) -> int:
    spec, kernel, params = cfg.spec, cfg.kernel, cfg.params
    cfg.require_nondegenerate()
    sec, sim = cfg.section("covariance"), cfg.sim
    t_list = [float(t) for t in sec["t_list"]]
    tau = float(sec["tau"])
    n_samples = int(sec.get("n_samples", sim["n_samples"]))
    run = Run(cfg, "covariance")
    covs = log_mass_covariances(spec, kernel, params, t_list, tau, n_samples, int(sim["seed"]),
                                int(sim["grid_points"]), int(sim["workers"]))
    rows = [(t, tau, c.mean, c.stderr, im.covariance_slope(spec, params.mu, t, kernel))
            for t, c in zip(t_list, covs)]
    run.table("covariance.csv", COVARIANCE_HEADER, rows)
    x = [kernel.g(0.0, t) for t in t_list]
    slope, intercept, se = fit_line(x, [c.mean for c in covs])
    predicted = params.mu * (spec.sigma2 + spectral_moment(spec, kind="u_square"))
    rel_tol = float(sec.get("rel_tol", 0.2))
    print(f"slope {slope:.5g} +- {se:.2g} (predicted {predicted:.5g})")
    run.add([check("covariance-slope", f"mu={params.mu};n={n_samples}", slope, predicted,
                   rel_tol * abs(predicted))])
    return run.finish()


def cmd_scaling(cfg: RunConfig) -> int:
    spec, kernel, params = cfg.spec, cfg.kernel, cfg.params
    cfg.require_nondegenerate()
    sec, sim = cfg.section("scaling"), cfg.sim
    n = int(sec.get("n", 2))
    scales = [float(t) for t in sec["scales"]]
    run = Run(cfg, "scaling")
    moments = scaling_moments(spec, kernel, params.mu, n, scales, int(sim["n_samples"]),
                              int(sim["seed"]), params.epsilon, int(sim["grid_points"]),
                              int(sim["workers"]), str(sec.get("estimator", "size_biased")))
    run.table("scaling.csv", SCALING_HEADER, zip(scales, moments))
    slope, intercept, se = fit_line(np.log(scales), np.log(moments))
    predicted = n - params.mu * phi_real(spec, n)
    tol = float(sec.get("tol", 0.05))
    print(f"slope {slope:.5g} +- {se:.2g} (zeta({n}) = {predicted:.5g})")
    run.add([check("scaling-exponent", f"n={n};mu={params.mu}", slope, predicted, tol)])
    return run.finish()


def cmd_expand(cfg: RunConfig) -> int:
    sec = cfg.section("expansion")
    F = test_function_from_name(str(sec.get("test_function", "x^3")))
    k_max = int(sec.get("k_max", im.DEFAULT_K_MAX))
    run = Run(cfg, "expand")
    exp = im.first_order_term(cfg.spec, cfg.kernel, F, k_max)
    rows = [(t.kind, t.k, t.l, t.coefficient, t.spectral_factor, t.geometric_factor, t.value)
            for t in exp.terms]
    run.table("expansion.csv", EXPANSION_HEADER, rows)
    print(f"first-order coefficient for F={F.name}: {exp.total:.12g} (tail bound {exp.tail_bound:.3g})")
    name = str(sec.get("test_function", "x^3")).strip()
    if name.startswith("x^") and int(name[2:]) >= 2:
        n = int(name[2:])
        ref = moment_mu_derivative(cfg.spec, cfg.kernel, n, 0.0).value
        run.add([check("expansion-vs-pair-reduction", f"n={n}", exp.total, ref,
                       1e-9 * max(1.0, abs(ref)))])
    return run.finish()


def cmd_verify(cfg: RunConfig, suites: Optional[List[str]] = None) -> int:
    run = Run(cfg, "verify")
    t0 = time.perf_counter()
    rows = run_suites(cfg, suites)
    run.add(rows)
    run.table("checks.csv", CHECK_HEADER, [r.as_tuple() for r in rows])
    print(f"verification finished in {time.perf_counter() - t0:.1f} s")
    return run.finish()


COMMANDS = {
    "spec-check": cmd_spec_check,
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "covariance": cmd_covariance,
    "scaling": cmd_scaling,
    "expand": cmd_expand,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="TOML run configuration")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key (dotted path)")
    common.add_argument("--out", help="output directory (same as --set output.directory=...)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="idmc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    pv = sub.add_parser("verify", parents=[common])
    pv.add_argument("suite", nargs="?", default=None,
                    choices=["invariance", "identities", "blemma", "expansion", "covariance", "all"])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    if args.out:
        overrides.append(f'output.directory="{args.out}"')
    try:
        cfg = RunConfig.load(args.config, overrides)
        if args.command == "verify":
            suites = None
            if args.suite:
                suites = cfg.suites if args.suite == "all" else [args.suite]
            return cmd_verify(cfg, suites)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
