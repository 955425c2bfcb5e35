"""Run configuration: TOML file, defaults and dotted-path overrides."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

import tomli_w

from .idspec import ChaosParams, LevySpec, spec_from_mapping, tomllib
from .kernel import IntensityKernel, kernel_from_name

SUITES = ("invariance", "identities", "blemma", "expansion", "covariance")

DEFAULTS: dict = {
    "model": {"sigma2": 1.0, "atoms": [], "mu": 0.1, "label": "lognormal"},
    "kernel": {"type": "bacry-muzy"},
    "sim": {
        "epsilon": 2.0 ** -10,
        "grid_points": 4097,
        "n_samples": 10000,
        "seed": 0,
        "workers": 1,
        "allow_coarse_grid": False,
    },
    "moments": {"n_list": [2, 3], "method": "TensorGauss", "estimator": "size_biased",
                "n_sigma": 3.0},
    "covariance": {"t_list": [0.1, 0.2, 0.3, 0.4, 0.5], "tau": 0.01, "n_samples": 20000,
                   "rel_tol": 0.2},
    "scaling": {"n": 2, "scales": [0.0625, 0.125, 0.25, 0.5], "estimator": "size_biased"},
    "expansion": {"k_max": 12, "test_function": "x^3"},
    "simulate": {"n_fields": 1},
    "spec_check": {"n_max": 8},
    "verify": {"suites": ["all"]},
    "output": {"directory": "idmc-out", "formats": ["csv", "json"]},
}


class ConfigError(ValueError):
    """Invalid configuration or model specification (CLI exit code 2)."""


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_value(text: str) -> Any:
    """TOML scalar or array literal; bare words fall back to strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(data: dict, assignment: str) -> None:
    """Apply ``section.key=value`` in place."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    path, text = assignment.split("=", 1)
    keys = [k.strip() for k in path.strip().split(".") if k.strip()]
    if not keys:
        raise ConfigError(f"override {assignment!r} has an empty key")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {path!r} runs through a non-table value")
    node[keys[-1]] = parse_value(text.strip())


@dataclass
class RunConfig:
    data: dict

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Iterable[str] = ()) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                text = Path(path).read_text()
                data = _merge(data, tomllib.loads(text))
            except (OSError, tomllib.TOMLDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for item in overrides:
            apply_override(data, item)
        cfg = cls(data)
        cfg.validate()
        return cfg

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    # -- typed views ----------------------------------------------------------
    @property
    def spec(self) -> LevySpec:
        try:
            return spec_from_mapping(self.data["model"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model: {exc}") from exc

    @property
    def mu(self) -> float:
        return float(self.data["model"]["mu"])

    @property
    def params(self) -> ChaosParams:
        try:
            return ChaosParams(self.mu, float(self.data["sim"]["epsilon"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def kernel(self) -> IntensityKernel:
        try:
            return kernel_from_name(str(self.data["kernel"]["type"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def sim(self) -> dict:
        return self.data["sim"]

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output"]["directory"])

    @property
    def suites(self) -> list:
        chosen = list(self.data["verify"]["suites"])
        return list(SUITES) if "all" in chosen else chosen

    def validate(self) -> None:
        self.spec
        self.params
        self.kernel
        sim = self.sim
        if int(sim["n_samples"]) < 2:
            raise ConfigError("sim.n_samples must be >= 2")
        if int(sim["workers"]) < 1:
            raise ConfigError("sim.workers must be >= 1")
        spacing = 1.0 / (int(sim["grid_points"]) - 1)
        if spacing > float(sim["epsilon"]) / 4 * (1 + 1e-12) and not sim["allow_coarse_grid"]:
            raise ConfigError(f"grid spacing {spacing:.3g} exceeds epsilon/4; raise "
                              "sim.grid_points or set sim.allow_coarse_grid = true")
        unknown = [s for s in self.data["verify"]["suites"] if s not in SUITES + ("all",)]
        if unknown:
            raise ConfigError(f"unknown verification suites {unknown}; known: {SUITES}")

    def require_nondegenerate(self) -> None:
        try:
            self.params.require_nondegenerate(self.spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_toml(self) -> str:
        return tomli_w.dumps(self.data)
