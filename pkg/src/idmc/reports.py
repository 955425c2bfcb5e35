"""CSV tables and the JSON run summary."""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

CHECK_HEADER = ("check", "parameters", "lhs", "rhs", "residual", "tolerance", "pass")
MOMENT_HEADER = ("n", "mu", "spec", "kernel", "method", "value", "error", "evaluations")
MOMENT_COMPARE_HEADER = ("n", "mu", "spec", "kernel", "quad_value", "quad_error",
                         "mc_mean", "mc_stderr", "closed_form", "zscore", "agree")
COVARIANCE_HEADER = ("t", "tau", "cov", "stderr", "predicted")
SCALING_HEADER = ("t", "moment")
EXPANSION_HEADER = ("term_kind", "k", "l", "coefficient", "spectral_factor",
                    "geometric_factor", "value")
SPEC_CHECK_HEADER = ("n", "zeta", "class")


@dataclass
class CheckRow:
    """One verification result; ``passed`` is decided by the producer."""

    check: str
    parameters: str
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool

    def as_tuple(self):
        return (self.check, self.parameters, _num(self.lhs), _num(self.rhs),
                _num(self.residual), _num(self.tolerance), str(bool(self.passed)).lower())

    def as_dict(self):
        return dict(zip(CHECK_HEADER, self.as_tuple()))


def check(name: str, parameters: str, lhs: float, rhs: float, tolerance: float,
          residual: float = None) -> CheckRow:
    """Absolute-residual check; ``residual`` defaults to ``|lhs - rhs|``."""
    if residual is None:
        residual = abs(lhs - rhs)
    ok = bool(math.isfinite(residual) and residual <= tolerance)
    return CheckRow(name, parameters, float(lhs), float(rhs), float(residual),
                    float(tolerance), ok)


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_num(x) for x in row])
    return path


def read_csv(path: Path) -> List[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def versions() -> dict:
    import numpy
    import scipy

    from . import __version__

    return {"idmc": __version__, "python": platform.python_version(),
            "numpy": numpy.__version__, "scipy": scipy.__version__}


@dataclass
class Summary:
    config: dict
    checks: List[CheckRow] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def write(self, directory: Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "summary.json"
        payload = {
            "config": self.config,
            "checks": [c.as_dict() for c in self.checks],
            "artifacts": list(self.artifacts),
            "versions": versions(),
        }
        path.write_text(json.dumps(payload, indent=2, default=str) + "\n")
        return path
