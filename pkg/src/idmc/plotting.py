"""Figures rendered from the CSV tables written by ``idmc``.

The command line tool itself never plots; this module reads an output
directory and writes PNG files next to the tables::

    python -m idmc.plotting idmc-out

Requires matplotlib (``pip install artifact[plot]``).
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path
from typing import List, Optional

from .reports import read_csv


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _floats(rows, key):
    return [float(r[key]) for r in rows]


def plot_field(csv_path: Path, out: Path) -> Path:
    plt = _pyplot()
    rows = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    ax.plot(_floats(rows, "s"), _floats(rows, "omega"), lw=0.6)
    ax.set_xlabel("s")
    ax.set_ylabel(r"$\omega_\varepsilon(s)$")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_covariance(csv_path: Path, out: Path) -> Path:
    plt = _pyplot()
    rows = read_csv(csv_path)
    t = _floats(rows, "t")
    x = [-math.log(v) for v in t]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.errorbar(x, _floats(rows, "cov"), yerr=_floats(rows, "stderr"), fmt="o", ms=4,
                label="Monte Carlo")
    ax.plot(x, _floats(rows, "predicted"), "-", label="first-order prediction")
    ax.set_xlabel(r"$-\log t$")
    ax.set_ylabel("covariance of log masses")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_scaling(csv_path: Path, out: Path) -> Path:
    plt = _pyplot()
    rows = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.loglog(_floats(rows, "t"), _floats(rows, "moment"), "o-", ms=4)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$E[M(0,t)^n]$")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_moments(csv_path: Path, out: Path) -> Path:
    plt = _pyplot()
    rows = read_csv(csv_path)
    n = _floats(rows, "n")
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.plot(n, _floats(rows, "quad_value"), "s", mfc="none", label="quadrature")
    ax.errorbar(n, _floats(rows, "mc_mean"), yerr=[3 * s for s in _floats(rows, "mc_stderr")],
                fmt="o", ms=3, label="Monte Carlo (3 s.e.)")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$E[M^n]$")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_expansion(csv_path: Path, out: Path) -> Path:
    plt = _pyplot()
    rows = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    k = _floats(rows, "k")
    v = [abs(x) for x in _floats(rows, "value")]
    ax.semilogy(k, [x if x > 0 else float("nan") for x in v], "o")
    ax.set_xlabel("k")
    ax.set_ylabel("|term|")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


PLOTTERS = {
    "covariance.csv": plot_covariance,
    "scaling.csv": plot_scaling,
    "moments.csv": plot_moments,
    "expansion.csv": plot_expansion,
}


def render_directory(directory, max_fields: int = 4) -> List[Path]:
    """Render every known table in ``directory``; returns the written files."""
    directory = Path(directory)
    written = []
    for name, fn in PLOTTERS.items():
        path = directory / name
        if path.exists():
            written.append(fn(path, path.with_suffix(".png")))
    for path in sorted(directory.glob("field_*.csv"))[:max_fields]:
        written.append(plot_field(path, path.with_suffix(".png")))
    return written


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="python -m idmc.plotting")
    parser.add_argument("directory", help="output directory of an idmc run")
    args = parser.parse_args(argv)
    for path in render_directory(args.directory):
        print(path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
