"""Infinitely divisible multiplicative chaos on the unit interval.

Field simulation on a grid, Monte Carlo moments and covariances, simplex
quadrature of integer moments, first-order intermittency expansions and
exact checks of the identities that connect them.
"""

__version__ = "0.1.0"

from .idspec import (ChaosParams, LevySpec, MomentClass, TestFunction, d_coeff,  # noqa: F401
                     moment_class, phi, spec_battery, zeta)
from .kernel import IntensityKernel, kernel_from_name  # noqa: F401
