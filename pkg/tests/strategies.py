"""Hypothesis strategies shared by the property tests."""

import math

from hypothesis import strategies as st

from idmc.idspec import LevySpec

atom_locations = st.floats(-1.5, 1.5).filter(lambda u: abs(u) > 1e-3)
atom_masses = st.floats(0.05, 3.0)


@st.composite
def levy_specs(draw, max_atoms=3, allow_gaussian=True):
    sigma2 = draw(st.floats(0.0, 2.0)) if allow_gaussian else 0.0
    atoms = draw(st.lists(st.tuples(atom_locations, atom_masses), max_size=max_atoms,
                          unique_by=lambda a: round(a[0], 6)))
    if sigma2 == 0.0 and not atoms:
        sigma2 = 1.0
    return LevySpec(sigma2=sigma2, atoms=tuple(atoms), label="drawn")


def small_mu(spec: LevySpec, cap: float = 0.3):
    """Intermittency values that keep the spec nondegenerate."""
    terms = 0.5 * spec.sigma2 + sum(m * (u * math.expm1(u) - (math.expm1(u) - u))
                                    for u, m in spec.atoms)
    hi = min(cap, 0.9 / terms) if terms > 0 else cap
    return st.floats(0.01, hi)
