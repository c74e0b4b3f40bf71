"""Physical constants shared across the simulator.

Values follow the rounded forms conventional in optical receiver noise
budgets rather than full CODATA precision, so that derived quantities
(thermal photoelectron variance, dark count rates) reproduce published
link-budget numbers digit for digit.
"""

ELEMENTARY_CHARGE = 1.602e-19
"""Electron charge q (C)."""

PLANCK = 6.626e-34
"""Planck constant h (J s)."""

BOLTZMANN = 1.381e-23
"""Boltzmann constant K_b (J/K)."""

SPEED_OF_LIGHT = 2.99792458e8
"""Vacuum speed of light (m/s)."""
