"""Guided modes of the circular-equivalent nanowire waveguide."""

from .dispersion import ModeDispersion, dispersion_sweep, read_dispersion, write_dispersion
from .solver import (CoupledMode, GuidedMode, GuideSpec, all_modes, characteristic,
                     characteristic_roots, dipole_coupled_modes, hexagon_equivalent_diameter,
                     lp_scalar_roots, residual)

__all__ = [
    "CoupledMode", "GuidedMode", "GuideSpec", "ModeDispersion", "all_modes", "characteristic",
    "characteristic_roots", "dipole_coupled_modes", "dispersion_sweep",
    "hexagon_equivalent_diameter", "lp_scalar_roots", "read_dispersion", "residual",
    "write_dispersion",
]
