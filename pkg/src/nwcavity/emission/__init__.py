"""Purcell spectra, far-field projection and collection figures."""

from .farfield import (FarField, angular_grid, extraction_efficiency, gaussian_overlap,
                       gaussian_reference, integrate, near_to_far, radiated_power, read_farfield,
                       recentred, write_farfield, write_polar_grid)
from .purcell import (BandEdgeError, Peak, PurcellSpectrum, find_peak_fwhm, purcell_spectrum,
                      read_purcell, write_purcell)

__all__ = [
    "BandEdgeError", "FarField", "Peak", "PurcellSpectrum", "angular_grid",
    "extraction_efficiency", "find_peak_fwhm", "gaussian_overlap", "gaussian_reference",
    "integrate", "near_to_far", "purcell_spectrum", "radiated_power", "read_farfield",
    "read_purcell", "recentred", "write_farfield", "write_polar_grid",
]
