"""Parameter sweeps over the cavity geometry and their analysis."""

from .analysis import (AnticrossingReport, NoAnticrossingError, Ridge, ScalingFit, count_quasi_bic,
                       detect_avoided_crossing, fit_scaling, row_peaks, scaling_from_map, trace_ridges)
from .engine import apply_axis, fdtd_cell, sweep, sweep_height, sweep_scale, tolerance_sweep
from .maps import AXES, PurcellMap, read_map, write_map

__all__ = [
    "AXES", "AnticrossingReport", "NoAnticrossingError", "PurcellMap", "Ridge", "ScalingFit",
    "apply_axis", "count_quasi_bic", "detect_avoided_crossing", "fdtd_cell", "fit_scaling",
    "read_map", "row_peaks", "scaling_from_map", "sweep", "sweep_height", "sweep_scale",
    "tolerance_sweep", "trace_ridges", "write_map",
]
