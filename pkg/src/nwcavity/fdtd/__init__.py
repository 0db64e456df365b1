"""Yee-grid time-domain solver, monitors and the scene runners."""

from .monitors import BoxData, BoxMonitorSpec, PlaneData, PlaneMonitorSpec, PointMonitorSpec
from .numerics import Numerics, stable_dt
from .runner import (default_box, make_source, reference_run, run_scene, scene_grid,
                     scene_reference, vacuum_reference)
from .solver import CheckpointError, FieldDivergence, RunResult, Simulation, set_threads
from .source import DipoleSource, GaussianPulse

__all__ = [
    "BoxData", "BoxMonitorSpec", "CheckpointError", "DipoleSource", "FieldDivergence",
    "GaussianPulse", "Numerics", "PlaneData", "PlaneMonitorSpec", "PointMonitorSpec", "RunResult",
    "Simulation", "default_box", "make_source", "reference_run", "run_scene", "scene_grid",
    "scene_reference", "set_threads", "stable_dt", "vacuum_reference",
]
