from .geometry import GeometryError, SceneSpec, vacuum_scene
from .materials import (
    AIR, PEC, MaterialFitError, MaterialModel, OutOfBandError, constant_index,
    fit_metal_poles, gold_model, gold_table, permittivity_at,
)
from .raster import Domain, MaterialGrid, build_domain, rasterize, symmetry_for

__all__ = [
    "AIR", "PEC", "Domain", "GeometryError", "MaterialFitError", "MaterialGrid",
    "MaterialModel", "OutOfBandError", "SceneSpec", "build_domain", "constant_index",
    "fit_metal_poles", "gold_model", "gold_table", "permittivity_at", "rasterize",
    "symmetry_for", "vacuum_scene",
]
