"""Scene-level entry points: grid construction, default monitors, reference runs."""

from __future__ import annotations

import math

import numpy as np

from ..scene.geometry import SceneSpec
from ..scene.materials import AIR, constant_index
from ..scene.raster import Domain, MaterialGrid, build_domain, rasterize
from .monitors import BoxMonitorSpec
from .numerics import Numerics
from .solver import RunResult, Simulation, set_threads
from .source import DipoleSource, GaussianPulse

_REFERENCE_CACHE: dict = {}


def make_source(spec: SceneSpec, numerics: Numerics, amplitude: float = 1.0) -> DipoleSource:
    pulse = GaussianPulse.for_band(spec.center_wavelength_nm, numerics.band_nm, amplitude,
                                   numerics.source_bandwidth_factor)
    return DipoleSource(tuple(spec.dipole_position_nm), tuple(spec.dipole_orientation), pulse)


def box_wavelengths(numerics: Numerics) -> tuple[float, ...]:
    if numerics.monitor_wavelengths_nm is not None:
        return tuple(numerics.monitor_wavelengths_nm)
    lo, hi = numerics.band_nm
    step = max(numerics.sample_nm, 1.0)
    n = int(round((hi - lo) / step)) + 1
    return tuple(float(v) for v in np.linspace(lo, hi, n))


def box_bottom_nm(spec: SceneSpec, dx_nm: float) -> float:
    """First node plane strictly above the oxide (the box floor over a mirror)."""
    return (math.floor(spec.effective_oxide_nm / dx_nm + 1e-9) + 1) * dx_nm


def default_box(spec: SceneSpec, numerics: Numerics) -> BoxMonitorSpec:
    """Box of side ``monitor_box_side_nm`` around the wire.

    Over a mirror the box stands on the substrate with its floor open;
    otherwise it is closed and centred on the wire (or on the dipole when
    the box is shorter than the wire).
    """
    dx = numerics.resolution_nm
    half = 0.5 * numerics.monitor_box_side_nm
    h = numerics.box_height_nm
    if spec.mirror_enabled:
        z0 = box_bottom_nm(spec, dx)
        return BoxMonitorSpec((-half, -half, z0), (half, half, z0 + h), box_wavelengths(numerics),
                              open_faces=("z-",))
    zc = 0.5 * (spec.wire_base_nm + spec.wire_top_nm)
    return BoxMonitorSpec((-half, -half, zc - 0.5 * h), (half, half, zc + 0.5 * h),
                          box_wavelengths(numerics))


def scene_grid(spec: SceneSpec, numerics: Numerics, monitors=()) -> MaterialGrid:
    """Rasterize ``spec`` in a domain that also holds every box monitor."""
    half, top, bottom = 0.0, 0.0, 0.0
    for m in monitors:
        if isinstance(m, BoxMonitorSpec):
            half = max(half, *(abs(v) for v in m.lo_nm[:2]), *(abs(v) for v in m.hi_nm[:2]))
            top = max(top, m.hi_nm[2])
            bottom = max(bottom, -m.lo_nm[2])
    dom = build_domain(spec, numerics.resolution_nm, numerics.padding_nm,
                       absorber_layers=numerics.absorber_layers, symmetry=numerics.symmetry,
                       min_half_width_nm=half, min_top_nm=top, min_bottom_nm=bottom,
                       mirror_thickness_nm=numerics.mirror_thickness_nm)
    return rasterize(spec, domain=dom, supersample=numerics.supersample,
                     gold_band_nm=numerics.gold_band_nm)


def air_grid(domain: Domain, index: float = 1.0) -> MaterialGrid:
    """Homogeneous grid of refractive ``index`` (air by default)."""
    shape = domain.array_shape
    cells = tuple(domain.shape)
    mat = AIR if index == 1.0 else constant_index(index, "host")
    comp = {c: np.zeros(shape, dtype=np.int8) for c in ("ex", "ey", "ez")}
    inv = {c: np.full(shape, 1.0 / index**2) for c in ("ex", "ey", "ez")}
    return MaterialGrid(domain=domain, materials=[mat], cell_material=np.zeros(cells, np.int8),
                        component_material=comp, inv_eps=inv, scene=None)


def host_index(spec: SceneSpec) -> float:
    """Refractive index of the medium that embeds the dipole."""
    x, y, z = spec.dipole_position_nm
    inside = spec.contains_wire(np.array([x]), np.array([y]), np.array([z]))[0]
    return spec.nanowire_index if inside else 1.0


def reference_domain(position_nm, orientation, numerics: Numerics, half_extent_nm: float = 0.0,
                     symmetric: bool = True) -> Domain:
    """Air domain around ``position_nm`` whose nodes coincide with every scene grid.

    All scene domains put nodes on integer multiples of the cell size, so the
    dipole sits at the same sub-cell offset here as in the structure run.
    """
    dx = numerics.resolution_nm
    pad = numerics.padding_nm
    r = half_extent_nm + pad
    sym = {}
    if symmetric and numerics.symmetry:
        # same planes a scene would use for this dipole
        o = np.asarray(orientation, float)
        for a, ax in enumerate("xy"):
            if abs(position_nm[a]) > 1e-9:
                continue
            if abs(o[a]) > 1 - 1e-12:
                sym[ax] = "pec"
            elif abs(o[a]) < 1e-12 and max(abs(o[b]) for b in range(3) if b != a) > 1 - 1e-12:
                sym[ax] = "pmc"
    origin, shape, bounds = [], [], {}
    for a in range(3):
        lo = math.floor((position_nm[a] - r) / dx + 1e-9)
        hi = math.ceil((position_nm[a] + r) / dx - 1e-9)
        ax = "xyz"[a]
        if ax in sym:
            lo = 0
            bounds[ax + "-"] = sym[ax]
        origin.append(lo * dx)
        shape.append(hi - lo)
    return Domain(dx_nm=dx, shape=tuple(shape), origin_nm=tuple(origin), boundaries=bounds,
                  pml_layers=numerics.absorber_layers)


def _reference_key(source: DipoleSource, numerics: Numerics, index: float, monitors):
    dx = numerics.resolution_nm
    frac = tuple(round((p / dx) % 1.0, 9) for p in source.position_nm)
    on_axis = tuple(abs(p) < 1e-9 for p in source.position_nm[:2])
    num = numerics.replace(monitor_wavelengths_nm=None, farfield=False,
                           mirror_thickness_nm=0.0, gold_band_nm=(0.0, 1.0), gold_poles=0,
                           monitor_box_side_nm=0.0, monitor_box_height_nm=None, supersample=1)
    return (num.digest(), frac, on_axis, tuple(source.orientation), source.pulse, float(index),
            tuple(repr(m) for m in monitors))


def reference_run(source: DipoleSource, numerics: Numerics, index: float = 1.0, monitors=(),
                  cache: bool = True) -> RunResult:
    """Run the same dipole (same pulse, same sub-cell placement, same numerics)
    in a homogeneous medium of refractive ``index``; results are memoized."""
    key = _reference_key(source, numerics, index, monitors)
    if cache and key in _REFERENCE_CACHE:
        return _REFERENCE_CACHE[key]
    half = 0.0
    pos = source.position_nm
    for m in monitors:
        if isinstance(m, BoxMonitorSpec):
            half = max(half, *(abs(m.lo_nm[a] - pos[a]) for a in range(3)),
                       *(abs(m.hi_nm[a] - pos[a]) for a in range(3)))
    dom = reference_domain(pos, source.orientation, numerics, half)
    sim = Simulation(air_grid(dom, index), numerics, source, monitors)
    res = sim.run()
    res.metadata["reference_index"] = float(index)
    if cache:
        _REFERENCE_CACHE[key] = res
    return res


def vacuum_reference(source: DipoleSource, numerics: Numerics, monitors=(),
                     cache: bool = True) -> RunResult:
    return reference_run(source, numerics, 1.0, monitors, cache)


def scene_reference(spec: SceneSpec, numerics: Numerics, medium: str = "host") -> RunResult:
    """Normalization run for ``spec``: the dipole in bulk host material
    (``medium="host"``) or in vacuum (``medium="vacuum"``)."""
    if medium not in ("host", "vacuum"):
        raise ValueError("medium must be 'host' or 'vacuum'")
    index = host_index(spec) if medium == "host" else 1.0
    return reference_run(make_source(spec, numerics), numerics, index)


def run_scene(spec: SceneSpec, numerics: Numerics | None = None, monitors=None,
              threads: int | None = None, amplitude: float = 1.0, checkpoint_path=None,
              checkpoint_every: int = 0, resume_from=None, progress=None) -> RunResult:
    """Build, run and return one structure simulation.

    ``monitors=None`` selects the default box monitor when far-field output is
    enabled in ``numerics`` and no monitor otherwise.
    """
    numerics = numerics or Numerics()
    set_threads(threads)
    if monitors is None:
        monitors = [default_box(spec, numerics)] if numerics.farfield else []
    grid = scene_grid(spec, numerics, monitors)
    sim = Simulation(grid, numerics, make_source(spec, numerics, amplitude), monitors)
    if resume_from is not None:
        sim.resume(resume_from)
    return sim.run(checkpoint_path=checkpoint_path, checkpoint_every=checkpoint_every,
                   progress=progress)
