"""Rasterization of a :class:`SceneSpec` onto a uniform Yee grid.

Grid conventions
----------------
Nodes sit at ``x_i = origin_x + i * dx`` (likewise y, z).  Field components
follow the usual Yee staggering::

    Ex (i+1/2, j, k)   Ey (i, j+1/2, k)   Ez (i, j, k+1/2)
    Hx (i, j+1/2, k+1/2)   Hy (i+1/2, j, k+1/2)   Hz (i+1/2, j+1/2, k)

All six arrays are allocated with shape ``(nx+1, ny+1, nz+1)``; entries that
fall outside the domain are never touched.  The mirror surface (``z = 0``)
lies on a node plane so that a perfect-conductor mirror zeroes tangential E
exactly at the surface.

A lower face can be a mirror-symmetry plane through the dipole.  ``"pec"``
means tangential E is odd across the plane (it vanishes there); ``"pmc"``
means tangential H is odd.  Upper faces are absorbers backed by a perfect
conductor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError, SceneSpec
from .materials import AIR, PEC, MaterialModel, constant_index, gold_model, warn_if_coarse

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
COMPONENT_OFFSETS = {
    "ex": (0.5, 0.0, 0.0), "ey": (0.0, 0.5, 0.0), "ez": (0.0, 0.0, 0.5),
    "hx": (0.0, 0.5, 0.5), "hy": (0.5, 0.0, 0.5), "hz": (0.5, 0.5, 0.0),
}

AIR_ID, WIRE_ID, OXIDE_ID, MIRROR_ID = 0, 1, 2, 3


@dataclass(frozen=True)
class Domain:
    dx_nm: float
    shape: tuple[int, int, int]  # number of cells (nx, ny, nz)
    origin_nm: tuple[float, float, float]  # coordinates of node (0, 0, 0)
    boundaries: dict = field(default_factory=dict)  # face -> pml | pec | pmc
    pml_layers: int = 12

    def __post_init__(self):
        b = {f: "pml" for f in FACES}
        b.update(self.boundaries)
        for f, kind in b.items():
            if f not in FACES or kind not in ("pml", "pec", "pmc"):
                raise ValueError(f"bad boundary {f}={kind}")
        object.__setattr__(self, "boundaries", b)

    @property
    def array_shape(self) -> tuple[int, int, int]:
        return tuple(n + 1 for n in self.shape)

    def coords(self, axis: int, offset: float = 0.0) -> np.ndarray:
        n = self.shape[axis] + 1
        return self.origin_nm[axis] + (np.arange(n) + offset) * self.dx_nm

    def component_coords(self, comp: str):
        off = COMPONENT_OFFSETS[comp]
        return tuple(self.coords(a, off[a]) for a in range(3))

    def pml_cells(self, face: str) -> int:
        return self.pml_layers if self.boundaries[face] == "pml" else 0

    def interior_slices(self):
        """Index ranges (per axis) of nodes outside every absorber layer."""
        out = []
        for a, ax in enumerate("xyz"):
            lo = self.pml_cells(ax + "-")
            hi = self.shape[a] - self.pml_cells(ax + "+")
            out.append((lo, hi))
        return out

    def node_index(self, axis: int, coord_nm: float) -> float:
        return (coord_nm - self.origin_nm[axis]) / self.dx_nm

    def signature(self) -> dict:
        return {"dx_nm": self.dx_nm, "shape": list(self.shape), "origin_nm": list(self.origin_nm),
                "boundaries": dict(self.boundaries), "pml_layers": self.pml_layers}


@dataclass
class MaterialGrid:
    """Material assignment on the Yee grid.

    ``cell_material`` holds the material id at every cell centre;
    ``component_material[c]`` and ``inv_eps[c]`` hold the material id and the
    (sub-cell averaged) inverse high-frequency permittivity at each E
    component ``c`` in ``("ex", "ey", "ez")``.  ``inv_eps`` is zero inside a
    perfect conductor.
    """

    domain: Domain
    materials: list[MaterialModel]
    cell_material: np.ndarray
    component_material: dict
    inv_eps: dict
    scene: SceneSpec | None = None

    def count(self, material_id: int) -> int:
        return int(np.count_nonzero(self.cell_material == material_id))

    def material_names(self) -> list[str]:
        return [m.name for m in self.materials]


def scene_materials(spec: SceneSpec, gold_band_nm=(800.0, 1000.0)) -> list[MaterialModel]:
    mats = [AIR, constant_index(spec.nanowire_index, "nanowire"), constant_index(spec.oxide_index, "oxide")]
    if spec.mirror_kind == "pec":
        mats.append(PEC)
    else:
        mats.append(gold_model(tuple(gold_band_nm)))
    return mats


def symmetry_for(spec: SceneSpec) -> dict:
    """Mirror planes through the dipole compatible with its orientation.

    Returns a mapping ``{"x": kind, "y": kind}`` for each usable plane, with
    kind ``"pec"`` when the dipole lies along the plane normal and ``"pmc"``
    when it is perpendicular to it.
    """
    o = np.asarray(spec.dipole_orientation)
    pos = spec.dipole_position_nm
    out = {}
    for a, ax in enumerate("xy"):
        if abs(pos[a]) > 1e-9:
            continue
        others = [o[b] for b in range(3) if b != a]
        if abs(o[a]) > 1 - 1e-12:
            out[ax] = "pec"
        elif abs(o[a]) < 1e-12 and sum(abs(v) for v in others) > 0:
            # the dipole must also be axis-aligned for the other plane to apply
            if max(abs(v) for v in others) > 1 - 1e-12:
                out[ax] = "pmc"
    return out


def build_domain(spec: SceneSpec, resolution_nm: float, domain_padding_nm: float,
                 absorber_layers: int = 12, symmetry: bool = True,
                 min_half_width_nm: float = 0.0, min_top_nm: float = 0.0,
                 min_bottom_nm: float = 0.0, mirror_thickness_nm: float = 100.0) -> Domain:
    """Choose a domain that encloses the scene with ``domain_padding_nm`` of room.

    The padding is measured from the structure (or the ``min_*`` extents,
    whichever is larger) to the outer domain edge and includes the absorber.
    """
    dx = float(resolution_nm)
    if dx <= 0:
        raise GeometryError("resolution must be positive")
    if domain_padding_nm < (absorber_layers + 2) * dx:
        raise GeometryError(
            f"padding {domain_padding_nm} nm is thinner than the absorber plus two cells "
            f"({(absorber_layers + 2) * dx} nm)")
    half = max(spec.circumradius_nm, min_half_width_nm)
    n_half = int(math.ceil((half + domain_padding_nm) / dx - 1e-9))
    top = max(spec.wire_top_nm, min_top_nm)
    nz_top = int(math.ceil((top + domain_padding_nm) / dx - 1e-9))

    boundaries = {}
    sym = symmetry_for(spec) if symmetry else {}
    origin = []
    shape = []
    for ax in "xy":
        if ax in sym:
            boundaries[ax + "-"] = sym[ax]
            origin.append(0.0)
            shape.append(n_half)
        else:
            origin.append(-n_half * dx)
            shape.append(2 * n_half)
    if spec.mirror_enabled:
        t = dx if spec.mirror_kind == "pec" else max(mirror_thickness_nm, dx)
        nz_bot = int(math.ceil(t / dx - 1e-9))
        boundaries["z-"] = "pec"
    else:
        bottom = max(domain_padding_nm, min_bottom_nm + domain_padding_nm)
        nz_bot = int(math.ceil(bottom / dx - 1e-9))
    origin.append(-nz_bot * dx)
    shape.append(nz_bot + nz_top)
    return Domain(dx_nm=dx, shape=tuple(shape), origin_nm=tuple(origin),
                  boundaries=boundaries, pml_layers=absorber_layers)


def _material_ids_at(spec: SceneSpec, x: np.ndarray, y: np.ndarray, z: float) -> np.ndarray:
    """Material id at all (x, y) for a single height z."""
    ids = np.zeros(np.broadcast(x, y).shape, dtype=np.int8)
    if spec.mirror_enabled:
        if z <= 0.0:
            ids[...] = MIRROR_ID
            return ids
        if z <= spec.oxide_thickness_nm:
            ids[...] = OXIDE_ID
    inside = spec.contains_wire(x, y, np.full(ids.shape, z))
    ids[inside] = WIRE_ID
    return ids


def rasterize(spec: SceneSpec, resolution_nm: float = 10.0, domain_padding_nm: float = 500.0,
              domain: Domain | None = None, supersample: int = 2,
              gold_band_nm=(800.0, 1000.0), **domain_kw) -> MaterialGrid:
    """Assign materials to cells and to every E-field component location.

    Cell materials use centre containment.  E components take the material
    at their own location; for non-metal locations the permittivity is the
    volume-fraction average over ``supersample**3`` points of the dual cell,
    which renders layers thinner than a cell (the oxide buffer) with partial
    weight.
    """
    if domain is None:
        domain = build_domain(spec, resolution_nm, domain_padding_nm, **domain_kw)
    dx = domain.dx_nm
    warn_if_coarse(spec.effective_oxide_nm, dx)
    mats = scene_materials(spec, gold_band_nm)
    eps_inf = np.array([m.epsilon_infinity for m in mats])
    metal = np.array([m.is_pec or m.dispersive for m in mats])

    nx, ny, nz = domain.shape
    xc = domain.coords(0, 0.5)[:nx]
    yc = domain.coords(1, 0.5)[:ny]
    zc = domain.coords(2, 0.5)[:nz]
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    cell = np.empty((nx, ny, nz), dtype=np.int8)
    for k, z in enumerate(zc):
        cell[:, :, k] = _material_ids_at(spec, X, Y, z)

    offs = ((np.arange(supersample) + 0.5) / supersample - 0.5) * dx
    # finer z samples where a dual cell overlaps the oxide, so that a layer
    # thinner than the cell is always seen
    t_ox = spec.effective_oxide_nm
    n_fine = max(supersample, int(math.ceil(4.0 * dx / t_ox))) if t_ox > 0 else supersample
    offs_fine = ((np.arange(n_fine) + 0.5) / n_fine - 0.5) * dx
    comp_mat, inv_eps = {}, {}
    for comp in ("ex", "ey", "ez"):
        cx, cy, cz = domain.component_coords(comp)
        CX, CY = np.meshgrid(cx, cy, indexing="ij")
        ids = np.empty(domain.array_shape, dtype=np.int8)
        inv = np.empty(domain.array_shape, dtype=np.float64)
        sub_xy = [(CX + ox, CY + oy) for ox in offs for oy in offs]
        for k, z in enumerate(cz):
            centre = _material_ids_at(spec, CX, CY, z)
            ids[:, :, k] = centre
            acc = np.zeros(CX.shape)
            zoffs = offs_fine if (t_ox > 0 and z - 0.5 * dx < t_ox and z + 0.5 * dx > 0.0) else offs
            for oz in zoffs:
                for sx, sy in sub_xy:
                    sid = _material_ids_at(spec, sx, sy, z + oz)
                    sid = np.where(metal[sid], centre, sid)
                    acc += eps_inf[sid]
            eps_avg = acc / (len(sub_xy) * len(zoffs))
            eps_here = np.where(metal[centre], eps_inf[centre], eps_avg)
            inv[:, :, k] = 1.0 / eps_here
            inv[:, :, k][np.array([m.is_pec for m in mats])[centre]] = 0.0
        comp_mat[comp] = ids
        inv_eps[comp] = inv
    return MaterialGrid(domain=domain, materials=mats, cell_material=cell,
                        component_material=comp_mat, inv_eps=inv_eps, scene=spec)
