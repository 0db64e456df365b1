"""Frequency-domain monitors: running DFTs of the time-domain fields.

Phasors follow ``F(w) = sum_n f(t_n) exp(i w t_n) dt_sample`` with each
component stamped at its own time (E at integer steps, H at half steps).
Everything here is linear in the fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..constants import omega_from_nm
from ..scene.raster import AIR_ID
from . import kernels
from .source import edge_stencil

E_NAMES = ("ex", "ey", "ez")
H_NAMES = ("hx", "hy", "hz")


# ----------------------------------------------------------------------
# requests (what the user asks for)

@dataclass(frozen=True)
class BoxMonitorSpec:
    """Closed (or open-faced) box of tangential-field DFTs.

    Bounds are snapped outward to node planes.  ``open_faces`` lists faces
    (``"z-"`` etc.) that record nothing.  ``stride`` groups ``stride`` x
    ``stride`` face cells into one averaged sample (0 picks ~lambda/20).
    """

    lo_nm: tuple[float, float, float]
    hi_nm: tuple[float, float, float]
    wavelengths_nm: tuple[float, ...]
    open_faces: tuple[str, ...] = ()
    stride: int = 0
    name: str = "box"


@dataclass(frozen=True)
class PlaneMonitorSpec:
    axis: int
    position_nm: float
    wavelengths_nm: tuple[float, ...]
    stride: int = 1
    name: str = "plane"


@dataclass(frozen=True)
class PointMonitorSpec:
    position_nm: tuple[float, float, float]
    wavelengths_nm: tuple[float, ...]
    name: str = "point"


def spec_to_dict(m) -> dict:
    kind = {BoxMonitorSpec: "box", PlaneMonitorSpec: "plane", PointMonitorSpec: "point"}[type(m)]
    d = {"kind": kind}
    for k, v in m.__dict__.items():
        d[k] = list(v) if isinstance(v, tuple) else v
    return d


# ----------------------------------------------------------------------
# helpers

def _axis_take(arr, axis, kind, start, count):
    """Slice ``count`` samples along ``axis`` at padded offset ``start``.

    ``kind`` is ``"one"`` (the entry itself) or ``"avg"`` (mean of the entry
    and the next one).
    """
    sl = [slice(None)] * arr.ndim
    sl[axis] = slice(start, start + count)
    a = arr[tuple(sl)]
    if kind == "avg":
        sl[axis] = slice(start + 1, start + 1 + count)
        a = 0.5 * (a + arr[tuple(sl)])
    return a


def _block_mean(a: np.ndarray, axis: int, s: int) -> np.ndarray:
    if s == 1:
        return a
    n = a.shape[axis]
    starts = np.arange(0, n, s)
    sums = np.add.reduceat(a, starts, axis=axis)
    counts = np.diff(np.append(starts, n)).astype(float)
    shape = [1] * a.ndim
    shape[axis] = len(counts)
    return sums / counts.reshape(shape)


def _block_centres(first: float, n: int, s: int, dx: float):
    starts = np.arange(0, n, s)
    counts = np.diff(np.append(starts, n))
    centres = first + (starts + 0.5 * counts) * dx
    return centres, counts * dx


# ----------------------------------------------------------------------
# live monitors

@dataclass
class Face:
    """One monitor face: normal axis ``c``, side ``+1``/``-1``, sample grid.

    Tangential axes are ``a = (c+1) % 3`` and ``b = (c+2) % 3`` so that
    ``(a, b, c)`` is right-handed.  ``e``/``h`` hold phasor accumulators of
    shape ``(2, n_freq, n_samples)`` for the (a, b) components.
    """

    name: str
    axis: int
    side: int
    plane_nm: float
    u_nm: np.ndarray  # sample coordinates along a
    v_nm: np.ndarray  # along b
    du_nm: np.ndarray
    dv_nm: np.ndarray
    k_plane: int  # padded index of the node plane
    a0: int  # first cell (node index) along a
    b0: int
    na: int
    nb: int
    stride: int
    in_air: bool
    e: np.ndarray = field(repr=False, default=None)
    h: np.ndarray = field(repr=False, default=None)

    @property
    def tangential(self):
        return (self.axis + 1) % 3, (self.axis + 2) % 3

    def positions(self):
        """Sample positions (n, 3) in nm, flattened in (a, b) C order."""
        a, b = self.tangential
        U, V = np.meshgrid(self.u_nm, self.v_nm, indexing="ij")
        out = np.empty(U.shape + (3,))
        out[..., a] = U
        out[..., b] = V
        out[..., self.axis] = self.plane_nm
        return out.reshape(-1, 3)

    def areas(self):
        return np.outer(self.du_nm, self.dv_nm).ravel()

    def _sample(self, arr, comp_axis, is_e):
        """Tangential component ``comp_axis`` co-located at face-cell centres."""
        a, b = self.tangential
        c = self.axis
        out = arr
        # order of slicing does not matter: every axis is independent
        specs = {}
        for ax, start, count in ((a, self.a0, self.na), (b, self.b0, self.nb)):
            half = (ax == comp_axis) if is_e else (ax != comp_axis)
            # cell centre i+1/2 is a half entry at padded i+1, or the mean of nodes i, i+1
            specs[ax] = ("one", start + 1, count) if half else ("avg", start + 1, count)
        if is_e:
            specs[c] = ("one", self.k_plane, 1)
        else:
            specs[c] = ("avg", self.k_plane - 1, 1)
        for ax in (0, 1, 2):
            kind, start, count = specs[ax]
            out = _axis_take(out, ax, kind, start, count)
        out = np.squeeze(out, axis=c)
        # remaining axes are in increasing order; put them in (a, b) order
        if a > b:
            out = out.T
        out = _block_mean(_block_mean(out, 0, self.stride), 1, self.stride)
        return np.ascontiguousarray(out).ravel()

    def accumulate_e(self, fields, ph):
        a, b = self.tangential
        for slot, comp in enumerate((a, b)):
            kernels.dft_accumulate(self.e[slot], ph, self._sample(fields[comp], comp, True))

    def accumulate_h(self, fields, ph):
        a, b = self.tangential
        for slot, comp in enumerate((a, b)):
            kernels.dft_accumulate(self.h[slot], ph, self._sample(fields[3 + comp], comp, False))

    def flux(self):
        """Outward time-averaged power per sample, shape (n_freq, n)."""
        ea, eb = self.e
        ha, hb = self.h
        s = 0.5 * np.real(ea * np.conj(hb) - eb * np.conj(ha))
        return self.side * s * self.areas()[None, :] * 1e-18


class BoxMonitor:
    def __init__(self, spec: BoxMonitorSpec, domain, grid=None, symmetric_axes=()):
        self.spec = spec
        self.name = spec.name
        self.wavelengths_nm = np.asarray(spec.wavelengths_nm, dtype=float)
        self.omega = omega_from_nm(self.wavelengths_nm)
        self.symmetric_axes = tuple(symmetric_axes)
        dx = domain.dx_nm
        lo = [int(math.floor(domain.node_index(a, spec.lo_nm[a]) + 1e-9)) for a in range(3)]
        hi = [int(math.ceil(domain.node_index(a, spec.hi_nm[a]) - 1e-9)) for a in range(3)]
        for a in self.symmetric_axes:
            lo[a] = max(lo[a], 0)
        interior = domain.interior_slices()
        for a in range(3):
            lo_ok = (a in self.symmetric_axes and lo[a] == 0) or lo[a] > interior[a][0]
            if not lo_ok or hi[a] >= interior[a][1]:
                raise ValueError(f"monitor {spec.name!r} reaches into the absorber along axis {'xyz'[a]}")
        self.lo_idx, self.hi_idx = lo, hi
        self.lo_nm = tuple(domain.origin_nm[a] + lo[a] * dx for a in range(3))
        self.hi_nm = tuple(domain.origin_nm[a] + hi[a] * dx for a in range(3))
        stride = spec.stride or max(1, int(self.wavelengths_nm.min() / (20.0 * dx)))
        self.stride = stride
        nf = len(self.wavelengths_nm)
        self.faces: list[Face] = []
        for c in range(3):
            for side, tag in ((-1, "-"), (1, "+")):
                fname = "xyz"[c] + tag
                if fname in spec.open_faces:
                    continue
                if side < 0 and c in self.symmetric_axes and lo[c] == 0:
                    continue  # the symmetry plane itself
                k = lo[c] if side < 0 else hi[c]
                a, b = (c + 1) % 3, (c + 2) % 3
                na, nb = hi[a] - lo[a], hi[b] - lo[b]
                u, du = _block_centres(domain.origin_nm[a] + lo[a] * dx, na, stride, dx)
                v, dv = _block_centres(domain.origin_nm[b] + lo[b] * dx, nb, stride, dx)
                face = Face(name=fname, axis=c, side=side, plane_nm=domain.origin_nm[c] + k * dx,
                            u_nm=u, v_nm=v, du_nm=du, dv_nm=dv, k_plane=k + 1, a0=lo[a], b0=lo[b],
                            na=na, nb=nb, stride=stride, in_air=True)
                n = len(u) * len(v)
                face.e = np.zeros((2, nf, n), dtype=np.complex128)
                face.h = np.zeros((2, nf, n), dtype=np.complex128)
                if grid is not None:
                    face.in_air = self._face_in_air(grid, face)
                self.faces.append(face)

    @staticmethod
    def _face_in_air(grid, face) -> bool:
        a, b = face.tangential
        c = face.axis
        k = face.k_plane - 1
        for comp in (a, b):
            ids = grid.component_material[E_NAMES[comp]]
            sl = [slice(None)] * 3
            sl[c] = k
            sl[a] = slice(face.a0, face.a0 + face.na + 1)
            sl[b] = slice(face.b0, face.b0 + face.nb + 1)
            if np.any(ids[tuple(sl)] != AIR_ID):
                return False
        return True

    @property
    def in_air(self) -> bool:
        return all(f.in_air for f in self.faces)

    def accumulate_e(self, fields, t, weight):
        ph = np.exp(1j * self.omega * t) * weight
        for f in self.faces:
            f.accumulate_e(fields, ph)

    def accumulate_h(self, fields, t, weight):
        ph = np.exp(1j * self.omega * t) * weight
        for f in self.faces:
            f.accumulate_h(fields, ph)

    def flux(self, z_above_nm: float | None = None) -> np.ndarray:
        """Outward power per wavelength through the full (mirror-completed) box."""
        total = np.zeros(len(self.omega))
        images = 2 ** len(self.symmetric_axes)
        for f in self.faces:
            s = f.flux()
            if z_above_nm is not None:
                keep = f.positions()[:, 2] > z_above_nm
                s = s[:, keep]
            total += images * s.sum(axis=1)
        return total

    def state(self) -> dict:
        out = {}
        for i, f in enumerate(self.faces):
            out[f"{self.name}.{i}.e"] = f.e
            out[f"{self.name}.{i}.h"] = f.h
        return out

    def load_state(self, d: dict):
        for i, f in enumerate(self.faces):
            f.e[...] = d[f"{self.name}.{i}.e"]
            f.h[...] = d[f"{self.name}.{i}.h"]

    def data(self) -> "BoxData":
        return BoxData(name=self.name, wavelengths_nm=self.wavelengths_nm.copy(),
                       faces=[_freeze_face(f) for f in self.faces],
                       symmetry=dict(self._symmetry_kinds), lo_nm=self.lo_nm, hi_nm=self.hi_nm,
                       open_faces=tuple(self.spec.open_faces))

    _symmetry_kinds: dict = {}


def _freeze_face(f: Face) -> Face:
    g = Face(**{k: v for k, v in f.__dict__.items()})
    g.e = f.e.copy()
    g.h = f.h.copy()
    return g


@dataclass
class BoxData:
    """Accumulated box phasors plus what is needed to complete them by symmetry.

    ``symmetry`` maps an axis letter to ``"pec"`` or ``"pmc"`` for each mirror
    plane that was used to shrink the domain.
    """

    name: str
    wavelengths_nm: np.ndarray
    faces: list
    symmetry: dict
    lo_nm: tuple
    hi_nm: tuple
    open_faces: tuple

    @property
    def in_air(self) -> bool:
        return all(f.in_air for f in self.faces)

    def flux(self, z_above_nm: float | None = None) -> np.ndarray:
        total = np.zeros(len(self.wavelengths_nm))
        images = 2 ** len(self.symmetry)
        for f in self.faces:
            s = f.flux()
            if z_above_nm is not None:
                s = s[:, f.positions()[:, 2] > z_above_nm]
            total += images * s.sum(axis=1)
        return total

    def scaled(self, alpha: float) -> "BoxData":
        faces = []
        for f in self.faces:
            g = _freeze_face(f)
            g.e *= alpha
            g.h *= alpha
            faces.append(g)
        return BoxData(self.name, self.wavelengths_nm, faces, self.symmetry, self.lo_nm,
                       self.hi_nm, self.open_faces)


class PlaneMonitor:
    """All three E components co-located at the nodes of one grid plane."""

    def __init__(self, spec: PlaneMonitorSpec, domain):
        self.spec = spec
        self.name = spec.name
        self.wavelengths_nm = np.asarray(spec.wavelengths_nm, dtype=float)
        self.omega = omega_from_nm(self.wavelengths_nm)
        self.axis = spec.axis
        k = int(round(domain.node_index(spec.axis, spec.position_nm)))
        if not 0 <= k <= domain.shape[spec.axis]:
            raise ValueError(f"plane monitor {spec.name!r} lies outside the domain")
        self.k = k
        self.position_nm = domain.origin_nm[spec.axis] + k * domain.dx_nm
        s = max(1, int(spec.stride))
        self.stride = s
        others = [a for a in range(3) if a != spec.axis]
        self.coords_nm = [domain.coords(a)[::s] for a in others]
        self.others = others
        n = len(self.coords_nm[0]) * len(self.coords_nm[1])
        self.acc = np.zeros((3, len(self.omega), n), dtype=np.complex128)

    def _sample(self, arr, comp):
        sl = []
        for a in range(3):
            if a == self.axis:
                idx = self.k + 1
                sl.append(slice(idx - 1, idx + 1) if a == comp else slice(idx, idx + 1))
            else:
                sl.append(slice(0, arr.shape[a]) if a == comp else slice(1, arr.shape[a]))
        a = arr[tuple(sl)]
        # node value of a half-staggered component = mean of its two neighbours
        a = 0.5 * (a[tuple(slice(0, -1) if ax == comp else slice(None) for ax in range(3))]
                   + a[tuple(slice(1, None) if ax == comp else slice(None) for ax in range(3))])
        a = np.squeeze(a, axis=self.axis)
        return np.ascontiguousarray(a[::self.stride, ::self.stride]).ravel()

    def accumulate_e(self, fields, t, weight):
        ph = np.exp(1j * self.omega * t) * weight
        for comp in range(3):
            kernels.dft_accumulate(self.acc[comp], ph, self._sample(fields[comp], comp))

    def accumulate_h(self, fields, t, weight):
        pass

    def state(self):
        return {f"{self.name}.acc": self.acc}

    def load_state(self, d):
        self.acc[...] = d[f"{self.name}.acc"]

    def data(self) -> "PlaneData":
        shape = (len(self.coords_nm[0]), len(self.coords_nm[1]))
        return PlaneData(name=self.name, axis=self.axis, position_nm=self.position_nm,
                         wavelengths_nm=self.wavelengths_nm.copy(),
                         u_nm=self.coords_nm[0], v_nm=self.coords_nm[1],
                         e=self.acc.reshape((3, len(self.omega)) + shape).copy())


@dataclass
class PlaneData:
    """E phasors on a plane; ``e[comp, freq, iu, iv]`` over ``u_nm`` x ``v_nm``."""

    name: str
    axis: int
    position_nm: float
    wavelengths_nm: np.ndarray
    u_nm: np.ndarray
    v_nm: np.ndarray
    e: np.ndarray

    def magnitude(self, wavelength_nm: float) -> np.ndarray:
        q = int(np.argmin(np.abs(self.wavelengths_nm - wavelength_nm)))
        return np.sqrt(np.sum(np.abs(self.e[:, q]) ** 2, axis=0))


class PointMonitor:
    """E phasors at a single point (trilinear interpolation of each component)."""

    def __init__(self, spec: PointMonitorSpec, domain):
        self.spec = spec
        self.name = spec.name
        self.wavelengths_nm = np.asarray(spec.wavelengths_nm, dtype=float)
        self.omega = omega_from_nm(self.wavelengths_nm)
        self.stencils = [edge_stencil(domain, c, spec.position_nm) for c in range(3)]
        self.acc = np.zeros((3, len(self.omega)), dtype=np.complex128)

    def accumulate_e(self, fields, t, weight):
        ph = np.exp(1j * self.omega * t) * weight
        for c, st in enumerate(self.stencils):
            v = kernels.gather(fields[c].reshape(-1), st.index, st.weight)
            self.acc[c] += ph * v

    def accumulate_h(self, fields, t, weight):
        pass

    def state(self):
        return {f"{self.name}.acc": self.acc}

    def load_state(self, d):
        self.acc[...] = d[f"{self.name}.acc"]

    def data(self):
        return PointData(self.name, self.wavelengths_nm.copy(), tuple(self.spec.position_nm),
                         self.acc.copy())


@dataclass
class PointData:
    name: str
    wavelengths_nm: np.ndarray
    position_nm: tuple
    e: np.ndarray  # (3, n_freq)


def build_monitor(spec, domain, grid=None, symmetry=None):
    symmetry = symmetry or {}
    axes = tuple("xyz".index(k) for k in symmetry)
    if isinstance(spec, BoxMonitorSpec):
        m = BoxMonitor(spec, domain, grid, axes)
        m._symmetry_kinds = dict(symmetry)
        return m
    if isinstance(spec, PlaneMonitorSpec):
        return PlaneMonitor(spec, domain)
    if isinstance(spec, PointMonitorSpec):
        return PointMonitor(spec, domain)
    raise TypeError(f"unknown monitor request {spec!r}")
