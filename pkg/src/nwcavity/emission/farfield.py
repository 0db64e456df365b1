"""Near-to-far-field projection and far-field figures of merit.

Equivalent currents on the monitor surface are ``J = n x H`` and
``M = -n x E``; with ``exp(-i w t)`` phasors the far-zone field is::

    r E_theta exp(-ikr) =  (ik / 4 pi) (L_phi + eta N_theta)
    r E_phi   exp(-ikr) = -(ik / 4 pi) (L_theta - eta N_phi)

where ``N`` and ``L`` are the surface integrals of ``J`` and ``M`` weighted by
``exp(-ik r_hat . r')``.  Radiation intensity is
``U = (|E_theta|^2 + |E_phi|^2) r^2 / (2 eta)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..constants import C0, ETA0, NM

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FarField:
    wavelength_nm: float
    theta_deg: np.ndarray
    phi_deg: np.ndarray
    e_theta: np.ndarray  # (n_theta, n_phi), r E exp(-ikr)
    e_phi: np.ndarray

    @property
    def intensity(self) -> np.ndarray:
        """Power per unit solid angle."""
        return (np.abs(self.e_theta) ** 2 + np.abs(self.e_phi) ** 2) / (2.0 * ETA0)

    def scaled(self, alpha: complex) -> "FarField":
        return FarField(self.wavelength_nm, self.theta_deg, self.phi_deg,
                        self.e_theta * alpha, self.e_phi * alpha)


def angular_grid(theta_max_deg: float = 90.0, dtheta_deg: float = 0.5, dphi_deg: float = 2.0):
    nt = int(round(theta_max_deg / dtheta_deg)) + 1
    npf = int(round(360.0 / dphi_deg))
    return np.linspace(0.0, theta_max_deg, nt), np.arange(npf) * dphi_deg


def _images(symmetry: dict, ground_nm: float | None = None):
    """Every combination of the mirror planes: list of [(axis, parity, position_m), ...]."""
    planes = [("xyz".index(ax), -1.0 if kind == "pec" else 1.0, 0.0)
              for ax, kind in symmetry.items()]
    if ground_nm is not None:
        planes.append((2, -1.0, ground_nm * NM))
    out = []
    for r in range(len(planes) + 1):
        out.extend(itertools.combinations(planes, r))
    return out


def _face_vectors(face, q):
    """Full 3-vectors of tangential E and H (n_u, n_v, 3) and the unit normal."""
    a, b = face.tangential
    nu, nv = len(face.u_nm), len(face.v_nm)
    e = np.zeros((nu, nv, 3), dtype=complex)
    h = np.zeros((nu, nv, 3), dtype=complex)
    e[..., a] = face.e[0, q].reshape(nu, nv)
    e[..., b] = face.e[1, q].reshape(nu, nv)
    h[..., a] = face.h[0, q].reshape(nu, nv)
    h[..., b] = face.h[1, q].reshape(nu, nv)
    n = np.zeros(3)
    n[face.axis] = face.side
    return e, h, n


def near_to_far(box, wavelength_nm: float, theta_deg=None, phi_deg=None,
                require_air: bool = True, ground_nm="auto") -> FarField:
    """Project the box phasors at (the nearest stored sample to) ``wavelength_nm``.

    Faces removed by mirror symmetry are restored from their images.  A box
    with an open floor stands on a reflector: its currents are imaged in a
    perfectly conducting plane at ``ground_nm`` (``"auto"``: the ``z = 0``
    substrate surface when the floor is open, none otherwise), which is
    valid for the upper hemisphere.  The result is on a (theta, phi) grid,
    by default the upper hemisphere at 0.5 deg x 2 deg.
    """
    if ground_nm == "auto":
        ground_nm = 0.0 if "z-" in box.open_faces else None
    if require_air and not box.in_air:
        raise ValueError(f"monitor {box.name!r} has a face crossing non-air material")
    wls = np.asarray(box.wavelengths_nm)
    q = int(np.argmin(np.abs(wls - wavelength_nm)))
    lam = float(wls[q])
    if theta_deg is None or phi_deg is None:
        t, p = angular_grid()
        theta_deg = t if theta_deg is None else theta_deg
        phi_deg = p if phi_deg is None else phi_deg
    th = np.radians(np.asarray(theta_deg, dtype=float))
    ph = np.radians(np.asarray(phi_deg, dtype=float))
    T, P = np.meshgrid(th, ph, indexing="ij")
    rhat = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    k = 2.0 * math.pi / (lam * NM)
    N = np.zeros((rhat.shape[0], 3), dtype=complex)
    L = np.zeros((rhat.shape[0], 3), dtype=complex)
    for face in box.faces:
        e0, h0, n0 = _face_vectors(face, q)
        a, b = face.tangential
        area = np.outer(face.du_nm, face.dv_nm) * NM * NM
        for image in _images(box.symmetry, ground_nm):
            e, h, n = e0.copy(), h0.copy(), n0.copy()
            coords = {a: face.u_nm * NM, b: face.v_nm * NM, face.axis: face.plane_nm * NM}
            for ax, parity, pos in image:
                # E(Rr) = p R E(r), H(Rr) = -p R H(r)
                e *= parity
                e[..., ax] *= -1.0
                h *= -parity
                h[..., ax] *= -1.0
                n[ax] *= -1.0
                coords[ax] = 2.0 * pos - coords[ax]
            j = np.cross(n, h) * area[..., None]
            m = -np.cross(n, e) * area[..., None]
            pa = np.exp(-1j * k * np.outer(rhat[:, a], coords[a]))
            pb = np.exp(-1j * k * np.outer(rhat[:, b], coords[b]))
            pc = np.exp(-1j * k * rhat[:, face.axis] * coords[face.axis])
            for comp in range(3):
                if comp == face.axis:
                    continue  # tangential currents only
                for src, acc in ((j, N), (m, L)):
                    tmp = pa @ src[..., comp]
                    acc[:, comp] += np.einsum("dj,dj->d", tmp, pb) * pc
    ct, st = np.cos(T).ravel(), np.sin(T).ravel()
    cp, sp = np.cos(P).ravel(), np.sin(P).ravel()
    n_t = N[:, 0] * ct * cp + N[:, 1] * ct * sp - N[:, 2] * st
    n_p = -N[:, 0] * sp + N[:, 1] * cp
    l_t = L[:, 0] * ct * cp + L[:, 1] * ct * sp - L[:, 2] * st
    l_p = -L[:, 0] * sp + L[:, 1] * cp
    pref = 1j * k / (4.0 * math.pi)
    e_t = pref * (l_p + ETA0 * n_t)
    e_p = -pref * (l_t - ETA0 * n_p)
    shape = T.shape
    return FarField(lam, np.degrees(th), np.degrees(ph), e_t.reshape(shape), e_p.reshape(shape))


# ----------------------------------------------------------------------
# angular quadrature

def _phi_weights(phi_deg: np.ndarray) -> np.ndarray:
    """Uniform periodic weights (radians) for a full-circle phi grid."""
    n = len(phi_deg)
    return np.full(n, 2.0 * math.pi / n)


def _theta_integral(theta_rad: np.ndarray, g: np.ndarray, upper: float) -> float:
    """Trapezoid integral of ``g(theta)`` from the first sample to ``upper``.

    The last partial segment is integrated exactly for a linear interpolant.
    """
    if upper <= theta_rad[0]:
        return 0.0
    total = 0.0 * g[0]
    for i in range(len(theta_rad) - 1):
        t0, t1 = theta_rad[i], theta_rad[i + 1]
        if t0 >= upper:
            break
        if t1 <= upper:
            total += 0.5 * (g[i] + g[i + 1]) * (t1 - t0)
        else:
            gu = g[i] + (g[i + 1] - g[i]) * (upper - t0) / (t1 - t0)
            total += 0.5 * (g[i] + gu) * (upper - t0)
    return complex(total) if np.iscomplexobj(g) else float(total)


def integrate(ff: FarField, values: np.ndarray, theta_max_deg: float | None = None):
    """Integral of ``values(theta, phi)`` over solid angle up to ``theta_max_deg``
    (complex when ``values`` is)."""
    th = np.radians(ff.theta_deg)
    g = (np.asarray(values) * _phi_weights(ff.phi_deg)[None, :]).sum(axis=1) * np.sin(th)
    upper = th[-1] if theta_max_deg is None else math.radians(theta_max_deg)
    return _theta_integral(th, g, min(upper, th[-1]))


def radiated_power(ff: FarField, theta_max_deg: float | None = None) -> float:
    return integrate(ff, ff.intensity, theta_max_deg)


def extraction_efficiency(ff: FarField, total_power: float, na: float) -> float:
    """Far-field power inside the cone ``theta <= asin(NA)`` over ``total_power``."""
    if not 0.0 < na <= 1.0:
        raise ValueError("NA must lie in (0, 1]")
    if total_power <= 0:
        raise ValueError("total emitted power must be positive")
    return radiated_power(ff, math.degrees(math.asin(na))) / total_power


# ----------------------------------------------------------------------
# Gaussian overlap

def gaussian_reference(ff: FarField, theta0_deg: float):
    """x-polarized angular Gaussian ``exp(-theta^2/theta0^2)`` on ``ff``'s grid."""
    th = np.radians(ff.theta_deg)[:, None]
    ph = np.radians(ff.phi_deg)[None, :]
    amp = np.exp(-(th / math.radians(theta0_deg)) ** 2)
    return amp * np.cos(ph), -amp * np.sin(ph)


def recentred(ff: FarField, z_nm: float) -> FarField:
    """Far field with its phase referred to the point ``(0, 0, z_nm)``."""
    k = 2.0 * math.pi / ff.wavelength_nm
    ph = np.exp(1j * k * z_nm * np.cos(np.radians(ff.theta_deg)))[:, None]
    return FarField(ff.wavelength_nm, ff.theta_deg, ff.phi_deg, ff.e_theta * ph, ff.e_phi * ph)


def _overlap(ff: FarField, theta0_deg: float, mode: str) -> float:
    gt, gp = gaussian_reference(ff, theta0_deg)
    ee = np.abs(ff.e_theta) ** 2 + np.abs(ff.e_phi) ** 2
    gg = gt ** 2 + gp ** 2
    if mode == "field":
        num = abs(integrate(ff, ff.e_theta * gt + ff.e_phi * gp)) ** 2
    elif mode == "intensity":
        num = integrate(ff, np.sqrt(ee * gg)) ** 2
    else:
        raise ValueError("mode must be 'field' or 'intensity'")
    den = integrate(ff, ee) * integrate(ff, gg)
    return float(num / den) if den > 0 else 0.0


def _scan_golden(f, grid, tol):
    """Maximize ``f`` over a coarse grid, then refine by golden section."""
    vals = [f(t) for t in grid]
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    best, val = _golden(lambda t: -f(t), lo, hi, tol)
    if vals[i] > -val:
        return float(grid[i]), float(vals[i])
    return best, -val


def gaussian_overlap(ff: FarField, mode: str = "field", theta0_max_deg: float = 60.0,
                     tol_deg: float = 1e-4, phase_center_nm=None) -> tuple[float, float]:
    """Best overlap with an angular Gaussian and the divergence that achieves it.

    ``mode="field"`` is the complex amplitude overlap with a uniformly
    x-polarized Gaussian; ``mode="intensity"`` compares intensity profiles
    only.  The divergence is bracketed on a coarse scan of (0, theta0_max]
    and refined by golden-section search.

    The field overlap depends on where the far-field phase is referred to.
    ``phase_center_nm`` is a point on the axis (a number), or a
    ``(lo, hi)`` range searched for the best-focused centre, or ``None`` to
    keep the phase as stored.
    """
    if mode == "field" and isinstance(phase_center_nm, tuple):
        zlo, zhi = phase_center_nm
        zgrid = np.linspace(zlo, zhi, max(int((zhi - zlo) / (ff.wavelength_nm / 16.0)), 2) + 1)

        def best_for(z):
            return gaussian_overlap(recentred(ff, z), mode, theta0_max_deg, 1e-2)[0]

        z, _ = _scan_golden(best_for, zgrid, 0.1)
        return gaussian_overlap(recentred(ff, z), mode, theta0_max_deg, tol_deg)
    if mode == "field" and phase_center_nm is not None:
        ff = recentred(ff, float(phase_center_nm))
    grid = np.linspace(theta0_max_deg / 60.0, theta0_max_deg, 60)
    return _scan_golden(lambda t: _overlap(ff, t, mode), grid, tol_deg)[::-1]


def _golden(f, lo, hi, tol):
    """Minimize ``f`` on [lo, hi]; returns (argmin, min)."""
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)
    best = 0.5 * (lo + hi)
    return float(best), float(f(best))


# ----------------------------------------------------------------------
# export

def write_farfield(path, ff: FarField):
    """Columns: theta_deg, phi_deg, power density (W/sr), Re/Im E_theta, Re/Im E_phi."""
    T, P = np.meshgrid(ff.theta_deg, ff.phi_deg, indexing="ij")
    cols = np.column_stack([T.ravel(), P.ravel(), ff.intensity.ravel(),
                            ff.e_theta.real.ravel(), ff.e_theta.imag.ravel(),
                            ff.e_phi.real.ravel(), ff.e_phi.imag.ravel()])
    header = (f"wavelength_nm={ff.wavelength_nm:.6f}\n"
              "theta_deg\tphi_deg\tpower_W_per_sr\tre_E_theta\tim_E_theta\tre_E_phi\tim_E_phi")
    np.savetxt(path, cols, fmt="%.10g", delimiter="\t", header=header)


def read_farfield(path) -> FarField:
    with open(path) as fh:
        first = fh.readline()
    lam = float(first.split("=")[1])
    d = np.loadtxt(path, ndmin=2)
    th = np.unique(d[:, 0])
    ph = np.unique(d[:, 1])
    shape = (len(th), len(ph))
    return FarField(lam, th, ph, (d[:, 3] + 1j * d[:, 4]).reshape(shape),
                    (d[:, 5] + 1j * d[:, 6]).reshape(shape))


def write_polar_grid(path, ff: FarField):
    """Gridded intensity (rows: theta, columns: phi) for polar heat-map plots.

    The first row holds phi in degrees and the first column theta in degrees.
    """
    grid = np.zeros((len(ff.theta_deg) + 1, len(ff.phi_deg) + 1))
    grid[0, 1:] = ff.phi_deg
    grid[1:, 0] = ff.theta_deg
    grid[1:, 1:] = ff.intensity
    np.savetxt(path, grid, fmt="%.8g", delimiter="\t",
               header="first row: phi_deg; first column: theta_deg; values: W/sr")
