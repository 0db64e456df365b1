"""Point-dipole current source with a Gaussian-modulated sinusoidal moment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..constants import omega_from_nm

EDGE_FLOOR = 0.25  # pulse amplitude at the band edges relative to its peak


@dataclass(frozen=True)
class GaussianPulse:
    """Dipole moment ``p(t) = A exp(-(t-t0)^2 / 2 tau^2) sin(wc (t - t0))``.

    The driving current is ``J = dp/dt``; its spectrum has no DC content.
    """

    omega_c: float
    tau: float
    t0: float
    amplitude: float = 1.0

    @classmethod
    def for_band(cls, center_nm: float, band_nm: tuple[float, float],
                 amplitude: float = 1.0, bandwidth_factor: float = 1.0) -> "GaussianPulse":
        """Pulse centred at ``center_nm`` whose spectrum at the band edges is
        ``EDGE_FLOOR`` of the peak (times ``bandwidth_factor`` widening)."""
        wc = omega_from_nm(center_nm)
        dw = max(abs(omega_from_nm(band_nm[0]) - wc), abs(omega_from_nm(band_nm[1]) - wc))
        tau = math.sqrt(2.0 * math.log(1.0 / EDGE_FLOOR)) / (dw * bandwidth_factor)
        return cls(omega_c=wc, tau=tau, t0=5.0 * tau, amplitude=amplitude)

    def moment(self, t):
        s = np.asarray(t, dtype=float) - self.t0
        return self.amplitude * np.exp(-0.5 * (s / self.tau) ** 2) * np.sin(self.omega_c * s)

    def current(self, t):
        s = np.asarray(t, dtype=float) - self.t0
        g = np.exp(-0.5 * (s / self.tau) ** 2)
        return self.amplitude * g * (self.omega_c * np.cos(self.omega_c * s)
                                     - s / self.tau**2 * np.sin(self.omega_c * s))

    def current_spectrum(self, omega):
        """Analytic ``int J(t) exp(i w t) dt``."""
        w = np.asarray(omega, dtype=float)
        # moment spectrum, then J = dp/dt gives a factor -i w
        g = lambda d: self.tau * math.sqrt(2 * math.pi) * np.exp(-0.5 * (d * self.tau) ** 2)
        pw = (g(w + self.omega_c) - g(w - self.omega_c)) / (2j)
        return -1j * w * self.amplitude * pw * np.exp(1j * w * self.t0)

    @property
    def duration(self) -> float:
        """Time after which the drive is negligible (``t0 + 5 tau``)."""
        return self.t0 + 5.0 * self.tau


@dataclass(frozen=True)
class DipoleSource:
    position_nm: tuple[float, float, float]
    orientation: tuple[float, float, float]
    pulse: GaussianPulse


@dataclass
class EdgeStencil:
    """Flat padded-array indices and trilinear weights of a point on one E component.

    ``multiplicity`` counts mirror images of each edge removed by symmetry
    planes (used when summing power over the full structure).
    """

    component: int
    index: np.ndarray
    weight: np.ndarray
    multiplicity: np.ndarray


def edge_stencil(domain, component: int, point_nm, symmetric_axes=()) -> EdgeStencil:
    """Trilinear stencil of ``point_nm`` on the ``component`` (0, 1, 2) E array.

    Edges that fall on the negative side of a symmetry plane are dropped; the
    surviving off-plane edges get multiplicity 2 per such plane.
    """
    dx = domain.dx_nm
    shape = tuple(n + 2 for n in domain.shape)
    lo_idx, frac = [], []
    for a in range(3):
        off = 0.5 if a == component else 0.0
        u = (point_nm[a] - domain.origin_nm[a]) / dx - off
        i0 = int(math.floor(u + 1e-9))
        f = u - i0
        if abs(f) < 1e-9:
            f = 0.0
        lo_idx.append(i0)
        frac.append(f)
    idx, w, mult = [], [], []
    for cx in (0, 1):
        for cy in (0, 1):
            for cz in (0, 1):
                c = (cx, cy, cz)
                wt = 1.0
                for a in range(3):
                    wt *= frac[a] if c[a] else 1.0 - frac[a]
                if wt == 0.0:
                    continue
                node = [lo_idx[a] + c[a] for a in range(3)]
                m = 1
                keep = True
                for a in symmetric_axes:
                    off = 0.5 if a == component else 0.0
                    coord = node[a] + off
                    if coord < -1e-9:
                        keep = False
                    elif coord > 1e-9:
                        m *= 2
                if not keep:
                    continue
                n_max = domain.shape
                for a in range(3):
                    top = n_max[a] - (1 if a == component else 0)
                    if not 0 <= node[a] <= top:
                        raise ValueError("source stencil leaves the domain")
                p = [node[a] + 1 for a in range(3)]
                idx.append(np.ravel_multi_index(p, shape))
                w.append(wt)
                mult.append(m)
    return EdgeStencil(component, np.array(idx, dtype=np.int64), np.array(w, dtype=float),
                       np.array(mult, dtype=float))
